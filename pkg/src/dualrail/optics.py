"""Six-mode chip unitary construction and general matrix utilities.

The processor is a six-mode interferometer: two dual-rail qubits on modes
2-3 and 4-5 (1-based), modes 1 and 6 ancillary.  Light passes a preparation
stage (one MZI plus one phase shifter per qubit), a post-selected CNOT
section built from 1/3 couplers, and a mirrored measurement stage.  All
component conventions follow the directional-coupler matrix

    DC(R) = [[sqrt(R), i sqrt(1-R)], [i sqrt(1-R), sqrt(R)]]

with R the power reflectivity (bar transmission), and phase shifters acting
as diag(exp(i*phi), 1) on their mode pair.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConvergenceError

UNITARY_TOL = 1e-10

# 0-based rails: qubit 1 lives on modes (1, 2), qubit 2 on (3, 4)
QUBIT1_RAILS = (1, 2)
QUBIT2_RAILS = (3, 4)
ANCILLA_MODES = (0, 5)

# Fock occupation vectors for the photon-pair input and the four
# registered two-fold coincidences C1..C4.
INPUT_STATE = (0, 1, 0, 1, 0, 0)
COINCIDENCE_STATES = (
    (0, 1, 0, 1, 0, 0),
    (0, 1, 0, 0, 1, 0),
    (0, 0, 1, 1, 0, 0),
    (0, 0, 1, 0, 1, 0),
)

# Setting every tunable phase to pi reduces each single-qubit stage to the
# identity (up to a global phase), leaving the bare CNOT section.
IDENTITY_GATE_PHASES = (np.pi,) * 8


def dc_matrix(reflectivity: float) -> np.ndarray:
    """2x2 directional-coupler unitary for power reflectivity R in [0, 1]."""
    r = float(reflectivity)
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"reflectivity must lie in [0, 1], got {r}")
    t = np.sqrt(1.0 - r)
    s = np.sqrt(r)
    return np.array([[s, 1j * t], [1j * t, s]], dtype=complex)


def phase_matrix(phi: float) -> np.ndarray:
    """2x2 phase shifter diag(exp(i*phi), 1)."""
    return np.diag([np.exp(1j * float(phi)), 1.0]).astype(complex)


def mzi_matrix(r1: float, r2: float, phi: float) -> np.ndarray:
    """Mach-Zehnder block DC(r2) @ P(phi) @ DC(r1)."""
    return dc_matrix(r2) @ phase_matrix(phi) @ dc_matrix(r1)


def embed(block: np.ndarray, modes: tuple[int, ...], n_modes: int = 6) -> np.ndarray:
    """Place a k x k block on the given modes of an n-mode identity."""
    k = block.shape[0]
    if block.shape != (k, k) or len(modes) != k:
        raise ValueError("block shape and mode count disagree")
    out = np.eye(n_modes, dtype=complex)
    out[np.ix_(modes, modes)] = block
    return out


@dataclass(frozen=True)
class ChipParameters:
    """The 23 real numbers defining the chip unitary.

    splitting_ratios: R1..R13 power reflectivities.  R1-R4 are the
        preparation MZI couplers (qubit 1 then qubit 2), R5-R9 the CNOT
        section (R5 input coupler, R6-R8 the central 1/3 layer on mode
        pairs (1,2)/(3,4)/(5,6), R9 output coupler), R10-R13 the
        measurement MZI couplers.
    tunable_phases: phi1..phi8 in radians.  phi1/phi3 preparation MZI
        internal phases, phi2/phi4 preparation rail phases, phi5/phi7
        measurement rail phases, phi6/phi8 measurement MZI internal
        phases (qubit 1 then qubit 2 within each stage).
    static_phases: theta1, theta2 inside the CNOT section.
    """

    splitting_ratios: tuple[float, ...]
    tunable_phases: tuple[float, ...]
    static_phases: tuple[float, float]

    def __post_init__(self):
        ratios = tuple(float(r) for r in self.splitting_ratios)
        phases = tuple(float(p) for p in self.tunable_phases)
        static = tuple(float(t) for t in self.static_phases)
        if len(ratios) != 13:
            raise ValueError("expected 13 splitting ratios")
        if len(phases) != 8:
            raise ValueError("expected 8 tunable phases")
        if len(static) != 2:
            raise ValueError("expected 2 static phases")
        for j, r in enumerate(ratios, start=1):
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"R{j}={r} outside [0, 1]")
        object.__setattr__(self, "splitting_ratios", ratios)
        object.__setattr__(self, "tunable_phases", phases)
        object.__setattr__(self, "static_phases", static)

    @classmethod
    def ideal(cls) -> "ChipParameters":
        """Design-value chip: R6=R7=R8=1/3, every other ratio 1/2, thetas 0."""
        ratios = [0.5] * 13
        for j in (5, 6, 7):
            ratios[j] = 1.0 / 3.0
        return cls(tuple(ratios), (0.0,) * 8, (0.0, 0.0))

    def with_phases(self, phases) -> "ChipParameters":
        return replace(self, tunable_phases=tuple(float(p) for p in phases))

    def with_ratio(self, index: int, value: float) -> "ChipParameters":
        """Return a copy with R<index> (1-based) replaced."""
        ratios = list(self.splitting_ratios)
        ratios[index - 1] = float(value)
        return replace(self, splitting_ratios=tuple(ratios))

    def with_static_phases(self, theta1: float, theta2: float) -> "ChipParameters":
        return replace(self, static_phases=(float(theta1), float(theta2)))

    def perturbed(self, ratio_sigma: float, rng: np.random.Generator) -> "ChipParameters":
        """Gaussian-perturb every splitting ratio, clipped to [0, 1]."""
        ratios = np.clip(
            np.array(self.splitting_ratios) + rng.normal(0.0, ratio_sigma, 13),
            0.0, 1.0,
        )
        return replace(self, splitting_ratios=tuple(ratios))


def _prep_block(r_a, r_b, phi_mzi, phi_rail):
    # propagation order: DC, internal phase, DC, rail phase
    return phase_matrix(phi_rail) @ mzi_matrix(r_a, r_b, phi_mzi)


def _meas_block(r_a, r_b, phi_rail, phi_mzi):
    # mirror image of the preparation stage: rail phase first
    return mzi_matrix(r_a, r_b, phi_mzi) @ phase_matrix(phi_rail)


def cnot_section(params: ChipParameters) -> np.ndarray:
    """The post-selected CNOT block B3 T2 B2 T1 B1 on six modes."""
    r = params.splitting_ratios
    th1, th2 = params.static_phases
    b1 = embed(dc_matrix(r[4]), QUBIT2_RAILS)
    t1 = embed(phase_matrix(th1), QUBIT2_RAILS)
    b2 = (
        embed(dc_matrix(r[5]), (0, 1))
        @ embed(dc_matrix(r[6]), (2, 3))
        @ embed(dc_matrix(r[7]), (4, 5))
    )
    t2 = embed(phase_matrix(th2), QUBIT2_RAILS)
    b3 = embed(dc_matrix(r[8]), QUBIT2_RAILS)
    return b3 @ t2 @ b2 @ t1 @ b1


def build_chip_unitary(params: ChipParameters) -> np.ndarray:
    """Full 6x6 chip unitary U = U2 @ CNOT @ U1."""
    r = params.splitting_ratios
    p = params.tunable_phases
    u1 = (
        embed(_prep_block(r[0], r[1], p[0], p[1]), QUBIT1_RAILS)
        @ embed(_prep_block(r[2], r[3], p[2], p[3]), QUBIT2_RAILS)
    )
    u2 = (
        embed(_meas_block(r[9], r[10], p[4], p[5]), QUBIT1_RAILS)
        @ embed(_meas_block(r[11], r[12], p[6], p[7]), QUBIT2_RAILS)
    )
    return u2 @ cnot_section(params) @ u1


def is_unitary(matrix: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    dev = m.conj().T @ m - np.eye(m.shape[0])
    return float(np.max(np.abs(dev))) < tol


def fidelity(u_e: np.ndarray, u_t: np.ndarray) -> float:
    """Normalized trace-overlap fidelity |Tr(Ue^dag Ut)|^2 / (Tr Ue^dag Ue * Tr Ut^dag Ut).

    Global-phase invariant; equals 1 iff the arguments are proportional.
    Works for any equal-shape matrices (unitaries, |U|^2 matrices, process
    matrices alike).
    """
    a = np.asarray(u_e, dtype=complex)
    b = np.asarray(u_t, dtype=complex)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    den = np.real(np.trace(a.conj().T @ a)) * np.real(np.trace(b.conj().T @ b))
    if den <= 0.0:
        raise ValueError("fidelity undefined for zero matrix")
    return float(abs(np.trace(a.conj().T @ b)) ** 2 / den)


def sinkhorn_scale(
    power_matrix: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 10000,
) -> np.ndarray:
    """Scale a nonnegative matrix to doubly stochastic form D1 @ M @ D2.

    Alternates row and column normalizations until every row and column sum
    is within `tol` of 1.  Raises ConvergenceError (with the residual) if the
    iteration cap is hit.
    """
    m = np.array(power_matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("expected a square matrix")
    if np.any(m < 0):
        raise ValueError("expected nonnegative entries")
    if np.any(m.sum(axis=1) <= 0) or np.any(m.sum(axis=0) <= 0):
        raise ValueError("row and column sums must be strictly positive")

    for _ in range(max_iter):
        m /= m.sum(axis=1, keepdims=True)
        m /= m.sum(axis=0, keepdims=True)
        residual = max(
            np.max(np.abs(m.sum(axis=1) - 1.0)),
            np.max(np.abs(m.sum(axis=0) - 1.0)),
        )
        if residual < tol:
            return m
    raise ConvergenceError(
        f"Sinkhorn scaling did not reach {tol} within {max_iter} iterations",
        residual=residual,
    )


# ---------------------------------------------------------------------------
# key-value config files: R1..R13, phi1..phi8, theta1, theta2


def save_chip_parameters(params: ChipParameters, path) -> None:
    lines = []
    for j, r in enumerate(params.splitting_ratios, start=1):
        lines.append(f"R{j} = {r!r}")
    for j, p in enumerate(params.tunable_phases, start=1):
        lines.append(f"phi{j} = {p!r}")
    lines.append(f"theta1 = {params.static_phases[0]!r}")
    lines.append(f"theta2 = {params.static_phases[1]!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_chip_parameters(path) -> ChipParameters:
    values = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"malformed chip parameter line: {raw!r}")
            key, _, val = line.partition("=")
            values[key.strip()] = float(val)
    try:
        ratios = tuple(values[f"R{j}"] for j in range(1, 14))
        phases = tuple(values[f"phi{j}"] for j in range(1, 9))
        static = (values["theta1"], values["theta2"])
    except KeyError as exc:
        raise ValueError(f"missing chip parameter {exc}") from exc
    return ChipParameters(ratios, phases, static)
