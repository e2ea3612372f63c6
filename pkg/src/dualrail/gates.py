"""Single-qubit gate quality estimation from component imperfections.

Models what limits a programmed rotation on this hardware: directional
coupler splitting-ratio deviations (Rx only) and the finite resolution of
the current source driving the phase shifter.  Electrical noise and any
other error source stay out of the model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import optics
from .calibration import DacSpec, TWO_PI
from .errors import InfeasibleTargetError


@dataclass(frozen=True)
class GateModel:
    """One programmable gate: kind 'rx' (MZI) or 'rz' (bare phase shifter).

    The calibration curve is phi(I) = phi0 + alpha * I^2 with alpha in
    rad/mA^2 and I quantized by `dac`.
    """

    kind: str
    alpha: float
    phi0: float = 0.0
    r1: float = 0.5
    r2: float = 0.5
    dac: DacSpec = field(default_factory=DacSpec)

    def __post_init__(self):
        if self.kind not in ("rx", "rz"):
            raise ValueError("gate kind must be 'rx' or 'rz'")
        if self.alpha <= 0:
            raise ValueError("calibration slope alpha must be positive")
        for r in (self.r1, self.r2):
            if not 0.0 <= r <= 1.0:
                raise ValueError("splitting ratios must lie in [0, 1]")

    def phase_range(self) -> tuple[float, float]:
        lo = self.phi0
        return lo, lo + self.alpha * self.dac.full_scale ** 2

    def matrix(self, phi: float) -> np.ndarray:
        if self.kind == "rx":
            return optics.mzi_matrix(self.r1, self.r2, phi)
        return optics.phase_matrix(phi)

    def target_matrix(self, phi: float) -> np.ndarray:
        """The intended gate at design ratios."""
        if self.kind == "rx":
            return optics.mzi_matrix(0.5, 0.5, phi)
        return optics.phase_matrix(phi)


def realizable_gate(model: GateModel, phi_target: float) -> tuple[np.ndarray, float]:
    """Closest experimentally settable gate for a target phase in [0, 2*pi).

    Maps the target through the calibration curve (wrapping by 2*pi until
    the required squared current is nonnegative), snaps the current to the
    DAC grid, and rebuilds the gate at the realized phase.
    """
    if not 0.0 <= phi_target < TWO_PI:
        raise ValueError("target phase must lie in [0, 2*pi)")
    lo, hi = model.phase_range()
    delta = np.mod(phi_target - model.phi0, TWO_PI)
    if delta > hi - lo + 1e-12:
        raise InfeasibleTargetError(
            f"phase {phi_target} outside reachable range [{lo}, {hi}]"
        )
    current = np.sqrt(delta / model.alpha)
    step = model.dac.step
    level = min(np.floor(current / step + 0.5), 2 ** model.dac.bits - 1)
    phi_realized = model.phi0 + model.alpha * (level * step) ** 2
    return model.matrix(phi_realized), float(phi_realized)


@dataclass(frozen=True)
class FidelityHistogram:
    targets: np.ndarray
    realized: np.ndarray
    fidelities: np.ndarray

    @property
    def mean(self) -> float:
        return float(self.fidelities.mean())

    @property
    def std(self) -> float:
        return float(self.fidelities.std())

    @property
    def minimum(self) -> float:
        return float(self.fidelities.min())


def fidelity_histogram(
    model: GateModel, n_samples: int, seed: int = 0
) -> FidelityHistogram:
    """Gate fidelity over uniformly random target phases in [0, 2*pi)."""
    if n_samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    targets = rng.uniform(0.0, TWO_PI, n_samples)
    realized = np.empty(n_samples)
    fids = np.empty(n_samples)
    for i, phi_t in enumerate(targets):
        u_e, phi_e = realizable_gate(model, phi_t)
        realized[i] = phi_e
        fids[i] = optics.fidelity(u_e, model.target_matrix(phi_t))
    return FidelityHistogram(targets, realized, fids)


def histogram_csv(hist: FidelityHistogram) -> str:
    lines = ["sample_index,target_phase,realized_phase,fidelity"]
    for i in range(hist.targets.size):
        lines.append(
            f"{i},{hist.targets[i]:.12g},{hist.realized[i]:.12g},"
            f"{hist.fidelities[i]:.12g}"
        )
    lines.append(f"summary,mean={hist.mean:.6f},std={hist.std:.6f},"
                 f"min={hist.minimum:.6f}")
    return "\n".join(lines) + "\n"
