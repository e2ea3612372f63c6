"""Two-photon output statistics: permanents, partial distinguishability,
and shot-noisy coincidence sampling."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import optics
from .errors import DegenerateDataError


def permanent(matrix: np.ndarray, method: str = "ryser") -> complex:
    """Matrix permanent.

    `ryser` uses Ryser's inclusion-exclusion formula with Gray-code ordered
    subset updates (O(2^n n), n <= 20).  `exact_sum` is the literal
    permutation sum kept as a cross-check oracle (n <= 8).
    """
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("permanent requires a square matrix")
    n = m.shape[0]
    if n == 0:
        return complex(1.0)
    if method == "exact_sum":
        if n > 8:
            raise ValueError("exact_sum supports n <= 8")
        total = 0.0 + 0.0j
        for perm in itertools.permutations(range(n)):
            prod = 1.0 + 0.0j
            for i, j in enumerate(perm):
                prod *= m[i, j]
            total += prod
        return complex(total)
    if method != "ryser":
        raise ValueError(f"unknown permanent method {method!r}")
    if n > 20:
        raise ValueError("ryser supports n <= 20")

    # Gray-code walk over nonempty column subsets; row_sums tracks the sum
    # of the selected columns for every row.
    row_sums = np.zeros(n, dtype=complex)
    total = 0.0 + 0.0j
    gray = 0
    for k in range(1, 1 << n):
        new_gray = k ^ (k >> 1)
        changed = new_gray ^ gray
        j = changed.bit_length() - 1
        if new_gray & changed:
            row_sums += m[:, j]
        else:
            row_sums -= m[:, j]
        gray = new_gray
        bits = bin(gray).count("1")
        total += (-1.0) ** (n - bits) * np.prod(row_sums)
    return complex(total)


def _validate_fock(state, n_modes: int) -> tuple[int, ...]:
    s = tuple(int(x) for x in state)
    if len(s) != n_modes:
        raise ValueError(f"expected {n_modes} modes, got {len(s)}")
    if any(x < 0 for x in s):
        raise ValueError("occupations must be nonnegative")
    return s


def _mode_list(state) -> list[int]:
    out = []
    for mode, occ in enumerate(state):
        out.extend([mode] * occ)
    return out


def submatrix_for_transition(U: np.ndarray, input_state, output_state) -> np.ndarray:
    """Rows picked by output occupations, columns by input occupations."""
    U = np.asarray(U, dtype=complex)
    n = U.shape[0]
    inp = _validate_fock(input_state, n)
    out = _validate_fock(output_state, n)
    if sum(inp) != sum(out):
        raise ValueError("photon number mismatch between input and output")
    rows = _mode_list(out)
    cols = _mode_list(inp)
    return U[np.ix_(rows, cols)]


def _factorial_norm(state) -> float:
    prod = 1.0
    for occ in state:
        prod *= math.factorial(occ)
    return prod


def prob_indistinguishable(U: np.ndarray, input_state, output_state) -> float:
    """|Perm(U_in,out)|^2 normalized by the occupation factorials."""
    sub = submatrix_for_transition(U, input_state, output_state)
    norm = _factorial_norm(input_state) * _factorial_norm(output_state)
    return float(abs(permanent(sub)) ** 2 / norm)


def prob_partial(U: np.ndarray, input_state, output_state, x: float) -> float:
    """Outcome probability for two photons with wavefunction overlap x.

    Interpolates between classical statistics (x=0) and the permanent
    formula (x=1): P(x) = (1-x^2) P_classical + x^2 P_indistinguishable,
    which for singly occupied outputs reduces to the explicit form
    |a|^2|d|^2 + |b|^2|c|^2 + x^2 (ad(bc)* + bc(ad)*).
    """
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"overlap x must lie in [0, 1], got {x}")
    inp = _validate_fock(input_state, np.asarray(U).shape[0])
    if sum(inp) != 2 or max(inp) != 1:
        raise ValueError(
            "prob_partial requires two photons in distinct input modes"
        )
    sub = submatrix_for_transition(U, input_state, output_state)
    norm = _factorial_norm(output_state)
    p_quantum = abs(permanent(sub)) ** 2 / norm
    p_classical = np.real(permanent(np.abs(sub) ** 2)) / norm
    x2 = x * x
    return float((1.0 - x2) * p_classical + x2 * p_quantum)


def two_photon_states(n_modes: int = 6) -> list[tuple[int, ...]]:
    """All C(n+1, 2) two-photon occupation vectors on n modes."""
    states = []
    for i in range(n_modes):
        for j in range(i, n_modes):
            occ = [0] * n_modes
            occ[i] += 1
            occ[j] += 1
            states.append(tuple(occ))
    return states


def coincidence_probabilities(U: np.ndarray, x: float = 1.0) -> np.ndarray:
    """P1..P4 for the four logical coincidence outputs with input |0,1,0,1,0,0>."""
    return np.array([
        prob_partial(U, optics.INPUT_STATE, out, x)
        for out in optics.COINCIDENCE_STATES
    ])


@dataclass(frozen=True)
class CountRecord:
    """Two-fold coincidence counts with their exposure metadata."""

    counts: tuple[int, int, int, int]
    pair_rate: float = 1.0
    exposure_time: float = 1.0

    def __post_init__(self):
        c = tuple(int(x) for x in self.counts)
        if len(c) != 4 or any(x < 0 for x in c):
            raise ValueError("counts must be four nonnegative integers")
        object.__setattr__(self, "counts", c)

    @property
    def total(self) -> int:
        return sum(self.counts)

    def normalized(self) -> np.ndarray:
        if self.total == 0:
            raise DegenerateDataError("count record sums to zero")
        return np.array(self.counts, dtype=float) / self.total


def sample_counts(
    probabilities,
    pair_rate: float,
    exposure_time: float,
    rng: np.random.Generator,
) -> CountRecord:
    """Multinomial coincidence counts with mean <C_j> = rate * T * P_j.

    The total event number rate*T is split between the four coincidence
    outcomes and an implicit discarded bucket of probability 1 - sum(P),
    mirroring post-selection.
    """
    p = np.asarray(probabilities, dtype=float)
    if p.shape != (4,):
        raise ValueError("expected four probabilities")
    if np.any(p < -1e-12):
        raise ValueError("probabilities must be nonnegative")
    p = np.clip(p, 0.0, None)
    total_p = p.sum()
    if total_p > 1.0 + 1e-9:
        raise ValueError(f"probabilities sum to {total_p} > 1")
    n_events = int(round(pair_rate * exposure_time))
    if n_events <= 0:
        raise ValueError("pair_rate * exposure_time must be positive")
    buckets = np.append(p, max(1.0 - total_p, 0.0))
    buckets /= buckets.sum()
    draw = rng.multinomial(n_events, buckets)
    return CountRecord(tuple(int(c) for c in draw[:4]), pair_rate, exposure_time)


def hom_curve(
    U: np.ndarray,
    x_values,
    input_state=(0, 0, 1, 1, 0, 0),
    output_state=(0, 0, 1, 0, 1, 0),
) -> np.ndarray:
    """Coincidence probability versus photon overlap for a HOM scan.

    Defaults to the on-chip configuration: photons into modes 3 and 4,
    coincidences monitored between modes 3 and 5 (the chip set to the bare
    CNOT acts as a balanced splitter between those modes).
    """
    return np.array([
        prob_partial(U, input_state, output_state, x) for x in x_values
    ])


def hom_visibility(probabilities) -> float:
    """(P_max - P_min) / P_max over a measured HOM curve."""
    p = np.asarray(probabilities, dtype=float)
    pmax = p.max()
    if pmax <= 0:
        raise DegenerateDataError("flat zero HOM curve has no visibility")
    return float((pmax - p.min()) / pmax)
