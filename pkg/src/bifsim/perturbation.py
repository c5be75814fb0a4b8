"""Return-to-initial-state resummation and the extended three-state matrix.

Reversibility lets the coupled system fall back to its unscattered initial
state any number of times; summing the repeated-return diagrams gives a
geometric series for the probability of remaining unscattered.  Keeping the
initial state as an explicit third basis vector yields a 3x3 pure-state
density matrix whose scattering block reproduces the 2x2 final state once
renormalized, at any coupling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateReductionError, SaturationError
from .model import AggregateY, DensityMatrix2, QubitState

__all__ = [
    "ExtendedDensityMatrix3",
    "stay_probability",
    "scatter_probability",
    "stay_probability_partial_sum",
    "rho_bar_3x3",
    "reduce_strong_coupling",
]

_LOG_LIMIT = 700.0
_TOL = 1e-12


@dataclass(frozen=True)
class ExtendedDensityMatrix3:
    """3x3 pure-state matrix in the basis (unchanged initial, plus, minus)."""

    matrix: np.ndarray
    g: float

    def __post_init__(self):
        m = self.matrix
        if m.shape != (3, 3):
            raise ConfigurationError(f"matrix must be 3x3 (got shape {m.shape})")
        if not self.g > 0.0:
            raise ConfigurationError(f"coupling g must be > 0 (got {self.g!r})")
        if np.linalg.norm(m - m.conj().T) > _TOL:
            raise ConfigurationError("extended matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > _TOL:
            raise ConfigurationError("extended matrix must have unit trace")
        if float(np.linalg.norm(m @ m - m)) > _TOL:
            raise ConfigurationError("extended matrix must be a rank-1 projector")
        m.setflags(write=False)

    @property
    def stay_prob(self) -> float:
        return float(self.matrix[0, 0].real)

    @property
    def scattering_submatrix(self) -> np.ndarray:
        return self.matrix[1:, 1:]

    def purity_defect(self) -> float:
        m = self.matrix
        return float(np.linalg.norm(m @ m - m))


def stay_probability(g: float, w_hat: float) -> float:
    """Probability that the initial state survives: the summed return series 1/(1 + g^2 w)."""
    if not g > 0.0:
        raise ConfigurationError(f"g must be > 0 (got {g!r})")
    if not w_hat > 0.0:
        raise ConfigurationError(f"w_hat must be > 0 (got {w_hat!r})")
    return 1.0 / (1.0 + g * g * w_hat)


def scatter_probability(g: float, w_hat: float) -> float:
    """Complement of the stay probability: g^2 w / (1 + g^2 w)."""
    return 1.0 - stay_probability(g, w_hat)


def stay_probability_partial_sum(g: float, w_hat: float, terms: int) -> float:
    """Partial sum of the return series, sum_{k<terms} (-g^2 w)^k.

    Converges (in absolute error, monotonically) to ``stay_probability``
    when g^2 w < 1; exposed to make the resummation inspectable.
    """
    if terms < 1:
        raise ConfigurationError(f"terms must be >= 1 (got {terms!r})")
    if not g > 0.0 or not w_hat > 0.0:
        raise ConfigurationError("g and w_hat must be > 0")
    x = -g * g * w_hat
    acc = 0.0
    power = 1.0
    for _ in range(terms):
        acc += power
        power *= x
    return acc


def rho_bar_3x3(g: float, agg: AggregateY, psi: QubitState) -> ExtendedDensityMatrix3:
    """Extended final-state matrix including the unchanged-initial channel.

    Equals the outer product v v† / ||v||^2 with
    v = (exp(xi/4)/g, psi+ exp(xi y / 2), psi- exp(-xi y / 2)); assembled
    entrywise from exponent-shifted terms so large xi y stays representable.
    """
    if not g > 0.0:
        raise ConfigurationError(f"g must be > 0 (got {g!r})")
    s = agg.xi * agg.y
    log_pp = -math.inf if psi.plus_prob == 0.0 else math.log(psi.plus_prob)
    log_pm = -math.inf if psi.minus_prob == 0.0 else math.log(psi.minus_prob)
    t0 = -2.0 * math.log(g) + 0.5 * agg.xi
    tp = log_pp + s
    tm = log_pm - s
    m = max(t0, tp, tm)
    if m > _LOG_LIMIT or agg.xi * abs(agg.y) > _LOG_LIMIT:
        raise SaturationError("extended-matrix exponent exceeds the representable range")
    d0 = math.exp(t0 - m)
    dp = math.exp(tp - m) if tp > -math.inf else 0.0
    dm = math.exp(tm - m) if tm > -math.inf else 0.0
    denom = d0 + dp + dm

    def phase(z: complex) -> complex:
        a = abs(z)
        return z / a if a > 0.0 else 0.0j

    ph_p = phase(psi.psi_plus)
    ph_m = phase(psi.psi_minus)
    e_0p = math.exp(0.5 * (t0 + tp) - m) if tp > -math.inf else 0.0
    e_0m = math.exp(0.5 * (t0 + tm) - m) if tm > -math.inf else 0.0
    e_pm = math.exp(0.5 * (tp + tm) - m) if (tp > -math.inf and tm > -math.inf) else 0.0

    out = np.empty((3, 3), dtype=complex)
    out[0, 0] = d0 / denom
    out[1, 1] = dp / denom
    out[2, 2] = dm / denom
    out[0, 1] = e_0p * ph_p.conjugate() / denom
    out[1, 0] = out[0, 1].conjugate()
    out[0, 2] = e_0m * ph_m.conjugate() / denom
    out[2, 0] = out[0, 2].conjugate()
    out[1, 2] = e_pm * ph_p * ph_m.conjugate() / denom
    out[2, 1] = out[1, 2].conjugate()
    return ExtendedDensityMatrix3(matrix=out, g=g)


def reduce_strong_coupling(ext: ExtendedDensityMatrix3) -> DensityMatrix2:
    """Renormalize the scattering block to a 2x2 state.

    The block is proportional to the unnormalized final-state rate matrix,
    so the result equals the closed-form final state at any coupling; as
    g -> infinity the unchanged-initial channel empties and the extended
    matrix itself converges to this embedding.
    """
    sub = ext.scattering_submatrix
    tr = float(sub[0, 0].real + sub[1, 1].real)
    if not tr > 1e-280:
        raise DegenerateReductionError(
            f"scattering block trace {tr!r} too small to renormalize"
        )
    return DensityMatrix2(
        float(sub[0, 0].real / tr),
        complex(sub[0, 1] / tr),
        float(sub[1, 1].real / tr),
    )
