"""Closed-form core of the two-channel bifurcation model.

A two-level system couples to a chain of N independent subsystems.  Each
step multiplies the two channel amplitudes by random factors that enhance
one channel and suppress the other; the accumulated asymmetry y (with total
step variance xi) determines the final state in closed form.  This module
holds the per-step recursions, the aggregated exponential forms, the
normalized final-state density matrix and its weighted mean, and the
densities of the aggregate variable before and after rate selection.

All exponentials are evaluated in log space; arguments beyond +-700 raise
:class:`~bifsim.errors.SaturationError` where a finite result is required.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, SaturationError, StepDomainError

__all__ = [
    "QubitState",
    "StepSchedule",
    "ChannelAmplitudes",
    "BilinearForms",
    "AggregateY",
    "DensityMatrix2",
    "xi_total",
    "step_amplitudes",
    "step_bilinears",
    "bilinears_from_Y",
    "w_hat",
    "log_w_hat",
    "rho_final",
    "rho_peak",
    "rho_from_bilinears",
    "rho_from_log_bilinears",
    "q_density",
    "Q_density",
    "mean_final_rho",
]

#: per-step variance cap; the model's small-step expansion assumes kappa^2 << 1
DEFAULT_KAPPA_SQ_CAP = 0.1

_LOG_LIMIT = 700.0
_NORM_TOL = 1e-12


def _log_abs_sq(z: complex) -> float:
    """log |z|^2, with -inf for z == 0."""
    m = abs(z)
    return -math.inf if m == 0.0 else 2.0 * math.log(m)


@dataclass(frozen=True)
class QubitState:
    """Normalized superposition coefficients of the measured two-level system."""

    psi_plus: complex
    psi_minus: complex

    def __post_init__(self):
        norm = abs(self.psi_plus) ** 2 + abs(self.psi_minus) ** 2
        if not math.isfinite(norm) or abs(norm - 1.0) > _NORM_TOL:
            raise ConfigurationError(
                f"qubit state must be normalized: |psi_plus|^2 + |psi_minus|^2 = {norm!r}"
            )

    @classmethod
    def from_probability(cls, plus_prob: float, relative_phase: float = 0.0) -> "QubitState":
        """Build a state with |psi_plus|^2 = plus_prob and given phase on psi_minus."""
        if not 0.0 <= plus_prob <= 1.0:
            raise ConfigurationError(f"plus_prob must be within [0, 1] (got {plus_prob!r})")
        return cls(
            complex(math.sqrt(plus_prob)),
            cmath.exp(1j * relative_phase) * math.sqrt(1.0 - plus_prob),
        )

    @property
    def plus_prob(self) -> float:
        return abs(self.psi_plus) ** 2

    @property
    def minus_prob(self) -> float:
        return abs(self.psi_minus) ** 2


@dataclass(frozen=True)
class StepSchedule:
    """Per-step variances and gain factors of the interaction chain.

    ``kappa_sq[n]`` is the variance of the n-th multiplicative kick and must
    stay well below 1 (enforced via ``cap``); ``g[n]`` is the n-th gain.
    """

    kappa_sq: tuple[float, ...]
    g: tuple[float, ...] = ()
    cap: float = DEFAULT_KAPPA_SQ_CAP

    def __post_init__(self):
        if len(self.kappa_sq) == 0:
            raise ConfigurationError("schedule must contain at least one step")
        gains = self.g if self.g else tuple(1.0 for _ in self.kappa_sq)
        object.__setattr__(self, "g", gains)
        if len(gains) != len(self.kappa_sq):
            raise ConfigurationError(
                f"schedule lengths differ: {len(self.kappa_sq)} variances, {len(gains)} gains"
            )
        for n, ks in enumerate(self.kappa_sq):
            # zero-variance steps are degenerate no-ops and are tolerated
            if ks < 0.0 or not math.isfinite(ks):
                raise ConfigurationError(f"kappa_sq[{n}] must be >= 0 (got {ks!r})")
            if ks > self.cap:
                raise ConfigurationError(
                    f"kappa_sq[{n}] = {ks!r} exceeds the per-step variance cap {self.cap!r}"
                )
        for n, gn in enumerate(gains):
            if not gn > 0.0:
                raise ConfigurationError(f"g[{n}] must be > 0 (got {gn!r})")

    @classmethod
    def uniform(cls, xi: float, n_steps: int, cap: float = DEFAULT_KAPPA_SQ_CAP) -> "StepSchedule":
        """Uniform schedule with kappa_sq = xi / n_steps and unit gains."""
        if n_steps < 1:
            raise ConfigurationError(f"n_steps must be >= 1 (got {n_steps!r})")
        if not xi > 0.0:
            raise ConfigurationError(f"xi must be > 0 (got {xi!r})")
        return cls(kappa_sq=(xi / n_steps,) * n_steps, cap=cap)

    def __len__(self) -> int:
        return len(self.kappa_sq)

    @property
    def xi(self) -> float:
        return xi_total(self)

    @property
    def g_total(self) -> float:
        prod = 1.0
        for gn in self.g:
            prod *= gn
        return prod

    @property
    def sum_kappa_quad(self) -> float:
        """Sum of kappa^4 over steps; scale of the second-order-closure error."""
        return sum(ks * ks for ks in self.kappa_sq)


@dataclass(frozen=True)
class ChannelAmplitudes:
    """Real positive transition amplitudes of the two channels."""

    b_plus: float
    b_minus: float

    def __post_init__(self):
        if not (self.b_plus > 0.0 and self.b_minus > 0.0):
            raise StepDomainError(
                f"amplitudes must stay positive (got {self.b_plus!r}, {self.b_minus!r})"
            )


@dataclass(frozen=True)
class BilinearForms:
    """The bilinear combinations b+^2, b-^2 and b+ b- of the channel amplitudes.

    Note that under the per-step second-order closure the cross term drifts
    above sqrt(b_plus_sq * b_minus_sq) by a relative O(sum kappa^4); exact
    equality holds for squared amplitude chains and for the aggregated
    exponential form.
    """

    b_plus_sq: float
    b_minus_sq: float
    b_cross: float

    def __post_init__(self):
        if not (self.b_plus_sq > 0.0 and self.b_minus_sq > 0.0 and self.b_cross > 0.0):
            raise StepDomainError(
                "bilinear forms must stay positive "
                f"(got {self.b_plus_sq!r}, {self.b_minus_sq!r}, {self.b_cross!r})"
            )

    @classmethod
    def from_amplitudes(cls, amps: ChannelAmplitudes) -> "BilinearForms":
        return cls(amps.b_plus**2, amps.b_minus**2, amps.b_plus * amps.b_minus)


@dataclass(frozen=True)
class AggregateY:
    """Accumulated channel asymmetry y at total step variance xi.

    ``xi * y`` equals the accumulated sum of per-step kicks.  ``xi == 0`` is
    the no-interaction limit and is allowed wherever it has a finite meaning.
    """

    y: float
    xi: float

    def __post_init__(self):
        if self.xi < 0.0 or not math.isfinite(self.xi):
            raise ConfigurationError(f"xi must be finite and >= 0 (got {self.xi!r})")
        if not math.isfinite(self.y):
            raise ConfigurationError(f"y must be finite (got {self.y!r})")

    @classmethod
    def from_eta_sum(cls, eta_sum: float, xi: float) -> "AggregateY":
        if not xi > 0.0:
            raise ConfigurationError(f"xi must be > 0 to aggregate kicks (got {xi!r})")
        return cls(y=eta_sum / xi, xi=xi)


@dataclass(frozen=True)
class DensityMatrix2:
    """2x2 Hermitian, unit-trace, positive-semidefinite matrix."""

    rho_pp: float
    rho_pm: complex
    rho_mm: float
    #: slack allowed on the determinant check (second-order-closure matrices
    #: from per-step chains are indefinite at O(sum kappa^4))
    psd_tol: float = field(default=_NORM_TOL, compare=False)

    def __post_init__(self):
        tr = self.rho_pp + self.rho_mm
        if abs(tr - 1.0) > _NORM_TOL:
            raise ConfigurationError(f"trace must be 1 within {_NORM_TOL} (got {tr!r})")
        if self.rho_pp < -_NORM_TOL or self.rho_mm < -_NORM_TOL:
            raise ConfigurationError("diagonal entries must be non-negative")
        if self.det < -self.psd_tol:
            raise ConfigurationError(
                f"matrix is not positive semidefinite: det = {self.det!r} < -{self.psd_tol!r}"
            )

    @property
    def rho_mp(self) -> complex:
        return self.rho_pm.conjugate()

    @property
    def det(self) -> float:
        return self.rho_pp * self.rho_mm - abs(self.rho_pm) ** 2

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.rho_pp, self.rho_pm], [self.rho_mp, self.rho_mm]], dtype=complex
        )

    def purity_defect(self) -> float:
        """Frobenius norm of rho^2 - rho; zero for a pure state."""
        m = self.matrix
        return float(np.linalg.norm(m @ m - m))


def xi_total(schedule: StepSchedule) -> float:
    """Total step variance: the left-to-right sum of the per-step variances."""
    acc = 0.0
    for ks in schedule.kappa_sq:
        acc += ks
    return acc


def step_amplitudes(
    prev: ChannelAmplitudes, g_n: float, eta_n: float, kappa_sq_n: float
) -> ChannelAmplitudes:
    """One step of the amplitude chain: b+- <- b+- * g * (1 +- eta/2 - kappa^2/8)."""
    fac_plus = g_n * (1.0 + 0.5 * eta_n - 0.125 * kappa_sq_n)
    fac_minus = g_n * (1.0 - 0.5 * eta_n - 0.125 * kappa_sq_n)
    if fac_plus <= 0.0 or fac_minus <= 0.0:
        raise StepDomainError(
            f"step factor not positive for eta = {eta_n!r}, kappa_sq = {kappa_sq_n!r}"
        )
    return ChannelAmplitudes(prev.b_plus * fac_plus, prev.b_minus * fac_minus)


def step_bilinears(
    prev: BilinearForms, g_n: float, eta_n: float, kappa_sq_n: float
) -> BilinearForms:
    """One step of the bilinear chain: squares pick up g^2 (1 +- eta), the cross
    term picks up g^2 (1 - kappa^2/2).  Second-order terms are replaced by their
    means, which is the canonical small-step closure."""
    if abs(eta_n) >= 1.0:
        raise StepDomainError(f"|eta| must be < 1 for the bilinear step (got {eta_n!r})")
    g_sq = g_n * g_n
    cross_fac = 1.0 - 0.5 * kappa_sq_n
    if cross_fac <= 0.0:
        raise StepDomainError(f"kappa_sq = {kappa_sq_n!r} drives the cross term negative")
    return BilinearForms(
        prev.b_plus_sq * g_sq * (1.0 + eta_n),
        prev.b_minus_sq * g_sq * (1.0 - eta_n),
        prev.b_cross * g_sq * cross_fac,
    )


def bilinears_from_Y(agg: AggregateY, g: float = 1.0) -> BilinearForms:
    """Aggregated exponential form: b+-^2 = g^2 exp(xi (+-y - 1/2)), cross = g^2 exp(-xi/2)."""
    if not g > 0.0:
        raise ConfigurationError(f"g must be > 0 (got {g!r})")
    if agg.xi * abs(agg.y) > _LOG_LIMIT:
        raise SaturationError(
            f"xi * |y| = {agg.xi * abs(agg.y)!r} exceeds the exponential range"
        )
    log_g_sq = 2.0 * math.log(g)
    exps = [
        agg.xi * (agg.y - 0.5),
        agg.xi * (-agg.y - 0.5),
        -0.5 * agg.xi,
    ]
    if any(abs(e + log_g_sq) > _LOG_LIMIT for e in exps):
        raise SaturationError("bilinear exponent exceeds the representable range")
    g_sq = g * g
    return BilinearForms(*(g_sq * math.exp(e) for e in exps))


def log_w_hat(agg: AggregateY, psi: QubitState) -> float:
    """log of the normalized total transition rate."""
    s = agg.xi * agg.y
    lw = np.logaddexp(
        _log_abs_sq(psi.psi_plus) + s, _log_abs_sq(psi.psi_minus) - s
    ) - 0.5 * agg.xi
    return float(lw)


def w_hat(agg: AggregateY, psi: QubitState) -> float:
    """Normalized total transition rate of a configuration with asymmetry y.

    w = exp(-xi/2) (|psi+|^2 exp(xi y) + |psi-|^2 exp(-xi y)); its mean over
    the zero-drift kick ensemble is 1, and it is the weight that selects
    efficient apparatus configurations.
    """
    lw = log_w_hat(agg, psi)
    if abs(lw) > _LOG_LIMIT:
        raise SaturationError(f"log transition rate {lw!r} exceeds the exponential range")
    return math.exp(lw)


def _normalized_rho(
    log_num_pp: float, log_num_mm: float, log_num_cross: float, psi: QubitState, psd_tol: float
) -> DensityMatrix2:
    """Assemble a trace-normalized density matrix from log-scale entries.

    The diagonal numerators are |psi+-|^2 e^{log_num_pp/mm}; the off-diagonal
    carries the phase of psi+ psi-* with magnitude |psi+ psi-| e^{log_num_cross}.
    Shifting by the larger diagonal exponent keeps everything representable;
    a hopelessly suppressed channel underflows to the dominant projector.
    """
    a = _log_abs_sq(psi.psi_plus) + log_num_pp
    b = _log_abs_sq(psi.psi_minus) + log_num_mm
    m = max(a, b)
    if m == -math.inf:
        raise ConfigurationError("degenerate state: both channel weights vanish")
    da = math.exp(a - m)
    db = math.exp(b - m)
    denom = da + db
    cross_mag = abs(psi.psi_plus) * abs(psi.psi_minus)
    if cross_mag == 0.0:
        off = 0.0j
    else:
        phase = (psi.psi_plus * psi.psi_minus.conjugate()) / cross_mag
        off = phase * math.exp(
            max(math.log(cross_mag) + log_num_cross - m, -_LOG_LIMIT)
        )
    return DensityMatrix2(da / denom, off / denom, db / denom, psd_tol=psd_tol)


def rho_final(agg: AggregateY, psi: QubitState) -> DensityMatrix2:
    """Normalized final-state density matrix at asymmetry y.

    Diagonal entries |psi+-|^2 exp(+-xi y), off-diagonal psi+ psi-*, all over
    |psi+|^2 exp(xi y) + |psi-|^2 exp(-xi y).  The state is pure for every y:
    rate normalization, not decoherence, does the selecting.
    """
    s = agg.xi * agg.y
    return _normalized_rho(s, -s, 0.0, psi, psd_tol=_NORM_TOL)


def rho_peak(sign: int, xi: float, psi: QubitState) -> DensityMatrix2:
    """Final-state matrix at the selected peaks y = +-1, via the ratio form.

    For sign=+1 the matrix is (1 + e^{-2 xi} |r|^2)^{-1} [[1, e^{-xi} r*],
    [e^{-xi} r, e^{-2 xi} |r|^2]] with r = psi-/psi+, and mirrored for
    sign=-1.  Algebraically identical to ``rho_final`` at y = sign; kept as
    an independent evaluation route.
    """
    if sign not in (+1, -1):
        raise ConfigurationError(f"sign must be +1 or -1 (got {sign!r})")
    if xi < 0.0:
        raise ConfigurationError(f"xi must be >= 0 (got {xi!r})")
    hi, lo = (psi.psi_plus, psi.psi_minus) if sign == +1 else (psi.psi_minus, psi.psi_plus)
    if lo == 0:
        return DensityMatrix2(1.0, 0.0j, 0.0) if sign == +1 else DensityMatrix2(0.0, 0.0j, 1.0)
    if hi == 0:
        return DensityMatrix2(0.0, 0.0j, 1.0) if sign == +1 else DensityMatrix2(1.0, 0.0j, 0.0)
    log_t = -2.0 * xi + _log_abs_sq(lo) - _log_abs_sq(hi)
    if log_t > _LOG_LIMIT:
        # suppressed-channel ratio dominates: collapse onto the other channel
        return DensityMatrix2(0.0, 0.0j, 1.0) if sign == +1 else DensityMatrix2(1.0, 0.0j, 0.0)
    t = math.exp(log_t)
    norm = 1.0 / (1.0 + t)
    r = lo / hi
    if sign == +1:
        # top-right entry is e^{-xi} (psi-/psi+)* at the plus peak ...
        return DensityMatrix2(norm, norm * math.exp(-xi) * r.conjugate(), norm * t)
    # ... and e^{-xi} psi+/psi- (unconjugated) at the minus peak
    return DensityMatrix2(norm * t, norm * math.exp(-xi) * r, norm)


def rho_from_bilinears(
    bil: BilinearForms, psi: QubitState, psd_tol: float = _NORM_TOL
) -> DensityMatrix2:
    """Trace-normalize the rate matrix built from explicit bilinear forms."""
    return _normalized_rho(
        math.log(bil.b_plus_sq),
        math.log(bil.b_minus_sq),
        math.log(bil.b_cross),
        psi,
        psd_tol=psd_tol,
    )


def rho_from_log_bilinears(
    log_b_plus_sq: float,
    log_b_minus_sq: float,
    log_b_cross: float,
    psi: QubitState,
    psd_tol: float = _NORM_TOL,
) -> DensityMatrix2:
    """As :func:`rho_from_bilinears` but from log-scale accumulators."""
    return _normalized_rho(log_b_plus_sq, log_b_minus_sq, log_b_cross, psi, psd_tol=psd_tol)


def q_density(y: float, xi: float) -> float:
    """Gaussian density of the aggregate asymmetry before rate selection."""
    if not xi > 0.0:
        raise ConfigurationError(f"xi must be > 0 for a normalizable density (got {xi!r})")
    # the exponent is never positive, so deep tails underflow cleanly to 0
    return math.sqrt(xi / (2.0 * math.pi)) * math.exp(max(-0.5 * xi * y * y, -1e9))


def Q_density(y: float, xi: float, psi: QubitState) -> float:
    """Density of final states: rate-weighted aggregate density.

    Equals q(y) w(y) and, identically, the two-component Gaussian mixture
    |psi+|^2 N(y; +1, 1/xi) + |psi-|^2 N(y; -1, 1/xi).  The mixture form is
    evaluated here; it stays finite for all arguments.
    """
    if not xi > 0.0:
        raise ConfigurationError(f"xi must be > 0 for a normalizable density (got {xi!r})")
    pref = math.sqrt(xi / (2.0 * math.pi))
    dp = y - 1.0
    dm = y + 1.0
    return pref * (
        psi.plus_prob * math.exp(max(-0.5 * xi * dp * dp, -1e9))
        + psi.minus_prob * math.exp(max(-0.5 * xi * dm * dm, -1e9))
    )


def mean_final_rho(xi: float, psi: QubitState) -> DensityMatrix2:
    """Rate-weighted ensemble mean of the final-state matrix.

    Diagonal (|psi+|^2, |psi-|^2); off-diagonal exp(-xi/2) psi+ psi-*.  The
    off-diagonal factor is y-independent: it comes from the cross bilinear
    b+ b- = g^2 exp(-xi/2), so the mean is generally mixed.
    """
    if xi < 0.0:
        raise ConfigurationError(f"xi must be >= 0 (got {xi!r})")
    damp = math.exp(-0.5 * xi) if xi < 2.0 * _LOG_LIMIT else 0.0
    return DensityMatrix2(
        psi.plus_prob,
        damp * psi.psi_plus * psi.psi_minus.conjugate(),
        psi.minus_prob,
    )
