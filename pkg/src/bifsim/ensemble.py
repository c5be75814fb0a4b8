"""Seeded Monte Carlo over apparatus configurations.

Trials draw one kick sequence each, evolve the channel bilinears either step
by step ("product" mode) or through the aggregated exponential form
("closed_form" mode), and carry the normalized transition rate as the
statistical weight of the realized final state.

Sampling uses counter-based per-trial substreams (Philox keyed by
``(master_seed, trial_id)``), so results are independent of scheduling and
worker count.  Because the rate-selected ensemble concentrates at y = +-1,
which is sqrt(xi) standard deviations away from the unweighted draw, plain
sampling cannot populate the selected region at large xi; the default
"defensive" proposal therefore mixes the unweighted kick law with its two
exponentially tilted versions and folds the exact likelihood ratio into the
trial weights.  Every estimator reduces to the plain rate-weighted form when
the proposal is "nominal".
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy.signal import find_peaks

from .errors import ConfigurationError, EnsembleError, StepDomainError
from .model import (
    AggregateY,
    BilinearForms,
    DensityMatrix2,
    QubitState,
    StepSchedule,
    rho_from_bilinears,
    step_bilinears,
)

__all__ = [
    "EtaDistribution",
    "SamplingProposal",
    "TrialRealization",
    "TrialTable",
    "Stat",
    "HistogramDensity",
    "EnsembleSummary",
    "sample_eta_sequence",
    "run_trial",
    "run_trials",
    "summarize_trials",
    "run_ensemble",
    "weighted_histogram",
    "weighted_mode_locations",
    "resample_final_states",
    "record_trajectory",
    "MODES",
]

logger = logging.getLogger(__name__)

MODES = ("product", "closed_form")

#: below this total variance the two selected peaks overlap and the
#: sign(y) channel call is reported but flagged as undecided
UNDECIDED_XI_THRESHOLD = 4.0

_CHUNK = 1024
_EXP_GUARD = 690.0


def _log_or_ninf(x: float) -> float:
    return -math.inf if x == 0.0 else math.log(x)


@dataclass(frozen=True)
class EtaDistribution:
    """Per-step kick law: zero mean, variance kappa_n^2 by construction."""

    kind: str = "rademacher"

    _KINDS = ("rademacher", "gaussian")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ConfigurationError(
                f"eta distribution must be one of {self._KINDS} (got {self.kind!r})"
            )

    def log_normalizer(self, kappa: np.ndarray) -> float:
        """log E[exp(eta)] summed over steps (same for both tilt signs)."""
        if self.kind == "rademacher":
            return float(np.sum(np.log(np.cosh(kappa))))
        return float(0.5 * np.sum(kappa * kappa))

    def draw(self, rng: np.random.Generator, kappa: np.ndarray, tilt: int) -> np.ndarray:
        """One kick sequence; tilt in {-1, 0, +1} selects the proposal component."""
        if self.kind == "rademacher":
            if tilt == 0:
                p_plus = np.full(kappa.shape, 0.5)
            else:
                p_plus = 1.0 / (1.0 + np.exp(-2.0 * tilt * kappa))
            u = rng.random(kappa.size)
            return np.where(u < p_plus, kappa, -kappa)
        z = rng.standard_normal(kappa.size)
        return tilt * kappa * kappa + kappa * z


@dataclass(frozen=True)
class SamplingProposal:
    """How trial kick sequences are proposed.

    "nominal" draws from the kick law itself.  "defensive" draws a
    three-component mixture: with probability ``nominal_fraction`` the
    nominal law, otherwise one of the two exponentially tilted laws chosen
    with the channel probabilities.  The tilted components place mass at
    y = +-1 where the rate-selected ensemble lives.
    """

    kind: str = "defensive"
    nominal_fraction: float = 0.5

    def __post_init__(self):
        if self.kind not in ("nominal", "defensive"):
            raise ConfigurationError(f"unknown proposal kind {self.kind!r}")
        if not 0.0 < self.nominal_fraction <= 1.0:
            raise ConfigurationError(
                f"nominal_fraction must be in (0, 1] (got {self.nominal_fraction!r})"
            )

    def component_edges(self, psi: QubitState) -> tuple[float, float]:
        """Cumulative split points for (nominal, tilt+, tilt-) on a unit draw."""
        if self.kind == "nominal":
            return 1.0, 1.0
        lam = self.nominal_fraction
        return lam, lam + (1.0 - lam) * psi.plus_prob


@dataclass(frozen=True)
class TrialRealization:
    """One sampled apparatus configuration and its realized final state."""

    trial_id: int
    y: float
    w_hat: float
    rho: DensityMatrix2
    channel: str
    log_sampling_ratio: float = 0.0
    component: int = 0

    @property
    def total_weight(self) -> float:
        """Statistical weight: transition rate times the proposal likelihood ratio."""
        return self.w_hat * math.exp(self.log_sampling_ratio)


class Stat(NamedTuple):
    value: float
    stderr: float


@dataclass(frozen=True)
class HistogramDensity:
    """Unit-area weighted histogram with per-bin standard errors."""

    edges: np.ndarray
    density: np.ndarray
    stderr: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)


@dataclass(frozen=True)
class TrialTable:
    """Column-wise storage of an ensemble's trials plus run metadata."""

    psi: QubitState
    schedule: StepSchedule
    mode: str
    dist: EtaDistribution
    proposal: SamplingProposal
    master_seed: int
    trial_id: np.ndarray
    y: np.ndarray
    log_w_hat: np.ndarray
    log_sampling_ratio: np.ndarray
    rho_pp: np.ndarray
    rho_pm_re: np.ndarray
    rho_pm_im: np.ndarray
    rho_mm: np.ndarray
    component: np.ndarray
    valid: np.ndarray

    @property
    def n_requested(self) -> int:
        return int(self.trial_id.size)

    @property
    def n_failed(self) -> int:
        return int(np.count_nonzero(~self.valid))

    @property
    def w_hat(self) -> np.ndarray:
        return np.exp(self.log_w_hat)

    @property
    def total_weight(self) -> np.ndarray:
        return np.exp(self.log_w_hat + self.log_sampling_ratio)

    @property
    def psd_tol(self) -> float:
        if self.mode == "product":
            return max(1e-12, self.schedule.sum_kappa_quad)
        return 1e-12

    @property
    def lattice_gap(self) -> float:
        """Spacing of the y lattice for two-point kicks; 0 for continuous kicks."""
        if self.dist.kind != "rademacher":
            return 0.0
        xi = self.schedule.xi
        return 2.0 * math.sqrt(max(self.schedule.kappa_sq)) / xi if xi > 0 else 0.0

    def channel_of(self, i: int) -> str:
        return "plus" if self.y[i] > 0 or self.y[i] == 0.0 else "minus"

    def realization(self, i: int) -> TrialRealization:
        rho = DensityMatrix2(
            float(self.rho_pp[i]),
            complex(self.rho_pm_re[i], self.rho_pm_im[i]),
            float(self.rho_mm[i]),
            psd_tol=self.psd_tol,
        )
        return TrialRealization(
            trial_id=int(self.trial_id[i]),
            y=float(self.y[i]),
            w_hat=float(np.exp(self.log_w_hat[i])),
            rho=rho,
            channel=self.channel_of(i),
            log_sampling_ratio=float(self.log_sampling_ratio[i]),
            component=int(self.component[i]),
        )

    def to_realizations(self, valid_only: bool = True) -> list[TrialRealization]:
        idx = np.flatnonzero(self.valid) if valid_only else range(self.n_requested)
        return [self.realization(int(i)) for i in idx]


@dataclass(frozen=True)
class EnsembleSummary:
    """Ensemble statistics with standard errors.

    "Unweighted" estimators target the raw kick ensemble (mean 0, variance
    1/xi); "weighted" ones target the rate-selected ensemble.  Under a
    non-nominal proposal both are self-normalized importance estimates with
    the appropriate likelihood-ratio factors; with a nominal proposal they
    reduce to plain and plain-rate-weighted sample statistics.
    """

    trials: int
    failed_trials: int
    xi: float
    mean_w: Stat
    y_mean_unweighted: Stat
    y_var_unweighted: Stat
    y_mean_weighted: Stat
    y_var_weighted: Stat
    born_plus_weighted: Stat
    mean_rho_pp: Stat
    mean_rho_pm_re: Stat
    mean_rho_pm_im: Stat
    mean_rho_mm: Stat
    histogram_weighted: HistogramDensity
    mode_locations: tuple[float, ...]
    ess_weighted: float
    undecided_regime: bool

    @property
    def born_minus_weighted(self) -> Stat:
        return Stat(1.0 - self.born_plus_weighted.value, self.born_plus_weighted.stderr)

    @property
    def mean_rho_weighted(self) -> DensityMatrix2:
        psd_tol = max(1e-12, abs(self.mean_rho_pp.value * self.mean_rho_mm.value))
        return DensityMatrix2(
            self.mean_rho_pp.value,
            complex(self.mean_rho_pm_re.value, self.mean_rho_pm_im.value),
            self.mean_rho_mm.value,
            psd_tol=psd_tol,
        )

    @property
    def n_modes(self) -> int:
        return len(self.mode_locations)


def sample_eta_sequence(
    schedule: StepSchedule, dist: EtaDistribution, rng: np.random.Generator
) -> np.ndarray:
    """Draw one kick per step from the unweighted kick law."""
    kappa = np.sqrt(np.asarray(schedule.kappa_sq))
    return dist.draw(rng, kappa, tilt=0)


def _trial_rng(master_seed: int, trial_id: int) -> np.random.Generator:
    key = np.array([master_seed, trial_id], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _columns_from_etas(
    etas: np.ndarray,
    psi: QubitState,
    schedule: StepSchedule,
    mode: str,
) -> tuple[np.ndarray, ...]:
    """Vectorized per-trial outputs from a (n_trials, n_steps) kick matrix.

    Returns (y, log_w_hat, rho_pp, rho_pm_re, rho_pm_im, rho_mm, valid).
    Gains cancel out of y, the normalized rate, and the normalized state, so
    they are ignored here.
    """
    xi = schedule.xi
    log_pp = _log_or_ninf(psi.plus_prob)
    log_pm = _log_or_ninf(psi.minus_prob)
    cross_mag = abs(psi.psi_plus) * abs(psi.psi_minus)
    phase = (
        (psi.psi_plus * psi.psi_minus.conjugate()) / cross_mag if cross_mag > 0.0 else 0.0j
    )

    if mode == "closed_form":
        s = etas.sum(axis=1)
        valid = np.abs(s) + 0.5 * xi < _EXP_GUARD
        log_num_p = s
        log_num_m = -s
        log_num_x = np.zeros_like(s)
        log_what = np.logaddexp(log_pp + s, log_pm - s) - 0.5 * xi
        y = s / xi
    else:
        with np.errstate(invalid="ignore", divide="ignore"):
            lp = np.log1p(etas)
            lm = np.log1p(-etas)
        valid = np.all(np.abs(etas) < 1.0, axis=1)
        log_num_p = lp.sum(axis=1)
        log_num_m = lm.sum(axis=1)
        log_num_p[~valid] = 0.0
        log_num_m[~valid] = 0.0
        log_num_x = np.full_like(log_num_p, _log_cross_sum(schedule))
        log_what = np.logaddexp(log_pp + log_num_p, log_pm + log_num_m)
        y = (log_num_p - log_num_m) / (2.0 * xi)
        valid &= np.abs(log_num_p) < _EXP_GUARD
        valid &= np.abs(log_num_m) < _EXP_GUARD

    a = log_pp + log_num_p
    b = log_pm + log_num_m
    m = np.maximum(a, b)
    da = np.exp(a - m)
    db = np.exp(b - m)
    denom = da + db
    rho_pp = da / denom
    rho_mm = db / denom
    if cross_mag > 0.0:
        off = np.exp(math.log(cross_mag) + log_num_x - m) / denom
    else:
        off = np.zeros_like(denom)
    rho_pm = phase * off
    return y, log_what, rho_pp, rho_pm.real, rho_pm.imag, rho_mm, valid


def _log_cross_sum(schedule: StepSchedule) -> float:
    acc = 0.0
    for ks in schedule.kappa_sq:
        acc += math.log1p(-0.5 * ks)
    return acc


def _log_sampling_ratio(
    etas_sum: np.ndarray,
    psi: QubitState,
    proposal: SamplingProposal,
    log_normalizer: float,
) -> np.ndarray:
    """log of (nominal density / proposal density) for each trial.

    The ratio depends on the kicks only through their sum because the tilted
    components are exact exponential tilts of the nominal law.
    """
    if proposal.kind == "nominal":
        return np.zeros_like(etas_sum)
    lam = proposal.nominal_fraction
    a = _log_or_ninf(psi.plus_prob) + etas_sum - log_normalizer
    b = _log_or_ninf(psi.minus_prob) - etas_sum - log_normalizer
    tilted = np.logaddexp(a, b)
    if lam == 1.0:
        return np.zeros_like(etas_sum)
    return -np.logaddexp(math.log(lam), math.log1p(-lam) + tilted)


def run_trial(
    psi: QubitState,
    schedule: StepSchedule,
    mode: str,
    dist: EtaDistribution,
    rng: np.random.Generator,
    trial_id: int = 0,
) -> TrialRealization:
    """Run a single trial with kicks drawn from the unweighted law."""
    if mode not in MODES:
        raise ConfigurationError(f"mode must be one of {MODES} (got {mode!r})")
    if not schedule.xi > 0.0:
        raise ConfigurationError("total step variance must be > 0 for a trial")
    etas = sample_eta_sequence(schedule, dist, rng)
    y, log_what, pp, pm_re, pm_im, mm, valid = _columns_from_etas(
        etas[None, :], psi, schedule, mode
    )
    if not valid[0]:
        raise StepDomainError("kick sequence left the positive-amplitude domain")
    psd_tol = max(1e-12, schedule.sum_kappa_quad) if mode == "product" else 1e-12
    rho = DensityMatrix2(
        float(pp[0]), complex(pm_re[0], pm_im[0]), float(mm[0]), psd_tol=psd_tol
    )
    return TrialRealization(
        trial_id=trial_id,
        y=float(y[0]),
        w_hat=float(np.exp(log_what[0])),
        rho=rho,
        channel="plus" if y[0] >= 0.0 else "minus",
        log_sampling_ratio=0.0,
        component=0,
    )


def run_trials(
    psi: QubitState,
    schedule: StepSchedule,
    mode: str,
    dist: EtaDistribution,
    trials: int,
    master_seed: int,
    proposal: SamplingProposal | None = None,
    workers: int = 1,
) -> TrialTable:
    """Run an ensemble of independent trials; deterministic in (master_seed, config).

    Each trial's draws come from a Philox substream keyed by
    ``(master_seed, trial_id)``: results are byte-identical for any worker
    count.  Trials whose kicks leave the valid domain are flagged, counted,
    and excluded from statistics.
    """
    if trials < 1:
        raise ConfigurationError(f"trials must be >= 1 (got {trials!r})")
    if mode not in MODES:
        raise ConfigurationError(f"mode must be one of {MODES} (got {mode!r})")
    if not 0 <= master_seed < 2**64:
        raise ConfigurationError("master_seed must be a 64-bit unsigned integer")
    if not schedule.xi > 0.0:
        raise ConfigurationError("total step variance must be > 0 for an ensemble")
    if workers < 1:
        raise ConfigurationError(f"workers must be >= 1 (got {workers!r})")
    proposal = proposal or SamplingProposal()

    n_steps = len(schedule)
    kappa = np.sqrt(np.asarray(schedule.kappa_sq))
    log_norm = dist.log_normalizer(kappa)
    edge_nom, edge_plus = proposal.component_edges(psi)

    y = np.empty(trials)
    log_what = np.empty(trials)
    log_lr = np.empty(trials)
    rho_pp = np.empty(trials)
    rho_pm_re = np.empty(trials)
    rho_pm_im = np.empty(trials)
    rho_mm = np.empty(trials)
    component = np.empty(trials, dtype=np.int8)
    valid = np.empty(trials, dtype=bool)

    def fill_chunk(start: int) -> None:
        stop = min(start + _CHUNK, trials)
        count = stop - start
        etas = np.empty((count, n_steps))
        comp = np.empty(count, dtype=np.int8)
        for i in range(count):
            rng = _trial_rng(master_seed, start + i)
            u0 = rng.random()
            tilt = 0 if u0 < edge_nom else (1 if u0 < edge_plus else -1)
            comp[i] = tilt
            etas[i] = dist.draw(rng, kappa, tilt)
        cy, cw, cpp, cpre, cpim, cmm, cval = _columns_from_etas(etas, psi, schedule, mode)
        clr = _log_sampling_ratio(etas.sum(axis=1), psi, proposal, log_norm)
        sl = slice(start, stop)
        y[sl] = cy
        log_what[sl] = cw
        log_lr[sl] = clr
        rho_pp[sl] = cpp
        rho_pm_re[sl] = cpre
        rho_pm_im[sl] = cpim
        rho_mm[sl] = cmm
        component[sl] = comp
        valid[sl] = cval

    starts = range(0, trials, _CHUNK)
    if workers == 1:
        for s in starts:
            fill_chunk(s)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill_chunk, starts))

    n_failed = int(np.count_nonzero(~valid))
    if n_failed:
        logger.warning(
            "discarded %d of %d trials (kick outside the valid step domain)",
            n_failed,
            trials,
        )
    if n_failed == trials:
        raise EnsembleError("all trials failed the step-domain check")

    return TrialTable(
        psi=psi,
        schedule=schedule,
        mode=mode,
        dist=dist,
        proposal=proposal,
        master_seed=master_seed,
        trial_id=np.arange(trials, dtype=np.int64),
        y=y,
        log_w_hat=log_what,
        log_sampling_ratio=log_lr,
        rho_pp=rho_pp,
        rho_pm_re=rho_pm_re,
        rho_pm_im=rho_pm_im,
        rho_mm=rho_mm,
        component=component,
        valid=valid,
    )


def _self_normalized(x: np.ndarray, weights: np.ndarray) -> Stat:
    total = weights.sum()
    value = float((weights * x).sum() / total)
    stderr = float(np.sqrt(((weights * (x - value)) ** 2).sum()) / total)
    return Stat(value, stderr)


def _weighted_variance(x: np.ndarray, weights: np.ndarray) -> Stat:
    mean = float((weights * x).sum() / weights.sum())
    return _self_normalized((x - mean) ** 2, weights)


def weighted_histogram(
    trials: "TrialTable | Sequence[TrialRealization]",
    bins: "int | np.ndarray" = 80,
) -> HistogramDensity:
    """Rate-weighted, unit-area histogram of the trial asymmetries."""
    y, w = _y_and_weights(trials)
    if y.size == 0:
        raise EnsembleError("cannot histogram an empty trial set")
    if np.isscalar(bins):
        lo, hi = float(y.min()), float(y.max())
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        edges = np.linspace(lo, hi, int(bins) + 1)
    else:
        edges = np.asarray(bins, dtype=float)
        if y.min() < edges[0] or y.max() > edges[-1]:
            raise ConfigurationError("bins do not cover the observed y range")
    widths = np.diff(edges)
    total = w.sum()
    mass, _ = np.histogram(y, bins=edges, weights=w)
    mass = mass / total
    which = np.clip(np.searchsorted(edges, y, side="right") - 1, 0, widths.size - 1)
    sq = np.zeros(widths.size)
    np.add.at(sq, which, w * w)
    # self-normalized variance of each bin-mass fraction:
    #   sum_i w_i^2 (1_bin - mass)^2 = sq_bin (1 - 2 mass) + mass^2 sum w^2
    var = sq * (1.0 - 2.0 * mass) + mass**2 * float((w * w).sum())
    stderr = np.sqrt(np.maximum(var, 0.0)) / total / widths
    return HistogramDensity(edges=edges, density=mass / widths, stderr=stderr)


def _y_and_weights(
    trials: "TrialTable | Sequence[TrialRealization]",
) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(trials, TrialTable):
        ok = trials.valid
        return trials.y[ok], trials.total_weight[ok]
    y = np.array([t.y for t in trials])
    w = np.array([t.total_weight for t in trials])
    return y, w


def weighted_mode_locations(
    y: np.ndarray,
    weights: np.ndarray,
    lattice_gap: float = 0.0,
    grid: int = 2048,
    rel_threshold: float = 0.05,
) -> tuple[float, ...]:
    """Locations of the modes of the weighted y density.

    A fine weighted histogram is smoothed with a Gaussian kernel (Silverman
    bandwidth on the effective sample size, floored at the kick lattice gap
    so two-point kick combs do not read as modes) and peaks must clear both
    a height and a prominence threshold relative to the global maximum.
    """
    total = weights.sum()
    if total <= 0.0 or y.size == 0:
        raise EnsembleError("mode detection needs at least one positively weighted trial")
    if y.size == 1 or float(y.min()) == float(y.max()):
        return (float(y[0]),)
    ess = total**2 / float((weights**2).sum())
    mu = float((weights * y).sum() / total)
    sig = math.sqrt(max(float((weights * (y - mu) ** 2).sum() / total), 0.0))
    h = max(0.9 * sig * ess ** (-0.2), lattice_gap, 1e-12)
    lo = float(y.min()) - 3.0 * h
    hi = float(y.max()) + 3.0 * h
    edges = np.linspace(lo, hi, grid + 1)
    hist, _ = np.histogram(y, bins=edges, weights=weights)
    dx = edges[1] - edges[0]
    half = max(1, int(math.ceil(4.0 * h / dx)))
    xs = np.arange(-half, half + 1) * dx
    kernel = np.exp(-0.5 * (xs / h) ** 2)
    kernel /= kernel.sum()
    dens = np.convolve(hist, kernel, mode="same")
    floor = rel_threshold * dens.max()
    peaks, _ = find_peaks(dens, height=floor, prominence=floor)
    centers = 0.5 * (edges[:-1] + edges[1:])
    locations = []
    for i in peaks:
        curv = dens[i - 1] - 2.0 * dens[i] + dens[i + 1]
        shift = 0.5 * (dens[i - 1] - dens[i + 1]) / curv if curv != 0.0 else 0.0
        locations.append(float(centers[i] + shift * dx))
    return tuple(locations)


def summarize_trials(table: TrialTable, bins: "int | np.ndarray" = 80) -> EnsembleSummary:
    """Reduce a trial table to ensemble statistics with standard errors."""
    ok = table.valid
    n = int(np.count_nonzero(ok))
    if n == 0:
        raise EnsembleError("no valid trials to summarize")
    y = table.y[ok]
    ell = np.exp(table.log_sampling_ratio[ok])
    w = np.exp(table.log_w_hat[ok] + table.log_sampling_ratio[ok])

    mean_w = Stat(
        float(w.mean()),
        float(w.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
    )
    xi = table.schedule.xi
    histogram = weighted_histogram(table, bins)
    modes = weighted_mode_locations(y, w, lattice_gap=table.lattice_gap)
    return EnsembleSummary(
        trials=n,
        failed_trials=table.n_failed,
        xi=xi,
        mean_w=mean_w,
        y_mean_unweighted=_self_normalized(y, ell),
        y_var_unweighted=_weighted_variance(y, ell),
        y_mean_weighted=_self_normalized(y, w),
        y_var_weighted=_weighted_variance(y, w),
        born_plus_weighted=_self_normalized((y >= 0.0).astype(float), w),
        mean_rho_pp=_self_normalized(table.rho_pp[ok], w),
        mean_rho_pm_re=_self_normalized(table.rho_pm_re[ok], w),
        mean_rho_pm_im=_self_normalized(table.rho_pm_im[ok], w),
        mean_rho_mm=_self_normalized(table.rho_mm[ok], w),
        histogram_weighted=histogram,
        mode_locations=modes,
        ess_weighted=float(w.sum() ** 2 / (w**2).sum()),
        undecided_regime=xi < UNDECIDED_XI_THRESHOLD,
    )


def run_ensemble(
    psi: QubitState,
    schedule: StepSchedule,
    mode: str,
    dist: EtaDistribution,
    trials: int,
    master_seed: int,
    proposal: SamplingProposal | None = None,
    bins: "int | np.ndarray" = 80,
    workers: int = 1,
) -> EnsembleSummary:
    """Run and summarize a seeded ensemble."""
    table = run_trials(
        psi, schedule, mode, dist, trials, master_seed, proposal=proposal, workers=workers
    )
    return summarize_trials(table, bins=bins)


def resample_final_states(
    trials: "TrialTable | Sequence[TrialRealization]",
    count: int,
    rng: np.random.Generator,
) -> list[TrialRealization]:
    """Materialize the rate-selected ensemble by weighted resampling."""
    if count < 0:
        raise ConfigurationError(f"count must be >= 0 (got {count!r})")
    if isinstance(trials, TrialTable):
        pool = trials.to_realizations()
    else:
        pool = list(trials)
    if not pool:
        raise EnsembleError("cannot resample from an empty trial set")
    w = np.array([t.total_weight for t in pool])
    total = w.sum()
    if not total > 0.0:
        raise EnsembleError("cannot resample: total weight is zero")
    idx = rng.choice(len(pool), size=count, p=w / total)
    return [pool[int(i)] for i in idx]


def record_trajectory(
    psi: QubitState,
    schedule: StepSchedule,
    dist: EtaDistribution,
    master_seed: int,
    trial_id: int = 0,
) -> list[dict]:
    """Step-by-step record of one seeded configuration's bilinear chain.

    Row 0 is the pre-interaction state; row n holds the kick and the
    accumulated bilinears and normalized state after n steps.  Uses the same
    per-trial substream protocol as the ensemble.
    """
    rng = _trial_rng(master_seed, trial_id)
    rng.random()  # proposal-component slot; the trajectory is always nominal
    kappa = np.sqrt(np.asarray(schedule.kappa_sq))
    etas = dist.draw(rng, kappa, tilt=0)

    psd_tol = max(1e-12, schedule.sum_kappa_quad)
    bil = BilinearForms(1.0, 1.0, 1.0)
    rho = rho_from_bilinears(bil, psi, psd_tol=psd_tol)
    rows = [
        {
            "step": 0,
            "kappa_sq": 0.0,
            "g_n": 1.0,
            "eta": 0.0,
            "xi_partial": 0.0,
            "y_partial": 0.0,
            "b_plus_sq": bil.b_plus_sq,
            "b_minus_sq": bil.b_minus_sq,
            "b_cross": bil.b_cross,
            "rho_pp": rho.rho_pp,
            "rho_pm_re": rho.rho_pm.real,
            "rho_pm_im": rho.rho_pm.imag,
            "rho_mm": rho.rho_mm,
        }
    ]
    xi_partial = 0.0
    eta_sum = 0.0
    for n, (ks, gn, eta) in enumerate(zip(schedule.kappa_sq, schedule.g, etas), start=1):
        bil = step_bilinears(bil, gn, float(eta), ks)
        xi_partial += ks
        eta_sum += float(eta)
        rho = rho_from_bilinears(bil, psi, psd_tol=psd_tol)
        rows.append(
            {
                "step": n,
                "kappa_sq": ks,
                "g_n": gn,
                "eta": float(eta),
                "xi_partial": xi_partial,
                "y_partial": eta_sum / xi_partial if xi_partial > 0 else 0.0,
                "b_plus_sq": bil.b_plus_sq,
                "b_minus_sq": bil.b_minus_sq,
                "b_cross": bil.b_cross,
                "rho_pp": rho.rho_pp,
                "rho_pm_re": rho.rho_pm.real,
                "rho_pm_im": rho.rho_pm.imag,
                "rho_mm": rho.rho_mm,
            }
        )
    return rows
