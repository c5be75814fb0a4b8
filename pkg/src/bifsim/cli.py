"""Command-line front end: deterministic runs with CSV output.

Commands
--------
closed-form   tabulate the exact final-state matrix, the densities of the
              aggregate asymmetry, and the extended three-state matrix on a
              y grid (grid.csv, rho_bar.csv)
trajectory    per-step bilinears and state of one seeded configuration
              (trajectory.csv)
ensemble      seeded Monte Carlo ensemble (trials.csv, summary.csv,
              histogram.csv)
sweep         one ensemble per total-variance value, with per-value
              histograms and a modality column (sweep.csv, histogram_xi*.csv)

Flags override config-file values; every output embeds the resolved
configuration and tool version as '#'-prefixed header lines, and identical
configurations produce byte-identical files regardless of worker count.
Seeds come only from the configuration (default is the documented constant
``DEFAULT_SEED``); environment variables are never consulted.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .ensemble import (
    EtaDistribution,
    MODES,
    SamplingProposal,
    TrialTable,
    record_trajectory,
    run_trials,
    summarize_trials,
)
from .errors import (
    BifsimError,
    ConfigurationError,
    DegenerateReductionError,
    EnsembleError,
    SaturationError,
    StepDomainError,
)
from .model import (
    AggregateY,
    Q_density,
    QubitState,
    StepSchedule,
    q_density,
    rho_final,
    w_hat,
)
from .perturbation import rho_bar_3x3, stay_probability

#: documented default master seed; override with --seed or a config file
DEFAULT_SEED = 2025

COMMANDS = ("closed-form", "trajectory", "ensemble", "sweep")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DOMAIN = 3
EXIT_IO = 4

TRIALS_SCHEMA = (
    "trial_id",
    "y",
    "w_hat",
    "rho_pp",
    "rho_pm_re",
    "rho_pm_im",
    "rho_mm",
    "channel",
    "sampling_weight",
)
GRID_SCHEMA = ("y", "q", "Q", "rho_pp", "rho_pm_re", "rho_pm_im", "rho_mm")
RHO_BAR_SCHEMA = (
    "y",
    "stay_probability",
    "scatter_probability",
    "bar_00",
    "bar_01_re",
    "bar_01_im",
    "bar_02_re",
    "bar_02_im",
    "bar_11",
    "bar_12_re",
    "bar_12_im",
    "bar_22",
)
TRAJECTORY_SCHEMA = (
    "step",
    "kappa_sq",
    "g_n",
    "eta",
    "xi_partial",
    "y_partial",
    "b_plus_sq",
    "b_minus_sq",
    "b_cross",
    "rho_pp",
    "rho_pm_re",
    "rho_pm_im",
    "rho_mm",
)
HISTOGRAM_SCHEMA = ("bin_left", "bin_right", "density", "density_stderr")
SUMMARY_SCHEMA = ("statistic", "value", "stderr")
SWEEP_SCHEMA = (
    "xi",
    "n_steps",
    "trials",
    "failed_trials",
    "mean_w",
    "mean_w_stderr",
    "y_mean_unweighted",
    "y_mean_unweighted_stderr",
    "y_var_unweighted",
    "y_var_unweighted_stderr",
    "y_mean_weighted",
    "y_mean_weighted_stderr",
    "y_var_weighted",
    "y_var_weighted_stderr",
    "born_plus_weighted",
    "born_plus_weighted_stderr",
    "mean_rho_pm_re",
    "mean_rho_pm_im",
    "ess_weighted",
    "n_modes",
    "modality",
)


@dataclass(frozen=True)
class RunConfig:
    """Resolved run configuration (defaults < config file < CLI flags)."""

    command: str
    psi_plus_sq: float = 0.5
    psi_phase: float = 0.0
    xi: float = 1.0
    n_steps: int = 100
    eta_dist: str = "rademacher"
    mode: str = "closed_form"
    trials: int = 10_000
    master_seed: int = DEFAULT_SEED
    g: float = 1.0
    sweep_xi_list: tuple[float, ...] = ()
    output_path: str = "out"
    bins: int = 80
    kappa_sq_list: tuple[float, ...] = ()
    g_list: tuple[float, ...] = ()
    kappa_cap: float = 0.1
    proposal: str = "defensive"
    nominal_fraction: float = 0.5
    workers: int = 1
    y_min: float = -1.5
    y_max: float = 1.5
    y_points: int = 301

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigurationError(f"command must be one of {COMMANDS} (got {self.command!r})")
        if not 0.0 <= self.psi_plus_sq <= 1.0:
            raise ConfigurationError(
                f"psi_plus_sq must be within [0, 1] (got {self.psi_plus_sq!r})"
            )
        if not self.xi > 0.0:
            raise ConfigurationError(f"xi must be > 0 (got {self.xi!r})")
        if self.n_steps < 1:
            raise ConfigurationError(f"n_steps must be >= 1 (got {self.n_steps!r})")
        if self.eta_dist not in EtaDistribution._KINDS:
            raise ConfigurationError(
                f"eta_dist must be one of {EtaDistribution._KINDS} (got {self.eta_dist!r})"
            )
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES} (got {self.mode!r})")
        if self.trials < 1:
            raise ConfigurationError(f"trials must be >= 1 (got {self.trials!r})")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigurationError(
                f"master_seed must be a 64-bit unsigned integer (got {self.master_seed!r})"
            )
        if not self.g > 0.0:
            raise ConfigurationError(f"g must be > 0 (got {self.g!r})")
        if self.bins < 1:
            raise ConfigurationError(f"bins must be >= 1 (got {self.bins!r})")
        if not self.kappa_cap > 0.0:
            raise ConfigurationError(f"kappa_cap must be > 0 (got {self.kappa_cap!r})")
        if self.proposal not in ("nominal", "defensive"):
            raise ConfigurationError(
                f"proposal must be 'nominal' or 'defensive' (got {self.proposal!r})"
            )
        if not 0.0 < self.nominal_fraction <= 1.0:
            raise ConfigurationError(
                f"nominal_fraction must be in (0, 1] (got {self.nominal_fraction!r})"
            )
        if self.workers < 1:
            raise ConfigurationError(f"workers must be >= 1 (got {self.workers!r})")
        if self.y_points < 2:
            raise ConfigurationError(f"y_points must be >= 2 (got {self.y_points!r})")
        if not self.y_min < self.y_max:
            raise ConfigurationError(
                f"y_min must be < y_max (got {self.y_min!r} >= {self.y_max!r})"
            )
        if self.g_list and len(self.g_list) != len(self.kappa_sq_list):
            raise ConfigurationError(
                "g_list must match kappa_sq_list in length "
                f"({len(self.g_list)} vs {len(self.kappa_sq_list)})"
            )
        if not self.kappa_sq_list and self.xi / self.n_steps > self.kappa_cap:
            raise ConfigurationError(
                f"per-step variance xi/n_steps = {self.xi / self.n_steps!r} exceeds the "
                f"cap kappa_cap = {self.kappa_cap!r}; increase n_steps or supply "
                "kappa_sq_list"
            )
        if self.command == "sweep" and not self.sweep_xi_list:
            raise ConfigurationError("sweep requires a non-empty sweep_xi_list")
        # constructing the schedule validates explicit per-step entries
        self.schedule()

    def schedule(self) -> StepSchedule:
        if self.kappa_sq_list:
            return StepSchedule(
                kappa_sq=self.kappa_sq_list, g=self.g_list, cap=self.kappa_cap
            )
        return StepSchedule.uniform(self.xi, self.n_steps, cap=self.kappa_cap)

    def qubit(self) -> QubitState:
        return QubitState.from_probability(self.psi_plus_sq, self.psi_phase)

    def distribution(self) -> EtaDistribution:
        return EtaDistribution(self.eta_dist)

    def sampling(self) -> SamplingProposal:
        return SamplingProposal(self.proposal, self.nominal_fraction)

    def header_lines(self) -> list[str]:
        # workers is execution-only and never changes results, so it is left
        # out to keep outputs byte-identical across worker counts
        lines = [f"bifsim_version={__version__}"]
        for f in fields(self):
            if f.name == "workers":
                continue
            lines.append(f"{f.name}={_format_config_value(getattr(self, f.name))}")
        return lines


_FLOAT_FIELDS = {
    "psi_plus_sq",
    "psi_phase",
    "xi",
    "g",
    "kappa_cap",
    "nominal_fraction",
    "y_min",
    "y_max",
}
_INT_FIELDS = {"n_steps", "trials", "master_seed", "bins", "workers", "y_points"}
_LIST_FIELDS = {"sweep_xi_list", "kappa_sq_list", "g_list"}
_STR_FIELDS = {"command", "eta_dist", "mode", "output_path", "proposal"}


def _parse_float_list(text: str) -> tuple[float, ...]:
    items = [part.strip() for part in text.split(",") if part.strip()]
    return tuple(float(p) for p in items)


def _parse_config_value(key: str, text: str):
    try:
        if key in _FLOAT_FIELDS:
            return float(text)
        if key in _INT_FIELDS:
            return int(text)
        if key in _LIST_FIELDS:
            return _parse_float_list(text)
        if key in _STR_FIELDS:
            return text
    except ValueError as exc:
        raise ConfigurationError(f"bad value for {key!r}: {text!r} ({exc})") from None
    raise ConfigurationError(f"unknown config key {key!r}")


def _format_config_value(value) -> str:
    if isinstance(value, tuple):
        return ",".join(format(v, ".17g") for v in value)
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _read_config_file(path: str) -> dict:
    values: dict = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path!r}: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected 'key = value' (got {raw!r})")
        key, _, val = line.partition("=")
        key = key.strip().replace("-", "_")
        values[key] = _parse_config_value(key, val.strip())
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bifsim",
        description="two-channel measurement bifurcation simulator",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="flat key=value config file; flags override it")
    parser.add_argument("--psi-plus-sq", type=float, help="|psi_+|^2 of the prepared state")
    parser.add_argument("--psi-phase", type=float, help="relative phase of psi_- (radians)")
    parser.add_argument("--xi", type=float, help="total step variance")
    parser.add_argument("--n-steps", type=int, help="number of interaction steps")
    parser.add_argument("--eta-dist", choices=EtaDistribution._KINDS)
    parser.add_argument("--mode", choices=MODES)
    parser.add_argument("--trials", type=int)
    parser.add_argument("--seed", dest="master_seed", type=int, help="master seed (64-bit)")
    parser.add_argument("--g", type=float, help="global coupling")
    parser.add_argument("--sweep-xi", dest="sweep_xi_list", type=_parse_float_list,
                        help="comma-separated total-variance values for 'sweep'")
    parser.add_argument("--output", dest="output_path", help="output directory")
    parser.add_argument("--bins", type=int, help="histogram bin count")
    parser.add_argument("--kappa-sq-list", dest="kappa_sq_list", type=_parse_float_list,
                        help="explicit per-step variances (overrides xi/n_steps)")
    parser.add_argument("--g-list", dest="g_list", type=_parse_float_list,
                        help="explicit per-step gains (with --kappa-sq-list)")
    parser.add_argument("--kappa-cap", type=float, help="per-step variance cap")
    parser.add_argument("--proposal", choices=("nominal", "defensive"))
    parser.add_argument("--nominal-fraction", type=float,
                        help="nominal share of the defensive proposal mixture")
    parser.add_argument("--workers", type=int)
    parser.add_argument("--y-min", type=float, help="closed-form grid lower edge")
    parser.add_argument("--y-max", type=float, help="closed-form grid upper edge")
    parser.add_argument("--y-points", type=int, help="closed-form grid size")
    return parser


def parse_config(argv: Sequence[str] | None = None) -> RunConfig:
    """Resolve defaults, config file, and flags into a validated RunConfig."""
    args = _build_parser().parse_args(argv)
    values: dict = {}
    if args.config:
        file_values = _read_config_file(args.config)
        file_values.pop("command", None)
        values.update(file_values)
    for f in fields(RunConfig):
        flag_value = getattr(args, f.name, None)
        if flag_value is not None:
            values[f.name] = flag_value
    config = RunConfig(**values)
    config.validate()
    return config


def _format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(
    records: Iterable[dict],
    schema: Sequence[str],
    path: Path,
    header_lines: Sequence[str] = (),
) -> None:
    """Write records to an RFC-4180-style CSV with comment-prefixed headers.

    Reals carry 17 significant digits so a read-back reproduces them
    bit-exactly; row order is the iteration order of ``records``.
    """
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(schema)
        for record in records:
            writer.writerow([_format_cell(record[col]) for col in schema])


def _grid_rows(config: RunConfig):
    psi = config.qubit()
    ys = np.linspace(config.y_min, config.y_max, config.y_points)
    for y in ys:
        agg = AggregateY(float(y), config.xi)
        rho = rho_final(agg, psi)
        yield {
            "y": float(y),
            "q": q_density(float(y), config.xi),
            "Q": Q_density(float(y), config.xi, psi),
            "rho_pp": rho.rho_pp,
            "rho_pm_re": rho.rho_pm.real,
            "rho_pm_im": rho.rho_pm.imag,
            "rho_mm": rho.rho_mm,
        }


def _rho_bar_rows(config: RunConfig):
    psi = config.qubit()
    ys = np.linspace(config.y_min, config.y_max, config.y_points)
    for y in ys:
        agg = AggregateY(float(y), config.xi)
        stay = stay_probability(config.g, w_hat(agg, psi))
        bar = rho_bar_3x3(config.g, agg, psi).matrix
        yield {
            "y": float(y),
            "stay_probability": stay,
            "scatter_probability": 1.0 - stay,
            "bar_00": bar[0, 0].real,
            "bar_01_re": bar[0, 1].real,
            "bar_01_im": bar[0, 1].imag,
            "bar_02_re": bar[0, 2].real,
            "bar_02_im": bar[0, 2].imag,
            "bar_11": bar[1, 1].real,
            "bar_12_re": bar[1, 2].real,
            "bar_12_im": bar[1, 2].imag,
            "bar_22": bar[2, 2].real,
        }


def _trial_rows(table: TrialTable):
    w_hat_vals = table.w_hat
    sampling = np.exp(table.log_sampling_ratio)
    for i in np.flatnonzero(table.valid):
        yield {
            "trial_id": int(table.trial_id[i]),
            "y": float(table.y[i]),
            "w_hat": float(w_hat_vals[i]),
            "rho_pp": float(table.rho_pp[i]),
            "rho_pm_re": float(table.rho_pm_re[i]),
            "rho_pm_im": float(table.rho_pm_im[i]),
            "rho_mm": float(table.rho_mm[i]),
            "channel": table.channel_of(int(i)),
            "sampling_weight": float(sampling[i]),
        }


def _summary_rows(summary) -> list[dict]:
    rows = [
        {"statistic": "trials", "value": summary.trials, "stderr": ""},
        {"statistic": "failed_trials", "value": summary.failed_trials, "stderr": ""},
        {"statistic": "xi", "value": summary.xi, "stderr": ""},
    ]
    for name in (
        "mean_w",
        "y_mean_unweighted",
        "y_var_unweighted",
        "y_mean_weighted",
        "y_var_weighted",
        "born_plus_weighted",
        "born_minus_weighted",
        "mean_rho_pp",
        "mean_rho_pm_re",
        "mean_rho_pm_im",
        "mean_rho_mm",
    ):
        stat = getattr(summary, name)
        rows.append({"statistic": name, "value": stat.value, "stderr": stat.stderr})
    rows.append({"statistic": "ess_weighted", "value": summary.ess_weighted, "stderr": ""})
    rows.append({"statistic": "n_modes", "value": summary.n_modes, "stderr": ""})
    rows.append(
        {"statistic": "undecided_regime", "value": summary.undecided_regime, "stderr": ""}
    )
    return rows


def _histogram_rows(hist):
    for left, right, dens, err in zip(
        hist.edges[:-1], hist.edges[1:], hist.density, hist.stderr
    ):
        yield {
            "bin_left": float(left),
            "bin_right": float(right),
            "density": float(dens),
            "density_stderr": float(err),
        }


def _modality_word(n_modes: int) -> str:
    return {1: "unimodal", 2: "bimodal"}.get(n_modes, f"{n_modes}-modal")


def _sweep_schedule(config: RunConfig, xi: float) -> StepSchedule:
    base_kappa_sq = config.xi / config.n_steps
    n = max(1, round(xi / base_kappa_sq))
    if xi / n > config.kappa_cap:
        n = math.ceil(xi / config.kappa_cap)
    return StepSchedule.uniform(xi, n, cap=config.kappa_cap)


def run_command(config: RunConfig) -> None:
    """Execute a validated configuration, writing CSVs under its output path."""
    outdir = Path(config.output_path)
    outdir.mkdir(parents=True, exist_ok=True)
    headers = config.header_lines()

    if config.command == "closed-form":
        write_csv(_grid_rows(config), GRID_SCHEMA, outdir / "grid.csv", headers)
        write_csv(_rho_bar_rows(config), RHO_BAR_SCHEMA, outdir / "rho_bar.csv", headers)
        return

    if config.command == "trajectory":
        rows = record_trajectory(
            config.qubit(), config.schedule(), config.distribution(), config.master_seed
        )
        write_csv(rows, TRAJECTORY_SCHEMA, outdir / "trajectory.csv", headers)
        return

    if config.command == "ensemble":
        table = run_trials(
            config.qubit(),
            config.schedule(),
            config.mode,
            config.distribution(),
            config.trials,
            config.master_seed,
            proposal=config.sampling(),
            workers=config.workers,
        )
        summary = summarize_trials(table, bins=config.bins)
        write_csv(_trial_rows(table), TRIALS_SCHEMA, outdir / "trials.csv", headers)
        write_csv(_summary_rows(summary), SUMMARY_SCHEMA, outdir / "summary.csv", headers)
        write_csv(
            _histogram_rows(summary.histogram_weighted),
            HISTOGRAM_SCHEMA,
            outdir / "histogram.csv",
            headers,
        )
        return

    if config.command == "sweep":
        sweep_rows = []
        for xi in config.sweep_xi_list:
            schedule = _sweep_schedule(config, xi)
            table = run_trials(
                config.qubit(),
                schedule,
                config.mode,
                config.distribution(),
                config.trials,
                config.master_seed,
                proposal=config.sampling(),
                workers=config.workers,
            )
            summary = summarize_trials(table, bins=config.bins)
            hist_name = f"histogram_xi{format(xi, 'g')}.csv"
            point_headers = headers + [f"sweep_point_xi={format(xi, '.17g')}"]
            write_csv(
                _histogram_rows(summary.histogram_weighted),
                HISTOGRAM_SCHEMA,
                outdir / hist_name,
                point_headers,
            )
            sweep_rows.append(
                {
                    "xi": xi,
                    "n_steps": len(schedule),
                    "trials": summary.trials,
                    "failed_trials": summary.failed_trials,
                    "mean_w": summary.mean_w.value,
                    "mean_w_stderr": summary.mean_w.stderr,
                    "y_mean_unweighted": summary.y_mean_unweighted.value,
                    "y_mean_unweighted_stderr": summary.y_mean_unweighted.stderr,
                    "y_var_unweighted": summary.y_var_unweighted.value,
                    "y_var_unweighted_stderr": summary.y_var_unweighted.stderr,
                    "y_mean_weighted": summary.y_mean_weighted.value,
                    "y_mean_weighted_stderr": summary.y_mean_weighted.stderr,
                    "y_var_weighted": summary.y_var_weighted.value,
                    "y_var_weighted_stderr": summary.y_var_weighted.stderr,
                    "born_plus_weighted": summary.born_plus_weighted.value,
                    "born_plus_weighted_stderr": summary.born_plus_weighted.stderr,
                    "mean_rho_pm_re": summary.mean_rho_pm_re.value,
                    "mean_rho_pm_im": summary.mean_rho_pm_im.value,
                    "ess_weighted": summary.ess_weighted,
                    "n_modes": summary.n_modes,
                    "modality": _modality_word(summary.n_modes),
                }
            )
        write_csv(sweep_rows, SWEEP_SCHEMA, outdir / "sweep.csv", headers)
        return

    raise ConfigurationError(f"unhandled command {config.command!r}")


def main(argv: Sequence[str] | None = None) -> int:
    try:
        config = parse_config(argv)
    except ConfigurationError as exc:
        print(f"bifsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        run_command(config)
    except ConfigurationError as exc:
        print(f"bifsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (StepDomainError, SaturationError, DegenerateReductionError, EnsembleError) as exc:
        print(f"bifsim: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"bifsim: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
