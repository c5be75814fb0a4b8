"""Configuration parsing, CSV emission, command behavior, exit codes."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np
import pytest

from bifsim import ConfigurationError
from bifsim.cli import (
    EXIT_DOMAIN,
    EXIT_IO,
    EXIT_OK,
    EXIT_USAGE,
    GRID_SCHEMA,
    RunConfig,
    TRIALS_SCHEMA,
    main,
    parse_config,
    write_csv,
)


def read_csv(path: Path) -> tuple[dict, list[dict]]:
    header = {}
    body = []
    with open(path, newline="") as fh:
        lines = [ln for ln in fh]
    data_lines = []
    for line in lines:
        if line.startswith("# "):
            key, _, value = line[2:].rstrip("\n").partition("=")
            header[key] = value
        else:
            data_lines.append(line)
    for row in csv.DictReader(data_lines):
        body.append(row)
    return header, body


def test_parse_config_well_formed():
    config = parse_config(
        [
            "--psi-plus-sq", "0.7", "--xi", "25", "--n-steps", "2500",
            "--trials", "50000", "--seed", "42", "ensemble",
        ]
    )
    assert config.command == "ensemble"
    assert config.psi_plus_sq == 0.7
    assert config.xi == 25.0
    assert config.n_steps == 2500
    assert config.trials == 50_000
    assert config.master_seed == 42


def test_parse_config_range_error_names_key():
    with pytest.raises(ConfigurationError, match="psi_plus_sq"):
        parse_config(["--psi-plus-sq", "1.3", "closed-form"])


def test_parse_config_cap_violation():
    with pytest.raises(ConfigurationError, match="cap"):
        parse_config(["--xi", "25", "--n-steps", "10", "ensemble"])


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "# comment line\n"
        "psi_plus_sq = 0.9\n"
        "xi = 2.0\n"
        "n-steps = 200\n"
        "trials = 123\n"
    )
    config = parse_config(["--config", str(cfg), "--xi", "4.0", "ensemble"])
    assert config.psi_plus_sq == 0.9   # from file
    assert config.xi == 4.0            # flag wins
    assert config.n_steps == 200       # dashed key normalized
    assert config.trials == 123


def test_config_file_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("psi_plus_square = 0.7\n")
    with pytest.raises(ConfigurationError, match="psi_plus_square"):
        parse_config(["--config", str(cfg), "ensemble"])


def test_config_file_bad_value(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("xi = twenty\n")
    with pytest.raises(ConfigurationError, match="xi"):
        parse_config(["--config", str(cfg), "ensemble"])


def test_sweep_requires_list():
    with pytest.raises(ConfigurationError, match="sweep_xi_list"):
        parse_config(["sweep"])


def test_write_csv_empty_and_single(tmp_path):
    empty = tmp_path / "empty.csv"
    write_csv([], ("a", "b"), empty)
    assert empty.read_text() == "a,b\n"
    single = tmp_path / "one.csv"
    write_csv([{"a": 1, "b": 0.5}], ("a", "b"), single)
    assert single.read_text() == "a,b\n1,0.5\n"


def test_write_csv_roundtrip_17_digits(tmp_path):
    rng = np.random.default_rng(0)
    values = list(rng.standard_normal(50) * 10.0 ** rng.integers(-300, 300, size=50))
    values += [0.0, -0.0, 1e-308, math.pi]
    path = tmp_path / "roundtrip.csv"
    write_csv([{"x": v} for v in values], ("x",), path)
    _, body = read_csv(path)
    back = [float(row["x"]) for row in body]
    assert all(a == b for a, b in zip(back, values))


def test_closed_form_outputs(tmp_path):
    out = tmp_path / "cf"
    code = main(
        [
            "--psi-plus-sq", "0.7", "--xi", "2.0", "--y-min", "-1.5", "--y-max", "1.5",
            "--y-points", "11", "--output", str(out), "closed-form",
        ]
    )
    assert code == EXIT_OK
    header, body = read_csv(out / "grid.csv")
    assert header["psi_plus_sq"] == "0.69999999999999996"
    assert header["bifsim_version"]
    assert [*body[0].keys()] == list(GRID_SCHEMA)
    assert len(body) == 11
    _, bar = read_csv(out / "rho_bar.csv")
    assert len(bar) == 11
    stay = float(bar[5]["stay_probability"])
    scatter = float(bar[5]["scatter_probability"])
    assert stay + scatter == pytest.approx(1.0, abs=1e-15)


def test_closed_form_single_channel_rows(tmp_path):
    out = tmp_path / "single"
    code = main(
        ["--psi-plus-sq", "1.0", "--xi", "1.0", "--y-points", "7",
         "--output", str(out), "closed-form"]
    )
    assert code == EXIT_OK
    _, body = read_csv(out / "grid.csv")
    for row in body:
        assert float(row["rho_pp"]) == 1.0
        assert float(row["rho_pm_re"]) == 0.0
        assert float(row["rho_pm_im"]) == 0.0
        assert float(row["rho_mm"]) == 0.0


def test_trajectory_output(tmp_path):
    out = tmp_path / "traj"
    code = main(
        ["--xi", "1.0", "--n-steps", "100", "--seed", "5",
         "--output", str(out), "trajectory"]
    )
    assert code == EXIT_OK
    _, body = read_csv(out / "trajectory.csv")
    assert len(body) == 101
    assert float(body[-1]["xi_partial"]) == pytest.approx(1.0, rel=1e-12)


def test_ensemble_outputs_and_trial_consistency(tmp_path):
    out = tmp_path / "ens"
    code = main(
        [
            "--psi-plus-sq", "0.7", "--xi", "1.0", "--n-steps", "100",
            "--trials", "500", "--seed", "11", "--output", str(out), "ensemble",
        ]
    )
    assert code == EXIT_OK
    _, trials = read_csv(out / "trials.csv")
    assert [*trials[0].keys()] == list(TRIALS_SCHEMA)
    assert len(trials) == 500
    for row in trials[:20]:
        assert row["channel"] == ("plus" if float(row["y"]) >= 0 else "minus")
        tr = float(row["rho_pp"]) + float(row["rho_mm"])
        assert tr == pytest.approx(1.0, abs=1e-12)
    _, summary = read_csv(out / "summary.csv")
    stats = {row["statistic"]: row for row in summary}
    assert stats["trials"]["value"] == "500"
    born_p = float(stats["born_plus_weighted"]["value"])
    born_m = float(stats["born_minus_weighted"]["value"])
    assert born_p + born_m == 1.0
    _, hist = read_csv(out / "histogram.csv")
    area = sum(
        float(r["density"]) * (float(r["bin_right"]) - float(r["bin_left"])) for r in hist
    )
    assert area == pytest.approx(1.0, rel=1e-12)


def test_byte_identical_across_reruns_and_workers(tmp_path):
    args = [
        "--psi-plus-sq", "0.7", "--xi", "1.0", "--n-steps", "100",
        "--trials", "2000", "--seed", "3",
    ]
    out = tmp_path / "runs"
    blobs = []
    for workers in ("1", "2", "8"):
        assert main(args + ["--workers", workers, "--output", str(out), "ensemble"]) == 0
        blobs.append(
            tuple((out / n).read_bytes() for n in ("trials.csv", "summary.csv", "histogram.csv"))
        )
    assert blobs[0] == blobs[1] == blobs[2]


def test_sweep_modality_progression(tmp_path):
    out = tmp_path / "sweep"
    code = main(
        [
            "--psi-plus-sq", "0.7", "--xi", "1.0", "--n-steps", "100",
            "--trials", "30000", "--seed", "19", "--sweep-xi", "0.5,25",
            "--output", str(out), "sweep",
        ]
    )
    assert code == EXIT_OK
    _, rows = read_csv(out / "sweep.csv")
    assert [row["modality"] for row in rows] == ["unimodal", "bimodal"]
    assert (out / "histogram_xi0.5.csv").exists()
    assert (out / "histogram_xi25.csv").exists()
    # per-step variance is carried over from the base configuration
    assert int(rows[0]["n_steps"]) == 50
    assert int(rows[1]["n_steps"]) == 2500


def test_exit_codes(tmp_path):
    assert main(["--psi-plus-sq", "1.3", "closed-form"]) == EXIT_USAGE
    # xi * |y| beyond the exponential range in the extended matrix
    out = tmp_path / "sat"
    code = main(
        ["--xi", "100.0", "--n-steps", "1000", "--y-max", "800.0",
         "--y-points", "3", "--output", str(out), "closed-form"]
    )
    assert code == EXIT_DOMAIN
    blocker = tmp_path / "blocker"
    blocker.write_text("not a directory")
    code = main(
        ["--xi", "1.0", "--output", str(blocker / "sub"), "closed-form"]
    )
    assert code == EXIT_IO


def test_argparse_usage_error_is_exit_2():
    with pytest.raises(SystemExit) as exc:
        parse_config(["--no-such-flag", "ensemble"])
    assert exc.value.code == 2
