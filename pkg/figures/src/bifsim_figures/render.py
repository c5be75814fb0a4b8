"""The three figure kinds: selected-density overlay, sweep panel, trajectory."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import SchemaError, header_float, read_csv_table, require_columns

FIGURE_KINDS = ("q_of_y", "xi_sweep", "rho_trajectory")

_TRIALS_REQUIRED = ("y", "w_hat")
_HISTOGRAM_REQUIRED = ("bin_left", "bin_right", "density")
_TRAJECTORY_REQUIRED = ("xi_partial", "rho_pp", "rho_mm", "rho_pm_re", "rho_pm_im")


@dataclass(frozen=True)
class FigureSpec:
    """What to render: input CSVs, figure kind, output image, bin count."""

    kind: str
    inputs: tuple[str, ...]
    output: str
    bins: int = 60

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"kind must be one of {FIGURE_KINDS} (got {self.kind!r})")
        if not self.inputs:
            raise ValueError("at least one input CSV is required")
        if self.bins < 1:
            raise ValueError(f"bins must be >= 1 (got {self.bins!r})")


def closed_form_density(y: np.ndarray, xi: float, plus_prob: float) -> np.ndarray:
    """Selected density of the asymmetry: the documented two-Gaussian mixture.

    Evaluated from configuration values only; never fitted to data.
    """
    pref = math.sqrt(xi / (2.0 * math.pi))
    return pref * (
        plus_prob * np.exp(-0.5 * xi * (y - 1.0) ** 2)
        + (1.0 - plus_prob) * np.exp(-0.5 * xi * (y + 1.0) ** 2)
    )


def _deterministic_rc():
    plt.rcParams["svg.hashsalt"] = "bifsim-figures"


def _save(fig, output: str | Path) -> Path:
    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    metadata = {"Date": None} if output.suffix == ".svg" else None
    fig.savefig(output, metadata=metadata)
    plt.close(fig)
    return output


def _trial_weights(table: dict[str, np.ndarray]) -> np.ndarray:
    w = table["w_hat"].astype(float)
    if "sampling_weight" in table:
        w = w * table["sampling_weight"].astype(float)
    return w


def _weighted_histogram(y: np.ndarray, w: np.ndarray, bins: int):
    edges = np.linspace(float(y.min()), float(y.max()), bins + 1)
    if edges[0] == edges[-1]:
        edges = np.linspace(edges[0] - 0.5, edges[0] + 0.5, bins + 1)
    hist, _ = np.histogram(y, bins=edges, weights=w)
    density = hist / (w.sum() * np.diff(edges))
    return edges, density


def render_q_of_y(spec: FigureSpec) -> Path:
    """Empirical selected-density histogram with the closed-form overlay."""
    if len(spec.inputs) != 1:
        raise SchemaError("q_of_y takes exactly one trials CSV")
    path = spec.inputs[0]
    header, table = read_csv_table(path)
    require_columns(table, _TRIALS_REQUIRED, path)
    y = table["y"].astype(float)
    if y.size == 0:
        raise SchemaError(f"{path}: trials file has no rows")
    w = _trial_weights(table)
    xi = header_float(header, "xi", path)
    plus_prob = header_float(header, "psi_plus_sq", path)

    edges, density = _weighted_histogram(y, w, spec.bins)
    grid = np.linspace(edges[0], edges[-1], 600)

    _deterministic_rc()
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    ax.stairs(density, edges, fill=True, alpha=0.45, color="#4878a8",
              label="weighted ensemble")
    ax.plot(grid, closed_form_density(grid, xi, plus_prob), "k-", lw=1.6,
            label="closed form")
    ax.set_xlabel("aggregate asymmetry y")
    ax.set_ylabel("selected density")
    ax.set_title(f"xi = {xi:g},  |psi+|^2 = {plus_prob:g}")
    ax.legend(frameon=False)
    fig.tight_layout()
    return _save(fig, spec.output)


def render_xi_sweep(spec: FigureSpec) -> Path:
    """One histogram panel per total-variance value, with overlays."""
    panels = []
    for path in spec.inputs:
        header, table = read_csv_table(path)
        require_columns(table, _HISTOGRAM_REQUIRED, path)
        if table["bin_left"].size == 0:
            raise SchemaError(f"{path}: histogram file has no rows")
        xi_key = "sweep_point_xi" if "sweep_point_xi" in header else "xi"
        panels.append(
            {
                "xi": header_float(header, xi_key, path),
                "plus_prob": header_float(header, "psi_plus_sq", path),
                "edges": np.append(table["bin_left"].astype(float),
                                   float(table["bin_right"][-1])),
                "density": table["density"].astype(float),
            }
        )
    panels.sort(key=lambda p: p["xi"])

    _deterministic_rc()
    n = len(panels)
    ncols = min(n, 2)
    nrows = (n + ncols - 1) // ncols
    fig, axes = plt.subplots(
        nrows, ncols, figsize=(4.6 * ncols, 3.0 * nrows), squeeze=False
    )
    for ax, panel in zip(axes.flat, panels):
        ax.stairs(panel["density"], panel["edges"], fill=True, alpha=0.45,
                  color="#4878a8")
        grid = np.linspace(panel["edges"][0], panel["edges"][-1], 400)
        ax.plot(grid, closed_form_density(grid, panel["xi"], panel["plus_prob"]),
                "k-", lw=1.4)
        ax.set_title(f"xi = {panel['xi']:g}")
        ax.set_xlabel("y")
        ax.set_ylabel("density")
    for ax in axes.flat[n:]:
        ax.set_visible(False)
    fig.tight_layout()
    return _save(fig, spec.output)


def render_rho_trajectory(spec: FigureSpec) -> Path:
    """Final-state matrix entries along the accumulated variance of one chain."""
    if len(spec.inputs) != 1:
        raise SchemaError("rho_trajectory takes exactly one trajectory CSV")
    path = spec.inputs[0]
    _, table = read_csv_table(path)
    require_columns(table, _TRAJECTORY_REQUIRED, path)
    if table["xi_partial"].size == 0:
        raise SchemaError(f"{path}: trajectory file has no rows")
    xi = table["xi_partial"].astype(float)
    off_mag = np.hypot(table["rho_pm_re"].astype(float), table["rho_pm_im"].astype(float))

    _deterministic_rc()
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    ax.plot(xi, table["rho_pp"].astype(float), label="rho_++", lw=1.6)
    ax.plot(xi, table["rho_mm"].astype(float), label="rho_--", lw=1.6)
    ax.plot(xi, off_mag, label="|rho_+-|", lw=1.6, ls="--")
    ax.set_xlabel("accumulated step variance")
    ax.set_ylabel("matrix entry")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(frameon=False)
    fig.tight_layout()
    return _save(fig, spec.output)


_RENDERERS = {
    "q_of_y": render_q_of_y,
    "xi_sweep": render_xi_sweep,
    "rho_trajectory": render_rho_trajectory,
}


def render(spec: FigureSpec) -> Path:
    """Render one figure; raises before writing anything on bad input."""
    return _RENDERERS[spec.kind](spec)
