"""Result export: delimited files, run manifests, and rendered figures.

Every CSV is reproducible byte-for-byte from its manifest (config echo plus
seed); figures are a convenience rendering of the same data.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import __version__  # noqa: E402
from .analysis.spatial import HeatmapResult  # noqa: E402
from .sim.metrics import MetricsReport, relay_distance_cdf  # noqa: E402

__all__ = [
    "write_heatmap_csv",
    "write_reports_csv",
    "write_sweep_csv",
    "write_cdf_csv",
    "write_manifest",
    "render_heatmap",
    "render_sweep",
    "render_cdf",
]


def _ensure_dir(path):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)


def _fmt(x) -> str:
    if isinstance(x, float):
        if x != x:  # NaN
            return "nan"
        return f"{x:.6g}"
    return str(x)


def write_heatmap_csv(result: HeatmapResult, path: str) -> None:
    """One row per cell: x_m,y_m,value (6 significant digits)."""
    _ensure_dir(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x_m,y_m,value\n")
        for i, x in enumerate(result.xs):
            for j, y in enumerate(result.ys):
                fh.write(f"{x:.6g},{y:.6g},{_fmt(float(result.values[i, j]))}\n")


def write_reports_csv(reports, path: str) -> None:
    """One row per replication plus a mean row."""
    from .sim.metrics import mean_report

    _ensure_dir(path)
    rows = [r.csv_fields() for r in reports]
    mean = mean_report(reports).csv_fields()
    mean["seed"] = "mean"
    rows.append(mean)
    keys = list(rows[0].keys())
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(keys) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[k]) for k in keys) + "\n")


def write_sweep_csv(axis: str, entries, path: str) -> None:
    """entries: [(value, mean MetricsReport)]; one row per swept value."""
    _ensure_dir(path)
    keys = None
    with open(path, "w", encoding="utf-8") as fh:
        for value, rep in entries:
            fields = rep.csv_fields()
            fields.pop("seed", None)
            if keys is None:
                keys = list(fields.keys())
                fh.write(axis + "," + ",".join(keys) + "\n")
            fh.write(_fmt(value) + "," + ",".join(_fmt(fields[k]) for k in keys) + "\n")


def write_cdf_csv(report: MetricsReport, path: str) -> None:
    _ensure_dir(path)
    d, frac = relay_distance_cdf(report)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("distance_m,cdf\n")
        for x, f in zip(d, frac):
            fh.write(f"{x:.6g},{f:.6g}\n")


def write_manifest(path: str, config_text: str, seed, wall_time_s: float,
                   extra: dict | None = None) -> None:
    _ensure_dir(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# coopsense {__version__}\n")
        fh.write(f"# seed: {seed}\n")
        fh.write(f"# wall_time_s: {wall_time_s:.1f}\n")
        for k, v in (extra or {}).items():
            fh.write(f"# {k}: {v}\n")
        fh.write(config_text)


def render_heatmap(result: HeatmapResult, path: str, scenario=None) -> None:
    _ensure_dir(path)
    fig, ax = plt.subplots(figsize=(7, 5))
    vals = result.values.T  # imshow wants (rows=y, cols=x)
    im = ax.imshow(vals, origin="lower", aspect="equal",
                   extent=(result.xs[0], result.xs[-1], result.ys[0], result.ys[-1]),
                   cmap="viridis")
    fig.colorbar(im, ax=ax, label="probability")
    if scenario is not None:
        ax.plot(*scenario.p_s, "w^", markersize=9, label="source")
        ax.plot(*scenario.p_d, "wv", markersize=9, label="destination")
        ax.legend(loc="upper right", framealpha=0.6)
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_title(result.quantity)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def render_sweep(axis: str, entries, path: str, columns=None) -> None:
    _ensure_dir(path)
    columns = columns or ["throughput_bps", "pdr", "coop_success_share"]
    xs = [v for v, _ in entries]
    fig, axes = plt.subplots(len(columns), 1, figsize=(7, 2.6 * len(columns)),
                             sharex=True)
    if len(columns) == 1:
        axes = [axes]
    for ax, col in zip(axes, columns):
        ys = [rep.csv_fields().get(col, float("nan")) for _, rep in entries]
        ax.plot(xs, ys, "o-")
        ax.set_ylabel(col)
        ax.grid(alpha=0.3)
    axes[-1].set_xlabel(axis)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def render_cdf(curves, path: str, xlabel="distance to destination (m)") -> None:
    """curves: [(label, distances, cdf)]"""
    _ensure_dir(path)
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    for label, d, frac in curves:
        ax.step(d, frac, where="post", label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("CDF")
    ax.set_ylim(0, 1.02)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)
