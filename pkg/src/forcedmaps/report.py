"""Delimited and JSON artifact writers plus the figure rendering path.

CSV floats carry 17 significant digits so doubles round-trip exactly and
runs diff cleanly. Figures are rendered headless next to their data
files; PNG metadata is pinned so identical runs produce identical bytes.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .bifurcation import SweepRow
from .graph_engine import GraphField, IntervalField, PinchingReport


def fmt(x) -> str:
    if x is None:
        return ""
    x = float(x)
    return f"{x:.17g}"


def _theta_columns(samples) -> list[str]:
    return ["theta1"] if np.asarray(samples).ndim == 1 else ["theta1", "theta2"]


def _theta_cells(row) -> list[str]:
    if np.ndim(row) == 0:
        return [fmt(row)]
    return [fmt(c) for c in row]


def write_graph_field_csv(field: GraphField, path: str):
    cols = _theta_columns(field.samples) + ["value", "escaped"]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(field.n):
            cells = _theta_cells(field.samples[i])
            cells.append(fmt(field.values[i]))
            cells.append("1" if field.escaped[i] else "0")
            fh.write(",".join(cells) + "\n")


def write_interval_field_csv(ifield: IntervalField, path: str):
    cols = _theta_columns(ifield.samples) + ["lo", "hi", "empty"]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(len(ifield.lo)):
            cells = _theta_cells(ifield.samples[i])
            cells.append(fmt(ifield.lo[i]))
            cells.append(fmt(ifield.hi[i]))
            cells.append("1" if ifield.empty[i] else "0")
            fh.write(",".join(cells) + "\n")


def write_sweep_csv(rows: list[SweepRow], path: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("beta,min_gap,lambda_upper,lambda_lower,fraction_bounded\n")
        for r in rows:
            fh.write(",".join([fmt(r.beta), fmt(r.min_gap), fmt(r.lambda_upper),
                               fmt(r.lambda_lower), fmt(r.fraction_bounded)]) + "\n")


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and (np.isnan(obj) or np.isinf(obj)):
        return None
    return obj


def dump_json(payload: dict, path: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def pinching_payload(report: PinchingReport) -> dict:
    return {
        "min_gap": report.min_gap,
        "argmin": list(report.argmin.coords),
        "classification": report.classification,
        "n_samples": report.n_samples,
        "depth": report.depth,
        "median_gap": report.median_gap,
        "tol_pinch": report.tol_pinch,
        "tol_collapse": report.tol_collapse,
        "fraction_below": report.fraction_below,
    }


# -- figure rendering ----------------------------------------------------

_PNG_META = {"Software": "forcedmaps"}


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    return plt


def render_graphs_png(lower: GraphField, upper: GraphField, path: str, beta: float):
    plt = _pyplot()
    if lower.samples.ndim == 1:
        fig, ax = plt.subplots(figsize=(8, 5))
        ax.plot(lower.samples[lower.alive], lower.values[lower.alive],
                ".", ms=1.5, color="tab:red", label="lower graph")
        ax.plot(upper.samples[upper.alive], upper.values[upper.alive],
                ".", ms=1.5, color="tab:blue", label="upper graph")
        ax.set_xlabel("theta")
        ax.set_ylabel("x")
        ax.set_title(f"bounding graphs at beta = {beta:g}")
        ax.legend(markerscale=8, loc="best")
    else:
        fig, axes = plt.subplots(1, 2, figsize=(11, 4.6), sharex=True, sharey=True)
        for ax, fld, name in ((axes[0], lower, "lower"), (axes[1], upper, "upper")):
            alive = fld.alive
            sc = ax.scatter(fld.samples[alive, 0], fld.samples[alive, 1],
                            c=fld.values[alive], s=4, cmap="viridis")
            if (~alive).any():
                ax.scatter(fld.samples[~alive, 0], fld.samples[~alive, 1],
                           color="lightgray", s=4, marker="x")
            ax.set_title(f"{name} graph value")
            ax.set_xlabel("theta1")
            fig.colorbar(sc, ax=ax)
        axes[0].set_ylabel("theta2")
        fig.suptitle(f"bounding graphs at beta = {beta:g}")
    fig.tight_layout()
    fig.savefig(path, dpi=130, metadata=_PNG_META)
    plt.close(fig)


def render_sweep_png(rows: list[SweepRow], path: str):
    plt = _pyplot()
    betas = [r.beta for r in rows]
    fig, axes = plt.subplots(3, 1, figsize=(7, 8), sharex=True)
    axes[0].plot(betas, [r.min_gap if r.min_gap is not None else np.nan for r in rows],
                 "o-", ms=3, color="tab:purple")
    axes[0].set_ylabel("min gap")
    axes[1].plot(betas, [r.lambda_upper if r.lambda_upper is not None else np.nan for r in rows],
                 "o-", ms=3, color="tab:blue", label="upper")
    axes[1].plot(betas, [r.lambda_lower if r.lambda_lower is not None else np.nan for r in rows],
                 "o-", ms=3, color="tab:red", label="lower")
    axes[1].axhline(0.0, color="k", lw=0.6)
    axes[1].set_ylabel("Lyapunov exponent")
    axes[1].legend(loc="best")
    axes[2].plot(betas, [r.fraction_bounded for r in rows], "o-", ms=3, color="tab:green")
    axes[2].set_ylabel("fraction bounded")
    axes[2].set_xlabel("beta")
    fig.tight_layout()
    fig.savefig(path, dpi=130, metadata=_PNG_META)
    plt.close(fig)


def out_path(out_dir: str, name: str) -> str:
    return os.path.join(out_dir, name)
