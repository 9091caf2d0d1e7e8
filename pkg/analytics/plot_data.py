"""Plot-ready tables built from an experiment directory."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from errors import ArtifactError, ContractError
from storage.artifacts import read_table, write_table

logger = logging.getLogger(__name__)

FIGURES = ("fig1", "fig2", "fig3", "fig4")
ALPHA_BINS = 20


def _require(directory: Path, name: str, stage: str) -> pd.DataFrame:
    path = directory / name
    if not path.exists():
        raise ArtifactError(
            f"{name} is missing from {directory}; rerun the {stage} stage", stage=stage
        )
    return read_table(path, stage)


def alpha_histogram(directory: Path) -> pd.DataFrame:
    """Histogram of the gate over the evaluation grid, one block per parameter value."""
    alpha = _require(directory, "alpha.csv", "evaluate")
    frames = []
    edges = np.linspace(0.0, 1.0, ALPHA_BINS + 1)
    for mu, group in alpha.groupby("mu", sort=True):
        counts, _ = np.histogram(group["alpha"].to_numpy(), bins=edges)
        frames.append(
            pd.DataFrame(
                {
                    "mu": mu,
                    "bin_lo": edges[:-1],
                    "bin_hi": edges[1:],
                    "count": counts,
                    "fraction": counts / max(counts.sum(), 1),
                }
            )
        )
    return pd.concat(frames, ignore_index=True)


def mre_by_mu(directory: Path) -> pd.DataFrame:
    frame = _require(directory, "mre_by_mu.csv", "evaluate")
    return frame[["mu", "mre", "in_range"]].sort_values("mu", ignore_index=True)


def stage_costs(directory: Path) -> pd.DataFrame:
    timings = _require(directory, "timings.csv", "evaluate")
    total = timings["seconds"].sum()
    timings = timings.copy()
    timings["share"] = timings["seconds"] / total if total > 0 else 0.0
    return timings


def cost_accuracy(directory: Path) -> pd.DataFrame:
    """FD solver resolutions plus one row for the trained surrogate."""
    study = _require(directory, "solver_study.csv", "evaluate")
    metrics = _require(directory, "metrics.csv", "evaluate")
    timings = _require(directory, "timings.csv", "evaluate")
    trained = timings[timings["stage"].isin(["pretrain", "train", "sample"])]
    surrogate = pd.DataFrame(
        {
            "method": ["MF-BPINN"],
            "resolution": [np.nan],
            "runtime_s": [float(trained["seconds"].sum())],
            "mre": [float(metrics["mre"].iloc[0])],
        }
    )
    columns = ["method", "resolution", "runtime_s", "mre"]
    return pd.concat([study[columns], surrogate], ignore_index=True)


BUILDERS = {
    "fig1": alpha_histogram,
    "fig2": mre_by_mu,
    "fig3": stage_costs,
    "fig4": cost_accuracy,
}


def emit_plot_data(directory: str | Path, tag: str, *, render: bool = False) -> Path:
    """Write ``plot_<tag>.csv`` into ``directory`` and return its path.

    With ``render=True`` a PNG is drawn next to it.
    """
    if tag not in BUILDERS:
        raise ContractError(f"unknown figure {tag!r}, expected one of {FIGURES}")
    directory = Path(directory)
    frame = BUILDERS[tag](directory)
    path = write_table(frame, directory / f"plot_{tag}.csv")
    logger.info(f"{tag}: {len(frame)} rows written to {path}")
    if render:
        from analytics.plotter import render_figure

        render_figure(tag, frame, path.with_suffix(".png"))
    return path
