"""Accuracy metrics against reference solutions."""

from __future__ import annotations

import numpy as np

from network.composite import MfModel, forward_lf, forward_mf
from pde.problems import PdeProblem

# evaluation grid resolution per problem, coordinate axes in order
EVALUATION_GRIDS = {
    "burgers": (201, 101),
    "heat": (101, 101),
    "navier_stokes": (64, 64, 11),
}


def mean_relative_error(prediction, truth, eps: float = 1e-12) -> float:
    """``mean |pred - truth| / (max |truth| + eps)`` over every grid value."""
    prediction = np.asarray(prediction, dtype=float)
    truth = np.asarray(truth, dtype=float)
    return float(np.mean(np.abs(prediction - truth)) / (np.max(np.abs(truth)) + eps))


def evaluation_points(
    problem: PdeProblem, mu: float, resolution: tuple[int, ...] | None = None
) -> np.ndarray:
    """Tensor grid over the problem box (boundaries included) at parameter ``mu``."""
    resolution = resolution or EVALUATION_GRIDS[problem.name]
    bounds = zip(problem.lower, problem.upper, resolution)
    axes = [np.linspace(lo, hi, n) for lo, hi, n in bounds]
    mesh = np.meshgrid(*axes, indexing="ij")
    coords = [m.reshape(-1) for m in mesh]
    coords.append(np.full(coords[0].shape, float(mu)))
    return np.column_stack(coords)


def predict(
    model: MfModel, points: np.ndarray, head: str = "mf", chunk: int = 4096
) -> np.ndarray:
    parts = []
    for start in range(0, len(points), chunk):
        batch = points[start : start + chunk]
        if head == "lf":
            parts.append(forward_lf(model, batch))
        else:
            parts.append(forward_mf(model, batch).u_mf)
    return np.vstack(parts)


def evaluate_mre(
    model: MfModel,
    problem: PdeProblem,
    mu: float,
    head: str = "mf",
    resolution: tuple[int, ...] | None = None,
) -> float:
    points = evaluation_points(problem, mu, resolution)
    return mean_relative_error(predict(model, points, head), problem.oracle(points))
