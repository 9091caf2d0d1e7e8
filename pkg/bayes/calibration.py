"""Interval coverage and expected calibration error."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.special import ndtri

from bayes.predictive import NOMINAL_LEVELS, PredictiveSummary
from errors import ContractError

MIN_HELD_OUT = 100


class CalibrationReport(NamedTuple):
    coverage_at_95: float
    ece: float


def _bounds(summary: PredictiveSummary, level: float) -> tuple[np.ndarray, np.ndarray]:
    for key, bounds in summary.level_bounds.items():
        if abs(key - level) < 1e-9:
            return bounds
    # Gaussian interval from the total variance when percentiles were not kept
    half = ndtri(0.5 + 0.5 * level) * np.sqrt(summary.total)
    return summary.mean - half, summary.mean + half


def empirical_coverage(summary: PredictiveSummary, truth, level: float = 0.95) -> float:
    """Fraction of ``truth`` values inside the central interval at ``level``."""
    truth = np.asarray(truth, dtype=float).reshape(summary.mean.shape)
    if abs(level - 0.95) < 1e-9:
        lower, upper = summary.lower, summary.upper
    else:
        lower, upper = _bounds(summary, level)
    return float(np.mean((truth >= lower) & (truth <= upper)))


def calibration_report(summary: PredictiveSummary, truth) -> CalibrationReport:
    """Coverage of the 95% interval (percent) and ECE over ten nominal levels."""
    truth = np.asarray(truth, dtype=float)
    if truth.size != summary.mean.size:
        raise ContractError(
            f"{truth.size} truth values for {summary.mean.size} predictions"
        )
    if summary.mean.shape[0] < MIN_HELD_OUT:
        raise ContractError(
            f"calibration needs at least {MIN_HELD_OUT} held-out points, "
            f"got {summary.mean.shape[0]}"
        )
    coverage = empirical_coverage(summary, truth, 0.95)
    gaps = [
        abs(empirical_coverage(summary, truth, level) - level)
        for level in NOMINAL_LEVELS
    ]
    return CalibrationReport(100.0 * coverage, float(np.mean(gaps)))
