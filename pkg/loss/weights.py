"""Per-term loss weights and gradient-norm balancing."""

from __future__ import annotations

import logging
import math
from typing import Sequence

from pydantic import Field

from config import StrictModel

logger = logging.getLogger(__name__)

BALANCED_TERMS = ("hf", "residual", "bc", "ic")
WEIGHT_FIELDS = {
    "hf": "lambda_hf",
    "residual": "lambda_r",
    "bc": "lambda_b",
    "ic": "lambda_ic",
}


class LossWeights(StrictModel):
    lambda_hf: float = Field(10.0, gt=0, allow_inf_nan=False)
    lambda_r: float = Field(1.0, gt=0, allow_inf_nan=False)
    lambda_b: float = Field(10.0, gt=0, allow_inf_nan=False)
    lambda_ic: float = Field(10.0, gt=0, allow_inf_nan=False)

    def for_term(self, term: str) -> float:
        """The LF data term is the unweighted reference."""
        return 1.0 if term == "lf" else getattr(self, WEIGHT_FIELDS[term])


def balance_weights(
    history: Sequence,
    current: LossWeights | None = None,
    *,
    smoothing: float = 0.9,
    bounds: tuple[float, float] = (1e-2, 1e3),
    floor: float = 1e-12,
) -> LossWeights:
    """Move each weight toward the value that equalizes weighted gradient norms.

    ``history`` holds loss breakdowns whose ``grad_norms`` are norms of the
    gradients of the *weighted* terms; entries that are NaN mark inactive terms and
    are skipped. Each active balanced term gets the target
    ``lambda * mean_norm / norm`` clipped to ``bounds``, blended with the current
    weight by ``smoothing``. If any active norm is below ``floor`` the weights are
    returned unchanged.
    """
    if not history:
        return current
    current = current or history[-1].weights

    norms: dict[str, float] = {}
    for term in ("lf",) + BALANCED_TERMS:
        values = [
            b.grad_norms.get(term, math.nan)
            for b in history
            if not math.isnan(b.grad_norms.get(term, math.nan))
        ]
        if values:
            norms[term] = sum(values) / len(values)
    if len(norms) < 2:
        return current
    if any(value < floor for value in norms.values()):
        vanishing = [term for term, value in norms.items() if value < floor]
        logger.warning(
            f"gradient norm below {floor:g} for {vanishing}; keeping loss weights"
        )
        return current

    reference = sum(norms.values()) / len(norms)
    lo, hi = bounds
    updated = {}
    for term in BALANCED_TERMS:
        if term not in norms:
            continue
        weight = current.for_term(term)
        target = min(max(weight * reference / norms[term], lo), hi)
        updated[WEIGHT_FIELDS[term]] = smoothing * weight + (1.0 - smoothing) * target
    return current.model_copy(update=updated)
