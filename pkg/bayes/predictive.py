"""Posterior-predictive statistics with aleatoric/epistemic decomposition."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from bayes.hmc import PosteriorEnsemble
from errors import ContractError
from network.composite import MfModel, mf_jets
from pde.bundle import DerivativeBundle
from pde.problems import PdeProblem

logger = logging.getLogger(__name__)

MIN_RELIABLE_DRAWS = 50
# nominal central-interval levels used for calibration
NOMINAL_LEVELS = tuple(round(0.05 + 0.1 * i, 2) for i in range(10))


@dataclass
class PredictiveSummary:
    """Per-point moments and central credible intervals, arrays of shape ``(N, O)``."""

    points: np.ndarray
    mean: np.ndarray
    total: np.ndarray
    aleatoric: np.ndarray
    epistemic: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    n_draws: int
    level_bounds: dict[float, tuple[np.ndarray, np.ndarray]] = field(
        default_factory=dict
    )
    quantity: str = "u"
    outputs: tuple[str, ...] = ("u",)
    reliable: bool = True

    def to_frame(
        self, columns: list[str], truth: np.ndarray | None = None
    ) -> pd.DataFrame:
        frames = []
        for i, name in enumerate(self.outputs):
            frame = pd.DataFrame(self.points, columns=columns)
            frame["output"] = name
            frame["mean"] = self.mean[:, i]
            frame["total"] = self.total[:, i]
            frame["aleatoric"] = self.aleatoric[:, i]
            frame["epistemic"] = self.epistemic[:, i]
            frame["lower"] = self.lower[:, i]
            frame["upper"] = self.upper[:, i]
            if truth is not None:
                frame["truth"] = np.asarray(truth).reshape(len(self.points), -1)[:, i]
            frames.append(frame)
        return pd.concat(frames, ignore_index=True)


def draw_predictions(
    ensemble_params: np.ndarray,
    model: MfModel,
    points: np.ndarray,
    quantity: str = "u",
    problem: PdeProblem | None = None,
) -> np.ndarray:
    """Stack the predicted quantity for every parameter draw, shape ``(S, N, O)``."""
    out = []
    tracked = () if quantity in (None, "u") else tuple(range(len(problem.axes)))
    for theta in ensemble_params:
        jet = mf_jets(model, points, tracked, theta).u_mf
        if not tracked:
            out.append(jet.value.data)
            continue
        bundle = DerivativeBundle.from_jet(jet, problem.fields, problem.axes)
        out.append(np.asarray(bundle[quantity].data).reshape(len(points), -1))
    return np.stack(out)


def summarize_draws(
    predictions: np.ndarray,
    sigma,
    points: np.ndarray,
    *,
    noise_replicates: int = 20,
    seed: int = 0,
    chunk: int = 1024,
    quantity: str = "u",
    outputs: tuple[str, ...] = ("u",),
) -> PredictiveSummary:
    """Moments and percentile intervals from an ``(S, N, O)`` prediction stack.

    ``sigma`` is a scalar observation noise or one value per draw. Intervals are
    percentiles of the predictions plus ``noise_replicates`` Gaussian noise draws
    each, clamped so ``lower <= mean <= upper``.
    """
    predictions = np.asarray(predictions, dtype=float)
    if predictions.ndim != 3 or predictions.shape[0] == 0:
        raise ContractError("predictive summary needs at least one posterior draw")
    n_draws = predictions.shape[0]
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (n_draws,))
    if np.any(sigma < 0):
        raise ContractError("observation noise must be non-negative")

    mean = predictions.mean(axis=0)
    epistemic = predictions.var(axis=0)
    aleatoric = np.full_like(mean, float(np.mean(sigma * sigma)))
    total = aleatoric + epistemic

    rng = np.random.default_rng(seed)
    replicates = noise_replicates if np.any(sigma > 0) else 1
    levels = sorted(set(NOMINAL_LEVELS) | {0.95})
    bounds = {level: (np.empty_like(mean), np.empty_like(mean)) for level in levels}
    for start in range(0, mean.shape[0], chunk):
        block = predictions[:, start : start + chunk]
        noisy = block[:, None] + sigma[:, None, None, None] * rng.standard_normal(
            (n_draws, replicates) + block.shape[1:]
        )
        noisy = noisy.reshape((-1,) + block.shape[1:])
        for level in levels:
            tail = 0.5 * (1.0 - level)
            lo, hi = np.quantile(noisy, [tail, 1.0 - tail], axis=0)
            bounds[level][0][start : start + chunk] = lo
            bounds[level][1][start : start + chunk] = hi

    for level, (lo, hi) in bounds.items():
        np.minimum(lo, mean, out=lo)
        np.maximum(hi, mean, out=hi)

    reliable = n_draws >= MIN_RELIABLE_DRAWS
    if not reliable:
        logger.warning(
            f"only {n_draws} posterior draws; interval estimates are unreliable"
        )
    lower, upper = bounds[0.95]
    return PredictiveSummary(
        points=np.asarray(points, dtype=float),
        mean=mean,
        total=total,
        aleatoric=aleatoric,
        epistemic=epistemic,
        lower=lower,
        upper=upper,
        n_draws=n_draws,
        level_bounds=bounds,
        quantity=quantity,
        outputs=outputs,
        reliable=reliable,
    )


def predictive_summary(
    ensemble: PosteriorEnsemble,
    model: MfModel,
    query_points: np.ndarray,
    sigma_hf: float | None = None,
    *,
    quantity: str = "u",
    problem: PdeProblem | None = None,
    noise_replicates: int = 20,
    seed: int = 0,
) -> PredictiveSummary:
    """Summarize the posterior predictive of ``quantity`` at ``query_points``.

    The aleatoric term uses the sampled sigma_hf draws when the ensemble carries
    them, otherwise ``sigma_hf`` (0 if omitted). Derivative quantities such as
    ``"u_x"`` need ``problem`` and carry no observation noise.
    """
    params = ensemble.flat_params()
    if params.shape[0] == 0:
        raise ContractError("ensemble has no draws")
    if quantity not in (None, "u") and problem is None:
        raise ContractError(f"quantity {quantity!r} needs the PDE problem")
    points = np.atleast_2d(np.asarray(query_points, dtype=float))

    sigma = ensemble.flat_sigma_hf()
    if sigma is None:
        sigma = 0.0 if sigma_hf is None else float(sigma_hf)
    if quantity not in (None, "u"):
        sigma = 0.0
    whole_field = problem is not None and quantity in (None, "u")
    outputs = tuple(problem.fields) if whole_field else (quantity,)
    predictions = draw_predictions(params, model, points, quantity, problem)
    return summarize_draws(
        predictions,
        sigma,
        points,
        noise_replicates=noise_replicates,
        seed=seed,
        quantity=quantity,
        outputs=outputs,
    )
