"""Staged training: LF pre-training, then multi-fidelity Adam and L-BFGS."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from autodiff.derivatives import loss_gradient
from autodiff.tape import Tensor, concat
from errors import ContractError, NumericError, TrainingError
from loss.terms import (
    LossBreakdown,
    active_terms,
    loss_breakdown,
    loss_lf,
    residual_field,
    term_losses,
    weighted_total,
)
from loss.weights import balance_weights
from network.composite import MfModel
from pde.problems import PdeProblem
from pde.sampling import resample_interior
from solvers.datasets import FidelityDataset, LabeledSet
from training.metrics import evaluate_mre
from training.optimizers import AdamState, adam_step, cosine_lr, lbfgs_refine
from training.schemas import StageSchedule, TrainConfig

logger = logging.getLogger(__name__)

STATUSES = ("converged", "max_iters", "diverged")


@dataclass
class TrainReport:
    history: pd.DataFrame
    params: np.ndarray
    stage_times: dict[str, float] = field(default_factory=dict)
    mre: float | None = None
    status: str = "max_iters"
    warnings: list[str] = field(default_factory=list)

    def merge(self, later: "TrainReport") -> "TrainReport":
        """Append a later stage's report to this one."""
        return TrainReport(
            history=pd.concat([self.history, later.history], ignore_index=True),
            params=later.params,
            stage_times={**self.stage_times, **later.stage_times},
            mre=later.mre if later.mre is not None else self.mre,
            status=later.status,
            warnings=self.warnings + later.warnings,
        )


def _batches(n: int, size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, size):
        yield order[start : start + size]


def _epoch_lr(schedule: StageSchedule, epoch: int) -> float:
    progress = (epoch - 1) / max(schedule.epochs - 1, 1)
    return cosine_lr(schedule.lr, schedule.lr_min, progress)


def pretrain_lf(
    model: MfModel, dataset_lf: LabeledSet, config: TrainConfig
) -> TrainReport:
    """Fit the LF network alone to LF data; the other blocks stay bit-identical."""
    if dataset_lf is None or len(dataset_lf) == 0:
        raise ContractError("LF pre-training needs a non-empty LF dataset")
    schedule = config.lf_pretrain
    lf = model.blocks["lf"]
    rest = Tensor(model.params[lf.stop :])
    params = model.params[lf].copy()
    state = AdamState.zeros(params.size)
    rng = np.random.default_rng([config.seed, 1])

    rows = []
    last_finite = 0
    started = time.perf_counter()
    for epoch in range(1, schedule.epochs + 1):
        lr = _epoch_lr(schedule, epoch)
        losses = []
        for batch in _batches(len(dataset_lf), config.lf_batch_size, rng):
            subset = dataset_lf.subset(batch)

            def objective(theta_lf, subset=subset):
                return loss_lf(model, subset, concat([theta_lf, rest]))

            try:
                loss, grad = loss_gradient(objective, params, term="lf")
            except NumericError as exc:
                raise TrainingError(
                    f"LF pre-training diverged at epoch {epoch}",
                    last_finite_epoch=last_finite,
                    term="lf",
                ) from exc
            params, state = adam_step(params, grad, state, lr)
            losses.append(loss)
        if not np.all(np.isfinite(params)):
            raise TrainingError(
                f"LF parameters became non-finite at epoch {epoch}",
                last_finite_epoch=last_finite,
                term="lf",
            )
        last_finite = epoch
        epoch_loss = float(np.mean(losses))
        rows.append(
            {
                "stage": "lf_pretrain",
                "epoch": epoch,
                "lr": lr,
                "l_lf": epoch_loss,
                "total": epoch_loss,
            }
        )
        if epoch % config.log_every == 0 or epoch == schedule.epochs:
            logger.info(
                f"[lf_pretrain] epoch {epoch}/{schedule.epochs} loss={epoch_loss:.4e}"
            )

    model.params[lf] = params
    model.metadata["lf_pretrained"] = True
    return TrainReport(
        history=pd.DataFrame(rows),
        params=model.params.copy(),
        stage_times={"lf_pretrain": time.perf_counter() - started},
    )


def _lr_scale(model: MfModel, config: TrainConfig, head: str) -> np.ndarray:
    blocks = model.blocks
    scale = np.zeros(model.n_params)
    if head == "lf":
        scale[blocks["lf"]] = 1.0
        return scale
    scale[:] = 1.0
    scale[blocks["lf"]] = 0.0 if config.freeze_lf else config.lf_finetune_factor
    if model.gate_mode != "adaptive":
        scale[blocks["gate"]] = 0.0
    return scale


def _minibatch(
    data: FidelityDataset, collocation, config: TrainConfig, rng: np.random.Generator
) -> FidelityDataset:
    lf = data.lf
    if data.has_lf and len(lf) > config.lf_batch_size:
        lf = lf.subset(rng.choice(len(lf), config.lf_batch_size, replace=False))
    interior = collocation.interior
    if len(interior) > config.residual_batch_size:
        keep = rng.choice(len(interior), config.residual_batch_size, replace=False)
        interior = interior[keep]
    return FidelityDataset(data.hf, collocation.with_interior(interior), lf)


def _fit(
    model: MfModel,
    data: FidelityDataset,
    problem: PdeProblem,
    config: TrainConfig,
    head: str,
    stage: str,
) -> TrainReport:
    schedule = config.mf_adam
    use_residual = not config.ablation.no_residual
    terms = active_terms(data, problem, head, use_residual=use_residual)
    scale = _lr_scale(model, config, head)
    weights = config.initial_weights
    collocation = data.collocation
    rng = np.random.default_rng([config.seed, 2])
    params = model.params.copy()
    state = AdamState.zeros(params.size)

    rows: list[dict] = []
    warnings: list[str] = []
    last_finite = 0
    started = time.perf_counter()
    for epoch in range(1, schedule.epochs + 1):
        lr = _epoch_lr(schedule, epoch)
        batch = _minibatch(data, collocation, config, rng)
        values: dict[str, float] = {}

        def objective(theta, batch=batch, values=values, weights=weights):
            parts = term_losses(model, batch, problem, theta, terms, head)
            values.update({term: float(part.data) for term, part in parts.items()})
            return weighted_total(parts, weights)

        try:
            loss, grad = loss_gradient(objective, params, term="total")
        except NumericError as exc:
            raise TrainingError(
                f"{stage} diverged at epoch {epoch}: {exc}",
                last_finite_epoch=last_finite,
                term=exc.term,
            ) from exc
        params, state = adam_step(params, grad, state, lr * scale)
        if not np.all(np.isfinite(params)):
            raise TrainingError(
                f"{stage} parameters became non-finite at epoch {epoch}",
                last_finite_epoch=last_finite,
            )
        last_finite = epoch

        breakdown = LossBreakdown(
            l_lf=values.get("lf", 0.0),
            l_hf=values.get("hf", 0.0),
            l_residual=values.get("residual", 0.0),
            l_bc=values.get("bc", 0.0),
            l_ic=values.get("ic", 0.0),
            total=loss,
            weights=weights,
        )
        if config.weight_update_every and epoch % config.weight_update_every == 0:
            breakdown = loss_breakdown(
                model,
                batch,
                problem,
                weights,
                params,
                terms=terms,
                head=head,
                with_grad_norms=True,
            )
            weights = balance_weights([breakdown], weights)
        rows.append({"stage": stage, "epoch": epoch, "lr": lr, **breakdown.as_row()})

        resample = config.resample_every and epoch % config.resample_every == 0
        if resample and "residual" in terms:
            collocation = resample_interior(
                problem,
                collocation,
                config.resample_strategy,
                rng,
                residual_field(model.copy(params), problem, head),
            )
        if epoch % config.log_every == 0 or epoch == schedule.epochs:
            logger.info(
                f"[{stage}] epoch {epoch}/{schedule.epochs} total={loss:.4e} "
                + " ".join(f"{t}={v:.3e}" for t, v in values.items())
            )
    adam_time = time.perf_counter() - started

    status = "max_iters"
    started = time.perf_counter()
    if config.lbfgs_iters > 0:
        snapshot = FidelityDataset(data.hf, collocation, data.lf)
        mask = scale > 0

        def full_objective(theta):
            losses = term_losses(model, snapshot, problem, theta, terms, head)
            return weighted_total(losses, weights)

        def refine_objective(sub: np.ndarray):
            full = params.copy()
            full[mask] = sub
            value, grad = loss_gradient(full_objective, full, term="total")
            return value, grad[mask]

        result = lbfgs_refine(
            params[mask],
            refine_objective,
            config.lbfgs_iters,
            config.lbfgs_memory,
            config.lbfgs_tol,
        )
        params[mask] = result.params
        for i, value in enumerate(result.history, start=1):
            epoch = schedule.epochs + i
            rows.append({"stage": f"{stage}_lbfgs", "epoch": epoch, "total": value})
        if result.line_search_failed:
            warnings.append(f"{stage} L-BFGS ended early: {result.message}")
        status = "converged" if result.converged else "max_iters"
        logger.info(
            f"[{stage}_lbfgs] {result.iterations} iterations, loss={result.loss:.4e}, "
            f"|grad|={result.grad_norm:.2e}"
        )

    model.params = params
    return TrainReport(
        history=pd.DataFrame(rows),
        params=params.copy(),
        stage_times={
            f"{stage}_adam": adam_time,
            f"{stage}_lbfgs": time.perf_counter() - started,
        },
        status=status,
        warnings=warnings,
    )


def train_mf(
    model: MfModel,
    datasets: FidelityDataset,
    problem: PdeProblem,
    config: TrainConfig,
    *,
    evaluation_mu: float | None = None,
    evaluation_resolution: tuple[int, ...] | None = None,
) -> TrainReport:
    """Train every block of the composite on HF data, LF data and physics terms."""
    if config.ablation.no_gating and model.gate_mode == "adaptive":
        model.gate_mode = "constant"
    if not model.metadata.get("lf_pretrained") and not config.ablation.no_lf_pretrain:
        logger.warning("training the composite without a pre-trained LF network")
    report = _fit(model, datasets, problem, config, head="mf", stage="mf")
    if evaluation_mu is not None:
        report.mre = evaluate_mre(
            model, problem, evaluation_mu, "mf", evaluation_resolution
        )
        logger.info(
            f"MF-PINN MRE at {problem.param_name}={evaluation_mu:g}: {report.mre:.4%}"
        )
    return report


def train_single_fidelity(
    model: MfModel,
    datasets: FidelityDataset,
    problem: PdeProblem,
    config: TrainConfig,
    *,
    evaluation_mu: float | None = None,
    evaluation_resolution: tuple[int, ...] | None = None,
) -> TrainReport:
    """Plain PINN baseline: the LF network trained on HF data and physics only."""
    report = _fit(model, datasets, problem, config, head="lf", stage="pinn")
    if evaluation_mu is not None:
        report.mre = evaluate_mre(
            model, problem, evaluation_mu, "lf", evaluation_resolution
        )
        logger.info(
            f"PINN-HF MRE at {problem.param_name}={evaluation_mu:g}: {report.mre:.4%}"
        )
    return report
