"""Adam and L-BFGS over flat parameter vectors."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from errors import ContractError, NumericError

logger = logging.getLogger(__name__)

LossFn = Callable[[np.ndarray], tuple[float, np.ndarray]]


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0)


def adam_step(
    params: np.ndarray,
    grad: np.ndarray,
    state: AdamState,
    lr,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update.

    ``lr`` may be a scalar or an array with one rate per parameter.
    """
    if not (params.shape == grad.shape == state.m.shape == state.v.shape):
        raise ContractError(
            f"Adam shapes differ: params {params.shape}, grad {grad.shape}, "
            f"state {state.m.shape}"
        )
    beta1, beta2 = betas
    step = state.step + 1
    m = beta1 * state.m + (1.0 - beta1) * grad
    v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**step)
    v_hat = v / (1.0 - beta2**step)
    return params - lr * m_hat / (np.sqrt(v_hat) + eps), AdamState(m, v, step)


def cosine_lr(lr: float, lr_min: float | None, progress: float) -> float:
    """Cosine decay from ``lr`` to ``lr_min`` as ``progress`` goes from 0 to 1."""
    if lr_min is None:
        return lr
    progress = min(max(progress, 0.0), 1.0)
    return lr_min + 0.5 * (lr - lr_min) * (1.0 + math.cos(math.pi * progress))


@dataclass
class LbfgsResult:
    params: np.ndarray
    loss: float
    iterations: int
    grad_norm: float
    converged: bool
    line_search_failed: bool = False
    message: str = ""
    history: list[float] = field(default_factory=list)


class _Abort(Exception):
    pass


def lbfgs_refine(
    params: np.ndarray,
    loss_fn: LossFn,
    max_iters: int = 500,
    memory: int = 20,
    tol: float = 1e-8,
) -> LbfgsResult:
    """Quasi-Newton refinement with a strong-Wolfe line search.

    ``loss_fn`` returns the loss and its gradient. Stops when the gradient norm
    drops to ``tol`` or after ``max_iters`` iterations. A failed line search or a
    non-finite evaluation ends the stage with the best point seen and
    ``line_search_failed`` set.
    """
    x0 = np.array(params, dtype=float)
    best = {"loss": math.inf, "x": x0.copy(), "grad": None}
    last = {}
    history: list[float] = []

    def fun(x: np.ndarray) -> tuple[float, np.ndarray]:
        try:
            loss, grad = loss_fn(x)
        except NumericError as exc:
            logger.warning(f"L-BFGS evaluation failed: {exc}")
            raise _Abort from exc
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise _Abort
        if loss < best["loss"]:
            best.update(loss=loss, x=x.copy(), grad=grad.copy())
        last.update(x=x.copy(), loss=loss)
        return loss, grad

    def callback(xk: np.ndarray) -> None:
        if "x" in last and np.array_equal(xk, last["x"]):
            history.append(float(last["loss"]))

    if max_iters == 0:
        loss, grad = loss_fn(x0)
        norm = float(np.linalg.norm(grad))
        return LbfgsResult(
            x0, float(loss), 0, norm, norm <= tol, message="no iterations"
        )

    aborted = False
    try:
        result = minimize(
            fun,
            x0,
            jac=True,
            method="L-BFGS-B",
            callback=callback,
            options={
                "maxiter": max_iters,
                "maxcor": memory,
                "gtol": tol / math.sqrt(x0.size),
                "ftol": 0.0,
                "maxls": 50,
            },
        )
        message = str(result.message)
        iterations = int(result.nit)
    except _Abort:
        aborted = True
        message = "aborted on a non-finite evaluation"
        iterations = len(history)

    if best["grad"] is None:
        raise NumericError("L-BFGS found no finite evaluation", term="lbfgs")
    grad_norm = float(np.linalg.norm(best["grad"]))
    failed = aborted or "ABNORMAL" in message.upper()
    if failed:
        logger.warning(
            f"L-BFGS stopped early ({message}); keeping best loss {best['loss']:.4e}"
        )
    return LbfgsResult(
        params=best["x"],
        loss=float(best["loss"]),
        iterations=iterations,
        grad_norm=grad_norm,
        converged=grad_norm <= tol,
        line_search_failed=failed,
        message=message,
        history=history,
    )
