"""Input derivatives of network outputs and parameter gradients of losses."""

from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

from autodiff import jets
from autodiff.tape import ParamTape, Tensor
from errors import ContractError, NumericError

NETS = ("lf", "lin", "nl", "gate", "mf")


class InputDerivatives(NamedTuple):
    value: np.ndarray
    gradient: np.ndarray
    hessian: np.ndarray


def _squeeze(out: jets.Scalar2, single: bool) -> InputDerivatives:
    # (N, W) / (N, K, W) / (N, K, K, W) -> (N, W) / (N, W, K) / (N, W, K, K)
    value = out.value.data
    grad = np.moveaxis(out.d1.data, -1, 1)
    hess = np.moveaxis(out.d2.data, -1, 1)
    if out.width == 1:
        value, grad, hess = value[:, 0], grad[:, 0], hess[:, 0]
    if single:
        value, grad, hess = value[0], grad[0], hess[0]
    return InputDerivatives(value, grad, hess)


def eval_with_derivatives(
    model, points, which_net: str = "mf", theta=None, tracked=None
) -> InputDerivatives:
    """Value, gradient and Hessian of one network with respect to its inputs.

    ``model`` is either an :class:`~network.mlp.MlpSpec` paired with parameters via
    ``theta``, or an :class:`~network.composite.MfModel`. For the composite, ``lf``
    and ``mf`` are functions of the physical coordinates; ``lin``, ``nl`` and
    ``gate`` are functions of the feature vector. Output arrays drop the point axis
    for a single point and the output axis for scalar networks.
    """
    from network.composite import MfModel, lf_jet, mf_jets
    from network.mlp import MlpSpec, mlp_forward

    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if tracked is None:
        tracked = range(pts.shape[1])

    if isinstance(model, MlpSpec):
        if theta is None:
            raise ContractError("a bare MlpSpec needs its parameters in theta")
        out = mlp_forward(model, Tensor(theta), jets.lift_inputs(pts, tracked))
        return _squeeze(out, single)

    if not isinstance(model, MfModel):
        raise ContractError(f"cannot differentiate {type(model).__name__}")
    if which_net not in NETS:
        raise ContractError(f"unknown network {which_net!r}; expected one of {NETS}")
    if which_net in ("lf", "mf") and pts.shape[1] != model.input_dim:
        raise ContractError(
            f"{which_net} takes {model.input_dim} inputs, got {pts.shape[1]}"
        )
    if which_net == "lf":
        return _squeeze(lf_jet(model, pts, tracked, theta), single)
    if which_net == "mf":
        return _squeeze(mf_jets(model, pts, tracked, theta).u_mf, single)

    spec = model.specs[which_net]
    if pts.shape[1] != spec.input_dim:
        raise ContractError(
            f"{which_net} takes {spec.input_dim} inputs, got {pts.shape[1]}"
        )
    params = model.params if theta is None else np.asarray(theta, dtype=float)
    out = mlp_forward(
        spec,
        Tensor(params),
        jets.lift_inputs(pts, tracked),
        model.blocks[which_net].start,
        which_net,
    )
    return _squeeze(out, single)


def loss_gradient(
    loss_fn: Callable[[Tensor], Tensor], params: np.ndarray, term: str | None = None
) -> tuple[float, np.ndarray]:
    """Evaluate ``loss_fn`` on a fresh tape and return the loss and its gradient."""
    with ParamTape() as tape:
        theta = tape.watch(params)
        out = loss_fn(theta)
        loss = float(np.sum(out.data))
        if not np.isfinite(loss):
            name = term or getattr(loss_fn, "__name__", "loss")
            raise NumericError(f"non-finite value in loss term {name!r}", term=name)
        grad = tape.gradient(out, theta)
    if not np.all(np.isfinite(grad)):
        name = term or getattr(loss_fn, "__name__", "loss")
        raise NumericError(f"non-finite gradient of loss term {name!r}", term=name)
    return loss, grad
