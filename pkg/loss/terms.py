"""Physics-informed loss terms and their weighted composite.

Every term accepts an optional parameter tensor ``theta`` (defaulting to the
model's own parameters) and a ``head``: ``"mf"`` scores the composite output,
``"lf"`` the low-fidelity network alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from autodiff.derivatives import loss_gradient
from autodiff.jets import Scalar2
from autodiff.tape import Tensor
from errors import ContractError, NumericError
from loss.weights import LossWeights
from network.composite import MfModel, lf_jet, mf_jets
from pde.bundle import DerivativeBundle
from pde.problems import PdeProblem
from pde.sampling import CollocationSet
from solvers.datasets import FidelityDataset, LabeledSet

TERMS = ("lf", "hf", "residual", "bc", "ic")
HEADS = ("mf", "lf")


def _predict(model: MfModel, points, theta, tracked=(), head: str = "mf") -> Scalar2:
    if head not in HEADS:
        raise ContractError(f"unknown head {head!r}; expected one of {HEADS}")
    if head == "lf":
        return lf_jet(model, points, tracked, theta)
    return mf_jets(model, points, tracked, theta).u_mf


def _mse(prediction: Tensor, targets: np.ndarray) -> Tensor:
    diff = prediction - targets
    return (diff * diff).sum() / targets.shape[0]


def _require(points: np.ndarray, what: str) -> None:
    if points is None or len(points) == 0:
        raise ContractError(f"{what} is empty")


def loss_lf(model: MfModel, dataset_lf: LabeledSet, theta=None) -> Tensor:
    """Mean squared error of the LF network on LF labels."""
    _require(dataset_lf.points if dataset_lf is not None else None, "LF dataset")
    pred = _predict(model, dataset_lf.points, theta, head="lf")
    return _mse(pred.value, dataset_lf.labels)


def loss_hf(
    model: MfModel, dataset_hf: LabeledSet, theta=None, head: str = "mf"
) -> Tensor:
    _require(dataset_hf.points if dataset_hf is not None else None, "HF dataset")
    pred = _predict(model, dataset_hf.points, theta, head=head)
    return _mse(pred.value, dataset_hf.labels)


def pointwise_residuals(
    model: MfModel,
    points: np.ndarray,
    problem: PdeProblem,
    theta=None,
    head: str = "mf",
) -> Tensor:
    """Squared residual norm at each point, shape ``(N,)``."""
    tracked = tuple(range(len(problem.axes)))
    jet = _predict(model, points, theta, tracked, head)
    bundle = DerivativeBundle.from_jet(jet, problem.fields, problem.axes)
    components = problem.residual(bundle, points)
    squared = components[0] * components[0]
    for component in components[1:]:
        squared = squared + component * component
    bad = np.flatnonzero(~np.isfinite(squared.data))
    if bad.size:
        raise NumericError(
            f"non-finite residual at collocation point {int(bad[0])}",
            term="residual",
            index=int(bad[0]),
        )
    return squared


def loss_residual(
    model: MfModel,
    collocation: CollocationSet,
    problem: PdeProblem,
    theta=None,
    head: str = "mf",
    points: np.ndarray | None = None,
) -> Tensor:
    """Mean squared PDE residual over the interior points (or ``points`` if given)."""
    points = collocation.interior if points is None else points
    _require(points, "collocation set")
    squared = pointwise_residuals(model, points, problem, theta, head)
    return squared.sum() / points.shape[0]


def residual_field(model: MfModel, problem: PdeProblem, head: str = "mf"):
    """Residual magnitude as a function of points, for adaptive resampling."""

    def field(points: np.ndarray) -> np.ndarray:
        return np.sqrt(pointwise_residuals(model, points, problem, head=head).data)

    return field


def loss_bc(
    model: MfModel, collocation: CollocationSet, theta=None, head: str = "mf"
) -> Tensor:
    _require(collocation.boundary, "boundary set")
    pred = _predict(model, collocation.boundary, theta, head=head)
    return _mse(pred.value, collocation.boundary_targets)


def loss_ic(
    model: MfModel, collocation: CollocationSet, theta=None, head: str = "mf"
) -> Tensor:
    _require(collocation.initial, "initial set")
    pred = _predict(model, collocation.initial, theta, head=head)
    return _mse(pred.value, collocation.initial_targets)


@dataclass
class LossBreakdown:
    """Term values, weights and (at balancing steps) weighted gradient norms.

    Inactive terms hold 0.0 and a NaN gradient norm.
    """

    l_lf: float
    l_hf: float
    l_residual: float
    l_bc: float
    l_ic: float
    total: float
    weights: LossWeights
    grad_norms: dict[str, float] = field(default_factory=dict)

    def as_row(self) -> dict[str, float]:
        row = {
            "l_lf": self.l_lf,
            "l_hf": self.l_hf,
            "l_residual": self.l_residual,
            "l_bc": self.l_bc,
            "l_ic": self.l_ic,
            "total": self.total,
            "lambda_hf": self.weights.lambda_hf,
            "lambda_r": self.weights.lambda_r,
            "lambda_b": self.weights.lambda_b,
            "lambda_ic": self.weights.lambda_ic,
        }
        for term in TERMS:
            row[f"grad_norm_{term}"] = self.grad_norms.get(term, math.nan)
        return row


def active_terms(
    data: FidelityDataset,
    problem: PdeProblem,
    head: str = "mf",
    use_residual: bool = True,
) -> tuple[str, ...]:
    terms = []
    if head == "mf" and data.has_lf:
        terms.append("lf")
    terms.append("hf")
    if use_residual and len(data.collocation.interior):
        terms.append("residual")
    if len(data.collocation.boundary):
        terms.append("bc")
    if problem.is_transient and len(data.collocation.initial):
        terms.append("ic")
    return tuple(terms)


def term_losses(
    model: MfModel,
    data: FidelityDataset,
    problem: PdeProblem,
    theta,
    terms: tuple[str, ...],
    head: str = "mf",
    residual_points: np.ndarray | None = None,
) -> dict[str, Tensor]:
    builders = {
        "lf": lambda: loss_lf(model, data.lf, theta),
        "hf": lambda: loss_hf(model, data.hf, theta, head),
        "residual": lambda: loss_residual(
            model, data.collocation, problem, theta, head, residual_points
        ),
        "bc": lambda: loss_bc(model, data.collocation, theta, head),
        "ic": lambda: loss_ic(model, data.collocation, theta, head),
    }
    out = {}
    for term in terms:
        value = builders[term]()
        if not np.isfinite(value.data).all():
            raise NumericError(f"non-finite value in loss term {term!r}", term=term)
        out[term] = value
    return out


def weighted_total(values: dict[str, Tensor], weights: LossWeights) -> Tensor:
    total = None
    for term, value in values.items():
        part = weights.for_term(term) * value
        total = part if total is None else total + part
    return total


def loss_breakdown(
    model: MfModel,
    data: FidelityDataset,
    problem: PdeProblem,
    weights: LossWeights,
    params: np.ndarray | None = None,
    *,
    terms: tuple[str, ...] | None = None,
    head: str = "mf",
    with_grad_norms: bool = False,
    residual_points: np.ndarray | None = None,
) -> LossBreakdown:
    """Evaluate every active term, optionally with per-term gradient norms."""
    params = model.params if params is None else params
    terms = active_terms(data, problem, head) if terms is None else terms
    values = {
        term: float(t.data)
        for term, t in term_losses(
            model, data, problem, Tensor(params), terms, head, residual_points
        ).items()
    }
    norms = {}
    if with_grad_norms:
        for term in terms:
            weight = weights.for_term(term)

            def weighted(theta, term=term, weight=weight):
                single = term_losses(
                    model, data, problem, theta, (term,), head, residual_points
                )
                return weight * single[term]

            _, grad = loss_gradient(weighted, params, term=term)
            norms[term] = float(np.linalg.norm(grad))

    total = sum(weights.for_term(term) * value for term, value in values.items())
    return LossBreakdown(
        l_lf=values.get("lf", 0.0),
        l_hf=values.get("hf", 0.0),
        l_residual=values.get("residual", 0.0),
        l_bc=values.get("bc", 0.0),
        l_ic=values.get("ic", 0.0),
        total=total,
        weights=weights,
        grad_norms=norms,
    )
