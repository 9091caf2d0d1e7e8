"""Gaussian data and residual likelihood with a Gaussian weight prior."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from autodiff.tape import ParamTape, Tensor
from bayes.schemas import BayesConfig
from errors import ConfigError, ContractError, NumericError
from loss.terms import pointwise_residuals
from network.composite import MfModel, lf_jet, mf_jets
from pde.problems import PdeProblem
from pde.sampling import CollocationSet
from solvers.datasets import FidelityDataset, LabeledSet

LOG_HALF_NORMAL = 0.5 * math.log(2.0 / math.pi)
LogDensity = Callable[[np.ndarray], tuple[float, np.ndarray]]


def _squared_error(prediction: Tensor, labels: np.ndarray) -> Tensor:
    diff = prediction - labels
    return (diff * diff).sum()


@dataclass
class PosteriorTarget:
    """Log posterior over the flat parameters, extended by learned log noise scales.

    The sampler state is ``[theta, log sigma_hf?, log sigma_r?]``; a learned scale
    gets a half-normal(1) hyperprior and the log-transform Jacobian.
    """

    model: MfModel
    config: BayesConfig
    problem: PdeProblem | None = None
    hf: LabeledSet | None = None
    lf: LabeledSet | None = None
    collocation: CollocationSet | None = None
    learned: tuple[str, ...] = field(init=False)
    fixed: dict[str, float] = field(init=False)

    def __post_init__(self) -> None:
        config = self.config
        sigma_hf = config.sigma_hf
        if sigma_hf == "auto":
            known = self.hf is not None and self.hf.noise_sd > 0
            sigma_hf = self.hf.noise_sd if known else "learn"
        has_data = {
            "hf": self.hf is not None and len(self.hf) > 0,
            "r": self.n_interior > 0,
        }
        learned, fixed = [], {}
        for name, value in (("hf", sigma_hf), ("r", config.sigma_r)):
            if value == "learn" and not has_data[name]:
                # nothing to explain, the scale would only sample its hyperprior
                continue
            if value == "learn":
                learned.append(name)
            else:
                fixed[name] = float(value)
        fixed["b"] = float(config.sigma_b or (fixed.get("r") or 0.01))
        self.learned = tuple(learned)
        self.fixed = fixed

        n_interior = self.n_interior
        if n_interior and self.problem is None:
            raise ContractError("residual likelihood needs the PDE problem")
        if n_interior and config.subsample > n_interior:
            raise ConfigError(
                f"subsample {config.subsample} exceeds the "
                f"{n_interior} collocation points"
            )

    @property
    def n_interior(self) -> int:
        return 0 if self.collocation is None else len(self.collocation.interior)

    @property
    def dim(self) -> int:
        return self.model.n_params + len(self.learned)

    @property
    def learns_sigma_hf(self) -> bool:
        return "hf" in self.learned

    def initial_state(self, params: np.ndarray) -> np.ndarray:
        """Append starting log scales to ``params``.

        A learned sigma_hf starts at the RMS misfit of the HF data.
        """
        extra = []
        for name in self.learned:
            sigma = 0.1
            if name == "hf" and self.hf is not None and len(self.hf):
                pred = mf_jets(self.model, self.hf.points, theta=params).u_mf.value.data
                sigma = float(np.sqrt(np.mean((pred - self.hf.labels) ** 2)))
            extra.append(math.log(max(sigma, 1e-3)))
        return np.concatenate([np.asarray(params, dtype=float), extra])

    def sigma(self, state: np.ndarray, name: str) -> float:
        if name in self.learned:
            return math.exp(state[self.model.n_params + self.learned.index(name)])
        return self.fixed[name]

    def __call__(self, state: np.ndarray) -> tuple[float, np.ndarray]:
        return self.evaluate(state)

    def fix_subsample(self, rng: np.random.Generator) -> LogDensity:
        """Freeze one collocation subsample for a whole trajectory."""
        n, m = self.n_interior, self.config.subsample
        if not n or m == 0 or m >= n:
            return self.evaluate
        index = rng.choice(n, size=m, replace=False)
        points = self.collocation.interior[index]
        return lambda state: self.evaluate(state, points)

    def evaluate(
        self, state: np.ndarray, interior: np.ndarray | None = None
    ) -> tuple[float, np.ndarray]:
        state = np.asarray(state, dtype=float)
        n_params = self.model.n_params
        if state.shape != (self.dim,):
            raise ContractError(
                f"state has shape {state.shape}, posterior needs ({self.dim},)"
            )
        tau = self.config.prior_scale
        interior = (
            self.collocation.interior
            if interior is None and self.n_interior
            else interior
        )

        # sums of squares with the number of values they cover, scale applied later
        sums: dict[str, tuple[Tensor, float]] = {}
        with ParamTape() as tape:
            theta = tape.watch(state[:n_params])
            if self.hf is not None and len(self.hf):
                pred = mf_jets(self.model, self.hf.points, theta=theta).u_mf.value
                sums["hf"] = (_squared_error(pred, self.hf.labels), self.hf.labels.size)
            if self.lf is not None and len(self.lf) and self.config.sigma_lf:
                pred = lf_jet(self.model, self.lf.points, theta=theta).value
                sums["lf"] = (_squared_error(pred, self.lf.labels), self.lf.labels.size)
            if interior is not None and len(interior):
                squared = pointwise_residuals(self.model, interior, self.problem, theta)
                factor = self.n_interior / len(interior)
                sums["r"] = (factor * squared.sum(), float(self.n_interior))
            if self.collocation is not None:
                for name, pts, targets in (
                    ("b", self.collocation.boundary, self.collocation.boundary_targets),
                    ("ic", self.collocation.initial, self.collocation.initial_targets),
                ):
                    if len(pts):
                        pred = mf_jets(self.model, pts, theta=theta).u_mf.value
                        sums[name] = (_squared_error(pred, targets), targets.size)

            sigmas = {
                "hf": self.sigma(state, "hf") if "hf" in sums else None,
                "lf": self.config.sigma_lf,
                "r": self.sigma(state, "r") if "r" in sums else None,
                "b": self.fixed["b"],
                "ic": self.fixed["b"],
            }
            total = -(theta * theta).sum() / (2.0 * tau * tau)
            for name, (ss, _) in sums.items():
                total = total - ss / (2.0 * sigmas[name] ** 2)
            grad_theta = tape.gradient(total, theta)
            logp = float(total.data)

        logp -= 0.5 * n_params * math.log(2.0 * math.pi * tau * tau)
        for name, (_, count) in sums.items():
            logp -= count * (math.log(sigmas[name]) + 0.5 * math.log(2.0 * math.pi))

        grad = np.zeros(self.dim)
        grad[:n_params] = grad_theta
        for i, name in enumerate(self.learned):
            sigma = self.sigma(state, name)
            ss, count = sums.get(name, (None, 0.0))
            ss_value = 0.0 if ss is None else float(ss.data)
            # half-normal(1) hyperprior on sigma plus the log-sigma Jacobian
            logp += LOG_HALF_NORMAL - 0.5 * sigma * sigma + math.log(sigma)
            grad[n_params + i] = ss_value / sigma**2 - count - sigma * sigma + 1.0

        if not math.isfinite(logp) or not np.all(np.isfinite(grad)):
            raise NumericError("non-finite log posterior", term="log_posterior")
        return logp, grad


def log_posterior(
    params: np.ndarray,
    datasets: FidelityDataset | LabeledSet | None,
    collocation: CollocationSet | None,
    problem: PdeProblem | None,
    config: BayesConfig,
    *,
    model: MfModel,
) -> tuple[float, np.ndarray]:
    """Log posterior and gradient at ``params`` over the full collocation set."""
    if isinstance(datasets, FidelityDataset):
        hf, lf = datasets.hf, datasets.lf
    else:
        hf, lf = datasets, None
    target = PosteriorTarget(model, config, problem, hf, lf, collocation)
    return target.evaluate(params)
