"""Hamiltonian Monte Carlo with dual-averaging step size and diagonal mass matrix."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

import config as settings
from bayes.diagnostics import effective_sample_size, split_rhat
from bayes.schemas import BayesConfig
from errors import ConfigError, ContractError, NumericError, SamplerHealthError

logger = logging.getLogger(__name__)

LogDensity = Callable[[np.ndarray], tuple[float, np.ndarray]]
ACCEPTANCE_BAND = (0.4, 0.95)


def kinetic_energy(momentum: np.ndarray, inv_mass: np.ndarray) -> float:
    return 0.5 * float(np.sum(momentum * momentum * inv_mass))


def leapfrog(
    theta: np.ndarray,
    momentum: np.ndarray,
    log_density: LogDensity,
    step_size: float,
    n_steps: int,
    inv_mass: np.ndarray,
    grad: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, float, np.ndarray]:
    """Velocity-Verlet integration.

    Returns the end state, its momentum, log density and gradient.
    """
    if n_steps < 1:
        raise ConfigError("leapfrog needs at least one step")
    theta = np.array(theta, dtype=float)
    momentum = np.array(momentum, dtype=float)
    if grad is None:
        _, grad = log_density(theta)
    momentum = momentum + 0.5 * step_size * grad
    logp = math.nan
    for step in range(n_steps):
        theta = theta + step_size * inv_mass * momentum
        logp, grad = log_density(theta)
        if step < n_steps - 1:
            momentum = momentum + step_size * grad
    momentum = momentum + 0.5 * step_size * grad
    return theta, momentum, logp, grad


class DualAveraging:
    """Step-size adaptation toward a target acceptance probability."""

    def __init__(
        self,
        step_size: float,
        target: float = 0.75,
        gamma: float = 0.05,
        t0: float = 10.0,
        kappa: float = 0.75,
    ) -> None:
        self.target = target
        self.gamma = gamma
        self.t0 = t0
        self.kappa = kappa
        self.restart(step_size)

    def restart(self, step_size: float, shrink_bias: float = 10.0) -> None:
        """Forget the history and pull later proposals toward ``shrink_bias * step``.

        The first call explores upward from the configured step; a restart after
        the mass-matrix switch passes ``shrink_bias=1`` and stays at the step
        already found.
        """
        self.mu = math.log(shrink_bias * step_size)
        self.count = 0
        self.h_bar = 0.0
        self.log_step = math.log(step_size)
        self.log_step_bar = 0.0

    @property
    def step_size(self) -> float:
        return math.exp(self.log_step)

    @property
    def final_step_size(self) -> float:
        return math.exp(self.log_step_bar)

    def update(self, accept_prob: float) -> float:
        self.count += 1
        t = self.count
        weight = 1.0 / (t + self.t0)
        self.h_bar = (1.0 - weight) * self.h_bar + weight * (self.target - accept_prob)
        self.log_step = self.mu - math.sqrt(t) / self.gamma * self.h_bar
        eta = t ** (-self.kappa)
        self.log_step_bar = eta * self.log_step + (1.0 - eta) * self.log_step_bar
        return self.step_size


class _Welford:
    def __init__(self, dim: int) -> None:
        self.n = 0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    def add(self, x: np.ndarray) -> None:
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)

    def regularized_variance(self) -> np.ndarray:
        if self.n < 2:
            return np.ones_like(self.mean)
        var = self.m2 / (self.n - 1)
        return (self.n / (self.n + 5.0)) * var + 1e-3 * (5.0 / (self.n + 5.0))


def warmup_windows(warmup: int) -> tuple[int, int]:
    """Iterations ``[start, end)`` that feed the mass-matrix estimate.

    The window opens halfway through warmup and leaves a final stretch of at
    least ``min(50, warmup // 4)`` iterations, never under a fifth of warmup,
    for the step size to settle under the new metric.
    """
    final = max(warmup // 5, min(50, warmup // 4))
    return warmup // 2, warmup - final


def acceptance_probability(energy_error: float) -> float:
    """Metropolis ratio ``min(1, exp(-dH))``, zero for a non-finite error."""
    if not math.isfinite(energy_error):
        return 0.0
    return math.exp(min(0.0, -energy_error))


@dataclass
class ChainResult:
    draws: np.ndarray
    log_posterior: np.ndarray
    acceptance: float
    step_size: float
    inv_mass: np.ndarray
    divergences: int
    n_post_warmup: int


@dataclass
class PosteriorEnsemble:
    """Post-warmup draws indexed by ``(chain, draw)``.

    When the target learns sigma_hf, the last state coordinate is ``log sigma_hf``
    and is exposed through :attr:`sigma_hf` rather than :attr:`params`.
    """

    draws: np.ndarray
    log_posterior: np.ndarray
    acceptance: np.ndarray
    step_size: np.ndarray
    inv_mass: np.ndarray
    divergences: np.ndarray
    ess: np.ndarray
    rhat: float
    n_params: int
    sigma_hf_index: int | None = None
    flags: list[str] = field(default_factory=list)

    @property
    def n_chains(self) -> int:
        return self.draws.shape[0]

    @property
    def n_draws(self) -> int:
        return self.draws.shape[0] * self.draws.shape[1]

    @property
    def params(self) -> np.ndarray:
        return self.draws[..., : self.n_params]

    @property
    def sigma_hf(self) -> np.ndarray | None:
        if self.sigma_hf_index is None:
            return None
        return np.exp(self.draws[..., self.sigma_hf_index])

    def flat_params(self) -> np.ndarray:
        return self.params.reshape(-1, self.n_params)

    def flat_sigma_hf(self) -> np.ndarray | None:
        sigma = self.sigma_hf
        return None if sigma is None else sigma.reshape(-1)


def _run_chain(
    chain: int, init: np.ndarray, target, config: BayesConfig
) -> ChainResult:
    rng = np.random.default_rng([config.seed, chain])
    dim = init.size
    theta = init + config.init_jitter * rng.standard_normal(dim)
    inv_mass = np.ones(dim)
    adapter = DualAveraging(config.step_size, target=config.target_accept)
    step_size = config.step_size
    warmup = config.warmup
    collect_start, collect_end = warmup_windows(warmup)
    window = _Welford(dim)
    fixes_subsample = hasattr(target, "fix_subsample")

    stored, stored_logp = [], []
    accepted_sum, divergences, post = 0.0, 0, 0
    logp, grad = target(theta)
    for i in range(warmup + config.samples):
        density = target.fix_subsample(rng) if fixes_subsample else target
        if fixes_subsample:
            logp, grad = density(theta)
        momentum = rng.standard_normal(dim) / np.sqrt(inv_mass)
        eps = step_size * (1.0 + config.step_jitter * rng.uniform(-1.0, 1.0))
        start_energy = -logp + kinetic_energy(momentum, inv_mass)
        try:
            new_theta, new_momentum, new_logp, new_grad = leapfrog(
                theta, momentum, density, eps, config.leapfrog_steps, inv_mass, grad
            )
            end_energy = -new_logp + kinetic_energy(new_momentum, inv_mass)
            energy_error = end_energy - start_energy
        except NumericError:
            energy_error = math.inf
        if not math.isfinite(energy_error):
            energy_error = math.inf
        divergent = energy_error > config.max_energy_error
        accept_prob = 0.0 if divergent else acceptance_probability(energy_error)
        if not divergent and rng.uniform() < accept_prob:
            theta, logp, grad = new_theta, new_logp, new_grad

        if i < warmup:
            if not config.adapt:
                continue
            step_size = adapter.update(accept_prob)
            if collect_start <= i < collect_end:
                window.add(theta)
            if i == collect_end - 1:
                inv_mass = window.regularized_variance()
                adapter.restart(step_size, shrink_bias=1.0)
            if i == warmup - 1:
                step_size = adapter.final_step_size
            continue

        post += 1
        accepted_sum += accept_prob
        divergences += int(divergent)
        if (i - warmup) % config.thin == 0:
            stored.append(theta.copy())
            stored_logp.append(logp)

    acceptance = accepted_sum / max(post, 1)
    logger.debug(
        f"chain {chain}: acceptance {acceptance:.3f}, step {step_size:.3e}, "
        f"{divergences} divergent transitions"
    )
    return ChainResult(
        np.array(stored),
        np.array(stored_logp),
        acceptance,
        step_size,
        inv_mass,
        divergences,
        post,
    )


def hmc_sample(
    init: np.ndarray, log_posterior_fn, config: BayesConfig
) -> PosteriorEnsemble:
    """Run ``config.chains`` independent chains from ``init`` and pool their draws.

    ``log_posterior_fn(state) -> (logp, grad)``. If it also provides
    ``fix_subsample(rng)``, a fresh collocation subsample is frozen for each
    trajectory. Chains run on a thread pool capped by ``MFBPINN_MAX_WORKERS``.
    """
    if config.leapfrog_steps < 1:
        raise ConfigError("leapfrog_steps must be at least 1")
    init = np.asarray(init, dtype=float)
    if init.ndim != 1 or init.size == 0:
        raise ContractError("init must be a non-empty parameter vector")
    workers = min(config.chains, settings.MAX_WORKERS)
    logger.info(
        f"HMC: {config.chains} chains x "
        f"({config.warmup} warmup + {config.samples} samples), "
        f"{config.leapfrog_steps} leapfrog steps, {workers} worker(s)"
    )
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_run_chain, c, init, log_posterior_fn, config)
                for c in range(config.chains)
            ]
            results = [future.result() for future in futures]
    else:
        results = [
            _run_chain(c, init, log_posterior_fn, config) for c in range(config.chains)
        ]

    divergent = sum(r.divergences for r in results)
    total = sum(r.n_post_warmup for r in results)
    if total and divergent / total > config.max_divergence_fraction:
        raise SamplerHealthError(
            f"{divergent} of {total} post-warmup transitions diverged "
            f"(energy error > {config.max_energy_error:g})"
        )

    flags = []
    lo, hi = ACCEPTANCE_BAND
    for chain, result in enumerate(results):
        if not lo < result.acceptance < hi:
            message = (
                f"chain {chain} acceptance {result.acceptance:.3f} outside ({lo}, {hi})"
            )
            flags.append(message)
            logger.warning(message)

    logp = np.stack([r.log_posterior for r in results])
    learns_sigma = bool(getattr(log_posterior_fn, "learns_sigma_hf", False))
    model = getattr(log_posterior_fn, "model", None)
    n_params = int(getattr(model, "n_params", init.size))
    sigma_hf_index = None
    if learns_sigma:
        sigma_hf_index = n_params + log_posterior_fn.learned.index("hf")
    ensemble = PosteriorEnsemble(
        draws=np.stack([r.draws for r in results]),
        log_posterior=logp,
        acceptance=np.array([r.acceptance for r in results]),
        step_size=np.array([r.step_size for r in results]),
        inv_mass=np.stack([r.inv_mass for r in results]),
        divergences=np.array([r.divergences for r in results]),
        ess=np.array([effective_sample_size(row) for row in logp]),
        rhat=split_rhat(logp),
        n_params=n_params,
        sigma_hf_index=sigma_hf_index,
        flags=flags,
    )
    logger.info(
        f"HMC done: acceptance {np.round(ensemble.acceptance, 3).tolist()}, "
        f"R-hat {ensemble.rhat:.3f}, ESS {np.round(ensemble.ess, 1).tolist()}"
    )
    return ensemble
