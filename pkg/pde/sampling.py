"""Collocation point generation for interior, boundary and initial sets."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
import pandas as pd
from scipy.stats import qmc

from errors import ConfigError, ContractError
from pde.problems import PdeProblem

logger = logging.getLogger(__name__)

STRATEGIES = ("uniform", "latin-hypercube", "residual-adaptive")

ResidualField = Callable[[np.ndarray], np.ndarray]


class CollocationCounts(NamedTuple):
    n_residual: int
    n_boundary: int
    n_initial: int
    n_param: int


@dataclass
class CollocationSet:
    """Points carry the physical parameter in their last column."""

    interior: np.ndarray
    boundary: np.ndarray
    boundary_targets: np.ndarray
    initial: np.ndarray
    initial_targets: np.ndarray
    mu_levels: np.ndarray
    strategy: str = "uniform"

    def with_interior(self, interior: np.ndarray) -> "CollocationSet":
        return CollocationSet(
            interior,
            self.boundary,
            self.boundary_targets,
            self.initial,
            self.initial_targets,
            self.mu_levels,
            self.strategy,
        )

    def to_frame(self, columns: list[str]) -> pd.DataFrame:
        frames = []
        for kind, pts in (
            ("interior", self.interior),
            ("boundary", self.boundary),
            ("initial", self.initial),
        ):
            frame = pd.DataFrame(pts, columns=columns)
            frame.insert(0, "kind", kind)
            frames.append(frame)
        return pd.concat(frames, ignore_index=True)


def _param_levels(
    problem: PdeProblem,
    n_param: int,
    strategy: str,
    rng: np.random.Generator,
    param_range: tuple[float, float],
) -> np.ndarray:
    lo, hi = param_range
    if lo == hi:
        return np.full(max(n_param, 1), lo)
    if problem.param_log:
        lo, hi = np.log(lo), np.log(hi)
    if strategy == "latin-hypercube":
        unit = (rng.permutation(n_param) + rng.uniform(size=n_param)) / n_param
    else:
        unit = rng.uniform(size=n_param)
    levels = lo + np.sort(unit) * (hi - lo)
    return np.exp(levels) if problem.param_log else levels


def _attach(
    coords: np.ndarray, levels: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Append a parameter column, cycling through ``levels`` in random order."""
    n = coords.shape[0]
    picks = np.resize(rng.permutation(len(levels)), n)
    rng.shuffle(picks)
    return np.column_stack([coords, levels[picks]])


def _interior_coords(
    problem: PdeProblem, n: int, strategy: str, rng: np.random.Generator
) -> np.ndarray:
    lower = np.asarray(problem.lower)
    upper = np.asarray(problem.upper)
    if strategy == "latin-hypercube":
        unit = qmc.LatinHypercube(d=len(lower), seed=rng).random(n)
        coords = lower + unit * (upper - lower)
        # strata touch the faces, interior points must not
        return np.clip(coords, np.nextafter(lower, upper), np.nextafter(upper, lower))
    return rng.uniform(np.nextafter(lower, upper), upper, size=(n, len(lower)))


def _conditions(problem, conditions, n, levels, rng):
    if not conditions or n == 0:
        width = problem.input_dim
        return np.empty((0, width)), np.empty((0, problem.output_dim))
    shares = np.full(len(conditions), n // len(conditions))
    shares[: n % len(conditions)] += 1
    points, targets = [], []
    for condition, share in zip(conditions, shares):
        if share == 0:
            continue
        pts = _attach(condition.sampler(rng, int(share)), levels, rng)
        points.append(pts)
        target = np.asarray(condition.target(pts), dtype=float)
        targets.append(target.reshape(len(pts), -1))
    return np.vstack(points), np.vstack(targets)


def adaptive_pick(
    candidates: np.ndarray,
    residuals: np.ndarray,
    n: int,
    rng: np.random.Generator,
    exploration: float = 0.1,
) -> np.ndarray:
    """Draw ``n`` of ``candidates`` without replacement, weighted by residual size.

    Probabilities mix the normalized residual magnitude with a uniform share
    ``exploration`` so no region is ever excluded.
    """
    magnitude = np.abs(np.asarray(residuals, dtype=float)).reshape(-1)
    if magnitude.shape[0] != candidates.shape[0]:
        raise ContractError("one residual per candidate point is required")
    if not np.all(np.isfinite(magnitude)):
        raise ContractError("residual field returned non-finite values")
    m = candidates.shape[0]
    total = magnitude.sum()
    uniform = np.full(m, 1.0 / m)
    if total <= 0:
        probs = uniform
    else:
        probs = (1.0 - exploration) * magnitude / total + exploration * uniform
    probs = probs / probs.sum()
    index = rng.choice(m, size=n, replace=False, p=probs)
    return candidates[index]


def sample_points(
    problem: PdeProblem,
    counts: CollocationCounts | tuple[int, int, int, int],
    strategy: str = "uniform",
    seed: int | np.random.Generator = 0,
    residual_fn: ResidualField | None = None,
    *,
    param_range: tuple[float, float] | None = None,
    candidate_factor: int = 10,
    exploration: float = 0.1,
) -> CollocationSet:
    """Draw interior, boundary and initial collocation points.

    The parameter takes ``n_param`` levels spread over ``param_range`` (log-spaced
    for log-scaled parameters) and each point is assigned one level. The
    residual-adaptive strategy draws its interior points from a uniform candidate
    pool ``candidate_factor`` times larger; without ``residual_fn`` it falls back
    to a uniform draw.
    """
    if strategy not in STRATEGIES:
        raise ConfigError(
            f"unknown sampling strategy {strategy!r}; expected {STRATEGIES}"
        )
    counts = CollocationCounts(*counts)
    if min(counts) < 0 or counts.n_param < 1:
        raise ContractError(f"invalid collocation counts {tuple(counts)}")
    param_range = tuple(param_range or problem.param_range)
    if param_range[0] > param_range[1]:
        raise ContractError(f"parameter range {param_range} is reversed")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    levels = _param_levels(problem, counts.n_param, strategy, rng, param_range)

    n_residual = counts.n_residual
    if strategy == "residual-adaptive" and residual_fn is not None and n_residual:
        candidates = _interior_coords(
            problem, candidate_factor * n_residual, "uniform", rng
        )
        pool = _attach(candidates, levels, rng)
        interior = adaptive_pick(pool, residual_fn(pool), n_residual, rng, exploration)
    else:
        if strategy == "residual-adaptive":
            logger.debug("no residual field yet, drawing residual points uniformly")
        coords = _interior_coords(problem, counts.n_residual, strategy, rng)
        interior = _attach(coords, levels, rng)

    boundary, boundary_targets = _conditions(
        problem, problem.boundary, counts.n_boundary, levels, rng
    )
    initial_conditions = (problem.initial,) if problem.initial is not None else ()
    initial, initial_targets = _conditions(
        problem, initial_conditions, counts.n_initial, levels, rng
    )
    return CollocationSet(
        interior, boundary, boundary_targets, initial, initial_targets, levels, strategy
    )


def resample_interior(
    problem: PdeProblem,
    collocation: CollocationSet,
    strategy: str,
    seed: int | np.random.Generator = 0,
    residual_fn: ResidualField | None = None,
    *,
    candidate_factor: int = 10,
    exploration: float = 0.1,
) -> CollocationSet:
    """Redraw the interior points over the existing parameter levels."""
    if strategy not in STRATEGIES:
        raise ConfigError(
            f"unknown sampling strategy {strategy!r}; expected {STRATEGIES}"
        )
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = collocation.interior.shape[0]
    levels = collocation.mu_levels
    if strategy == "residual-adaptive" and residual_fn is not None and n:
        pool = _attach(
            _interior_coords(problem, candidate_factor * n, "uniform", rng), levels, rng
        )
        interior = adaptive_pick(pool, residual_fn(pool), n, rng, exploration)
    else:
        interior = _attach(_interior_coords(problem, n, strategy, rng), levels, rng)
    return collocation.with_interior(interior)
