"""Benchmark problem registry: domains, parameter ranges, conditions and oracles."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from errors import ConfigError
from pde import oracles
from pde.bundle import DerivativeBundle
from pde.residuals import residual_burgers, residual_heat, residual_ns

Sampler = Callable[[np.random.Generator, int], np.ndarray]
Oracle = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Condition:
    """A boundary or initial manifold with its target values.

    ``sampler`` draws coordinates on the manifold (without the parameter column);
    ``target`` maps full points (with the parameter column) to field values.
    """

    name: str
    sampler: Sampler
    target: Oracle


@dataclass(frozen=True)
class PdeProblem:
    name: str
    axes: tuple[str, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    fields: tuple[str, ...]
    param_name: str
    param_range: tuple[float, float]
    param_log: bool
    residual_fn: Callable[[DerivativeBundle, np.ndarray, np.ndarray], Sequence]
    boundary: tuple[Condition, ...]
    initial: Condition | None
    oracle: Oracle
    oracle_bundle: Callable[[np.ndarray], DerivativeBundle]
    is_transient: bool = False

    @property
    def spatial_dim(self) -> int:
        return len(self.axes) - int(self.is_transient)

    @property
    def input_dim(self) -> int:
        return len(self.axes) + 1

    @property
    def output_dim(self) -> int:
        return len(self.fields)

    @property
    def input_lo(self) -> np.ndarray:
        return np.array(self.lower + (self.param_range[0],))

    @property
    def input_hi(self) -> np.ndarray:
        return np.array(self.upper + (self.param_range[1],))

    @property
    def log_axes(self) -> tuple[bool, ...]:
        return (False,) * len(self.axes) + (self.param_log,)

    @property
    def columns(self) -> list[str]:
        return list(self.axes) + [self.param_name]

    def residual(self, bundle: DerivativeBundle, points: np.ndarray) -> list:
        """Pointwise residual components; ``points`` ends with the parameter column."""
        out = self.residual_fn(bundle, points, points[:, -1])
        return list(out) if isinstance(out, tuple) else [out]


def _uniform_box(lower: Sequence[float], upper: Sequence[float]) -> Sampler:
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)

    def sample(rng: np.random.Generator, n: int) -> np.ndarray:
        # open on both sides so interior draws never touch the boundary
        return rng.uniform(np.nextafter(lower, upper), upper, size=(n, len(lower)))

    return sample


def _face(lower, upper, axis: int, value: float) -> Sampler:
    inner = _uniform_box(lower, upper)

    def sample(rng: np.random.Generator, n: int) -> np.ndarray:
        pts = inner(rng, n)
        pts[:, axis] = value
        return pts

    return sample


def _zeros(width: int) -> Oracle:
    return lambda points: np.zeros((np.atleast_2d(points).shape[0], width))


def burgers_problem() -> PdeProblem:
    lower, upper = (-1.0, 0.0), (1.0, 1.0)
    return PdeProblem(
        name="burgers",
        axes=("x", "t"),
        lower=lower,
        upper=upper,
        fields=("u",),
        param_name="nu",
        param_range=(0.001, 0.1),
        param_log=True,
        residual_fn=residual_burgers,
        boundary=(
            Condition("x=-1", _face(lower, upper, 0, -1.0), _zeros(1)),
            Condition("x=1", _face(lower, upper, 0, 1.0), _zeros(1)),
        ),
        initial=Condition(
            "t=0",
            _face(lower, upper, 1, 0.0),
            lambda p: -np.sin(np.pi * np.atleast_2d(p)[:, :1]),
        ),
        oracle=oracles.burgers_oracle,
        oracle_bundle=oracles.burgers_oracle_bundle,
        is_transient=True,
    )


def heat_problem() -> PdeProblem:
    lower, upper = (0.0, 0.0), (1.0, 1.0)
    return PdeProblem(
        name="heat",
        axes=("x", "y"),
        lower=lower,
        upper=upper,
        fields=("u",),
        param_name="k",
        param_range=(0.1, 10.0),
        param_log=True,
        residual_fn=lambda b, p, k: residual_heat(b, p, k, oracles.heat_source),
        boundary=tuple(
            Condition(f"{axis}={value:g}", _face(lower, upper, i, value), _zeros(1))
            for i, axis in enumerate(("x", "y"))
            for value in (0.0, 1.0)
        ),
        initial=None,
        oracle=oracles.heat_oracle,
        oracle_bundle=oracles.heat_oracle_bundle,
    )


def navier_stokes_problem() -> PdeProblem:
    lower, upper = (0.0, 0.0, 0.0), (2 * np.pi, 2 * np.pi, 1.0)
    return PdeProblem(
        name="navier_stokes",
        axes=("x", "y", "t"),
        lower=lower,
        upper=upper,
        fields=("u", "v", "p"),
        param_name="Re",
        param_range=(20.0, 100.0),
        param_log=False,
        residual_fn=lambda b, p, re: residual_ns(b, p, 1.0 / re),
        boundary=tuple(
            Condition(
                f"{axis}={value:.3g}",
                _face(lower, upper, i, value),
                oracles.taylor_green,
            )
            for i, axis in enumerate(("x", "y"))
            for value in (0.0, 2 * np.pi)
        ),
        initial=Condition("t=0", _face(lower, upper, 2, 0.0), oracles.taylor_green),
        oracle=oracles.taylor_green,
        oracle_bundle=oracles.taylor_green_bundle,
        is_transient=True,
    )


PROBLEMS: dict[str, Callable[[], PdeProblem]] = {
    "burgers": burgers_problem,
    "heat": heat_problem,
    "navier_stokes": navier_stokes_problem,
}


def get_problem(name: str) -> PdeProblem:
    try:
        return PROBLEMS[name]()
    except KeyError:
        raise ConfigError(
            f"unknown problem {name!r}; expected one of {sorted(PROBLEMS)}"
        ) from None
