"""Batched second-order forward jets carried through network layers.

A :class:`Scalar2` holds, for ``N`` points and ``W`` features, the values together
with first and second derivatives with respect to ``K`` tracked input coordinates:

* ``value`` has shape ``(N, W)``
* ``d1`` has shape ``(N, K, W)``
* ``d2`` has shape ``(N, K, K, W)`` and is symmetric in the two ``K`` axes

Each component is a :class:`~autodiff.tape.Tensor`, so when network weights are
watched on a tape the parameter gradient of any derivative comes for free.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from autodiff.activations import PIECEWISE_LINEAR, ActivationFamily, get_activation
from autodiff.tape import Tensor, as_tensor, concat as concat_tensors, elementwise
from errors import ContractError


@dataclass(frozen=True)
class Scalar2:
    value: Tensor
    d1: Tensor
    d2: Tensor

    @property
    def n_points(self) -> int:
        return self.value.shape[0]

    @property
    def width(self) -> int:
        return self.value.shape[-1]

    @property
    def n_tracked(self) -> int:
        return self.d1.shape[1]

    def all_finite(self) -> bool:
        return bool(
            np.isfinite(self.value.data).all()
            and np.isfinite(self.d1.data).all()
            and np.isfinite(self.d2.data).all()
        )


def lift_inputs(points, tracked: Sequence[int]) -> Scalar2:
    """Seed a jet at ``points`` with unit tangents on the ``tracked`` coordinates.

    A single point of shape ``(D,)`` is treated as a batch of one.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n_points, dim = pts.shape
    tracked = tuple(int(i) for i in tracked)
    if len(set(tracked)) != len(tracked):
        raise ContractError(f"tracked coordinates must be distinct, got {tracked}")
    for index in tracked:
        if not 0 <= index < dim:
            raise ContractError(
                f"tracked coordinate {index} out of range for {dim}-d input"
            )

    n_tracked = len(tracked)
    d1 = np.zeros((n_points, n_tracked, dim))
    for k, index in enumerate(tracked):
        d1[:, k, index] = 1.0
    d2 = np.zeros((n_points, n_tracked, n_tracked, dim))
    return Scalar2(Tensor(pts), Tensor(d1), Tensor(d2))


def affine(x: Scalar2, weight, bias) -> Scalar2:
    weight = as_tensor(weight)
    return Scalar2(x.value @ weight + bias, x.d1 @ weight, x.d2 @ weight)


def _expand_points(t: Tensor, extra: int) -> Tensor:
    n_points, width = t.shape
    return t.reshape((n_points,) + (1,) * extra + (width,))


def apply(x: Scalar2, family: ActivationFamily, second_order: bool = True) -> Scalar2:
    """Push an elementwise function with derivative family ``family`` through ``x``."""
    s1 = elementwise(x.value, family, 1)
    d1 = _expand_points(s1, 1) * x.d1
    d2 = _expand_points(s1, 2) * x.d2
    if second_order and x.n_tracked:
        s2 = elementwise(x.value, family, 2)
        n_points, n_tracked, width = x.d1.shape
        left = x.d1.reshape((n_points, n_tracked, 1, width))
        right = x.d1.reshape((n_points, 1, n_tracked, width))
        d2 = d2 + _expand_points(s2, 2) * (left * right)
    return Scalar2(elementwise(x.value, family, 0), d1, d2)


def activate(x: Scalar2, name: str) -> Scalar2:
    if name == "identity":
        return x
    return apply(x, get_activation(name), second_order=name not in PIECEWISE_LINEAR)


def add(a: Scalar2, b: Scalar2) -> Scalar2:
    return Scalar2(a.value + b.value, a.d1 + b.d1, a.d2 + b.d2)


def sub(a: Scalar2, b: Scalar2) -> Scalar2:
    return Scalar2(a.value - b.value, a.d1 - b.d1, a.d2 - b.d2)


def scale(a: Scalar2, factor) -> Scalar2:
    """Multiply by a constant per-feature ``factor`` (scalar or shape ``(W,)``)."""
    factor = np.asarray(factor, dtype=float)
    return Scalar2(a.value * factor, a.d1 * factor, a.d2 * factor)


def shift(a: Scalar2, offset) -> Scalar2:
    return Scalar2(a.value + np.asarray(offset, dtype=float), a.d1, a.d2)


def mul(a: Scalar2, b: Scalar2) -> Scalar2:
    """Product rule; ``b`` may have width 1 and broadcast over ``a``'s features."""
    value = a.value * b.value
    d1 = a.d1 * _expand_points(b.value, 1) + _expand_points(a.value, 1) * b.d1
    n_points, n_tracked, wa = a.d1.shape
    wb = b.d1.shape[-1]
    cross = a.d1.reshape((n_points, n_tracked, 1, wa)) * b.d1.reshape(
        (n_points, 1, n_tracked, wb)
    )
    cross_t = a.d1.reshape((n_points, 1, n_tracked, wa)) * b.d1.reshape(
        (n_points, n_tracked, 1, wb)
    )
    d2 = (
        a.d2 * _expand_points(b.value, 2)
        + _expand_points(a.value, 2) * b.d2
        + cross
        + cross_t
    )
    return Scalar2(value, d1, d2)


def one_minus(a: Scalar2) -> Scalar2:
    return Scalar2(1.0 - a.value, -a.d1, -a.d2)


def concat(jets: Sequence[Scalar2]) -> Scalar2:
    return Scalar2(
        concat_tensors([j.value for j in jets], axis=-1),
        concat_tensors([j.d1 for j in jets], axis=-1),
        concat_tensors([j.d2 for j in jets], axis=-1),
    )


def select(a: Scalar2, columns) -> Scalar2:
    """Keep the feature columns given by an index, slice or index list."""
    if isinstance(columns, (int, np.integer)):
        columns = slice(int(columns), int(columns) + 1)
    return Scalar2(a.value[:, columns], a.d1[..., columns], a.d2[..., columns])


def constant(values) -> Scalar2:
    """A jet with zero derivatives and no tracked coordinates."""
    value = np.atleast_2d(np.asarray(values, dtype=float))
    n_points, width = value.shape
    return Scalar2(
        Tensor(value),
        Tensor(np.zeros((n_points, 0, width))),
        Tensor(np.zeros((n_points, 0, 0, width))),
    )
