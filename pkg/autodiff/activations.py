"""Activation families with closed-form derivatives up to third order."""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy.special import expit

from errors import ConfigError, ContractError

MAX_ORDER = 3

ActivationFamily = Callable[[np.ndarray, int], np.ndarray]


def _check_order(order: int) -> None:
    if not 0 <= order <= MAX_ORDER:
        raise ContractError(f"activation derivative order {order} not in [0, 3]")


def tanh(z: np.ndarray, order: int = 0) -> np.ndarray:
    _check_order(order)
    t = np.tanh(z)
    if order == 0:
        return t
    s1 = 1.0 - t * t
    if order == 1:
        return s1
    if order == 2:
        return -2.0 * t * s1
    return -2.0 * s1 * (1.0 - 3.0 * t * t)


def sigmoid(z: np.ndarray, order: int = 0) -> np.ndarray:
    _check_order(order)
    s = expit(z)
    if order == 0:
        return s
    s1 = s * (1.0 - s)
    if order == 1:
        return s1
    s2 = s1 * (1.0 - 2.0 * s)
    if order == 2:
        return s2
    return s2 * (1.0 - 2.0 * s) - 2.0 * s1 * s1


def sin(z: np.ndarray, order: int = 0) -> np.ndarray:
    _check_order(order)
    return (np.sin, np.cos, lambda v: -np.sin(v), lambda v: -np.cos(v))[order](z)


def relu(z: np.ndarray, order: int = 0) -> np.ndarray:
    _check_order(order)
    if order == 0:
        return np.maximum(z, 0.0)
    if order == 1:
        return (z > 0.0).astype(float)
    return np.zeros_like(z, dtype=float)


def identity(z: np.ndarray, order: int = 0) -> np.ndarray:
    _check_order(order)
    if order == 0:
        return np.asarray(z, dtype=float)
    if order == 1:
        return np.ones_like(z, dtype=float)
    return np.zeros_like(z, dtype=float)


def log(z: np.ndarray, order: int = 0) -> np.ndarray:
    """Natural log, used to map log-scaled parameters onto the network input."""
    _check_order(order)
    if order == 0:
        return np.log(z)
    return (1.0 / z, -1.0 / (z * z), 2.0 / (z * z * z))[order - 1]


ACTIVATIONS: dict[str, ActivationFamily] = {
    "tanh": tanh,
    "sigmoid": sigmoid,
    "sin": sin,
    "relu": relu,
    "identity": identity,
}

# second derivative vanishes identically, so jets can skip the outer-product term
PIECEWISE_LINEAR = frozenset({"relu", "identity"})


def get_activation(name: str) -> ActivationFamily:
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ConfigError(
            f"unknown activation {name!r}; expected one of {sorted(ACTIVATIONS)}"
        ) from None
