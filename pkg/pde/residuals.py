"""Strong-form residual operators.

Each operator takes a :class:`~pde.bundle.DerivativeBundle`, the query points and
the physical parameter, and returns the pointwise residual (one array per equation
for systems).
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from pde.bundle import DerivativeBundle

SourceFn = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def residual_burgers(bundle: DerivativeBundle, points: np.ndarray, nu):
    """``u_t + u u_x - nu u_xx``."""
    return bundle["u_t"] + bundle["u"] * bundle["u_x"] - nu * bundle["u_xx"]


def residual_heat(bundle: DerivativeBundle, points: np.ndarray, k, source: SourceFn):
    """``-k (u_xx + u_yy) - f(x, y; k)``."""
    x, y = points[:, 0], points[:, 1]
    return -k * (bundle["u_xx"] + bundle["u_yy"]) - source(x, y, k)


def residual_ns(bundle: DerivativeBundle, points: np.ndarray, nu):
    """Incompressible Navier-Stokes in velocity-pressure form.

    Returns the x-momentum, y-momentum and continuity residuals.
    """
    u, v = bundle["u"], bundle["v"]
    momentum_x = (
        bundle["u_t"]
        + u * bundle["u_x"]
        + v * bundle["u_y"]
        + bundle["p_x"]
        - nu * (bundle["u_xx"] + bundle["u_yy"])
    )
    momentum_y = (
        bundle["v_t"]
        + u * bundle["v_x"]
        + v * bundle["v_y"]
        + bundle["p_y"]
        - nu * (bundle["v_xx"] + bundle["v_yy"])
    )
    continuity = bundle["u_x"] + bundle["v_y"]
    return momentum_x, momentum_y, continuity
