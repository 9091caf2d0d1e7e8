"""Reference solutions used for ground truth and oracle consistency checks."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_hermite

from pde.bundle import DerivativeBundle

HERMITE_NODES = 400


@lru_cache(maxsize=4)
def _hermite_rule(n_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = roots_hermite(n_nodes)
    keep = weights > 0
    return nodes[keep], np.log(weights[keep])


def cole_hopf_burgers(
    x, t, nu, n_nodes: int = HERMITE_NODES
) -> dict[str, np.ndarray]:
    """Exact viscous Burgers solution for ``u(x, 0) = -sin(pi x)`` on ``[-1, 1]``.

    The Cole-Hopf transform gives ``u = -2 nu phi_x / phi`` where ``phi`` solves the
    heat equation with ``phi(x, 0) = exp(-cos(pi x) / (2 pi nu))``. The heat-kernel
    integral is evaluated with Gauss-Hermite quadrature in log-sum-exp form, so the
    ratios stay finite for small ``nu``. Returns ``u``, ``u_x``, ``u_xx`` and ``u_t``.
    """
    x, t, nu = np.broadcast_arrays(
        *(np.asarray(value, dtype=float) for value in (x, t, nu))
    )
    shape = x.shape
    x, t, nu = x.reshape(-1, 1), t.reshape(-1, 1), nu.reshape(-1, 1)
    nodes, log_weights = _hermite_rule(n_nodes)

    y = x - np.sqrt(4.0 * nu * t) * nodes[None, :]
    g = -np.cos(np.pi * y) / (2.0 * np.pi * nu)
    g1 = np.sin(np.pi * y) / (2.0 * nu)
    g2 = np.pi * np.cos(np.pi * y) / (2.0 * nu)
    g3 = -np.pi**2 * np.sin(np.pi * y) / (2.0 * nu)

    a = g + log_weights[None, :]
    w = np.exp(a - a.max(axis=1, keepdims=True))
    phi0 = w.sum(axis=1)
    r1 = (w * g1).sum(axis=1) / phi0
    r2 = (w * (g2 + g1 * g1)).sum(axis=1) / phi0
    r3 = (w * (g3 + 3.0 * g1 * g2 + g1**3)).sum(axis=1) / phi0

    nu = nu[:, 0]
    return {
        "u": (-2.0 * nu * r1).reshape(shape),
        "u_x": (-2.0 * nu * (r2 - r1 * r1)).reshape(shape),
        "u_xx": (-2.0 * nu * (r3 - 3.0 * r1 * r2 + 2.0 * r1**3)).reshape(shape),
        "u_t": (-2.0 * nu * nu * (r3 - r1 * r2)).reshape(shape),
    }


def burgers_oracle(points: np.ndarray) -> np.ndarray:
    pts = np.atleast_2d(points)
    return cole_hopf_burgers(pts[:, 0], pts[:, 1], pts[:, 2])["u"][:, None]


def burgers_oracle_bundle(points: np.ndarray) -> DerivativeBundle:
    pts = np.atleast_2d(points)
    return DerivativeBundle(cole_hopf_burgers(pts[:, 0], pts[:, 1], pts[:, 2]))


def heat_source(x, y, k):
    return 2.0 * k * np.pi**2 * np.sin(np.pi * x) * np.sin(np.pi * y)


def heat_oracle(points: np.ndarray) -> np.ndarray:
    pts = np.atleast_2d(points)
    return (np.sin(np.pi * pts[:, 0]) * np.sin(np.pi * pts[:, 1]))[:, None]


def heat_oracle_bundle(points: np.ndarray) -> DerivativeBundle:
    pts = np.atleast_2d(points)
    sx, cx = np.sin(np.pi * pts[:, 0]), np.cos(np.pi * pts[:, 0])
    sy, cy = np.sin(np.pi * pts[:, 1]), np.cos(np.pi * pts[:, 1])
    lap = -np.pi**2 * sx * sy
    return DerivativeBundle(
        {
            "u": sx * sy,
            "u_x": np.pi * cx * sy,
            "u_y": np.pi * sx * cy,
            "u_xx": lap,
            "u_yy": lap,
            "u_xy": np.pi**2 * cx * cy,
        }
    )


def taylor_green(points: np.ndarray) -> np.ndarray:
    """Decaying Taylor-Green vortex ``(u, v, p)`` at ``(x, y, t, Re)``."""
    b = taylor_green_bundle(points)
    return np.stack([b["u"], b["v"], b["p"]], axis=1)


def taylor_green_bundle(points: np.ndarray) -> DerivativeBundle:
    pts = np.atleast_2d(points)
    x, y, t, re = pts[:, 0], pts[:, 1], pts[:, 2], pts[:, 3]
    nu = 1.0 / re
    decay = np.exp(-2.0 * nu * t)
    sx, cx, sy, cy = np.sin(x), np.cos(x), np.sin(y), np.cos(y)
    pdecay = decay * decay
    u = cx * sy * decay
    v = -sx * cy * decay
    p = -0.25 * (np.cos(2 * x) + np.cos(2 * y)) * pdecay
    return DerivativeBundle(
        {
            "u": u,
            "v": v,
            "p": p,
            "u_t": -2.0 * nu * u,
            "v_t": -2.0 * nu * v,
            "u_x": -sx * sy * decay,
            "u_y": cx * cy * decay,
            "v_x": -cx * cy * decay,
            "v_y": sx * sy * decay,
            "u_xx": -u,
            "u_yy": -u,
            "v_xx": -v,
            "v_yy": -v,
            "p_x": 0.5 * np.sin(2 * x) * pdecay,
            "p_y": 0.5 * np.sin(2 * y) * pdecay,
        }
    )
