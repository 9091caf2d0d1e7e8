"""Explicit finite-difference solver for the viscous Burgers equation."""

from __future__ import annotations

import logging
import math
import time

import numpy as np

from errors import ConfigError, ContractError, NumericError
from solvers.grid import GridSolution

logger = logging.getLogger(__name__)

HF_POINTS = 512
LF_POINTS = 32
SAFETY = 0.9


def stability_bounds(nu: float, dx: float, u_max: float) -> dict[str, float]:
    """Largest stable forward-Euler steps for the diffusive and combined terms."""
    return {
        "diffusion dt <= dx^2 / (2 nu)": dx * dx / (2.0 * nu),
        "advection-diffusion dt <= 1 / (2 nu / dx^2 + |u|max / dx)": 1.0
        / (2.0 * nu / (dx * dx) + u_max / dx),
    }


def _step(u: np.ndarray, nu: float, dx: float, dt: float) -> np.ndarray:
    ui, up, um = u[1:-1], u[2:], u[:-2]
    diffusion = nu * (up - 2.0 * ui + um) / (dx * dx)
    central = ui * (up - um) / (2.0 * dx)
    upwind = np.where(ui > 0.0, ui * (ui - um) / dx, ui * (up - ui) / dx)
    # central differencing only where the cell Peclet number keeps it monotone
    advection = np.where(np.abs(ui) * dx / nu < 2.0, central, upwind)
    out = np.empty_like(u)
    out[1:-1] = ui + dt * (diffusion - advection)
    out[0] = out[-1] = 0.0
    return out


def solve_burgers_fd(
    nu: float,
    nx: int = HF_POINTS,
    nt: int | None = None,
    *,
    u0: np.ndarray | None = None,
    t_final: float = 1.0,
    n_snapshots: int = 101,
    fidelity: str = "HF",
) -> GridSolution:
    """Integrate ``u_t + u u_x = nu u_xx`` on ``[-1, 1] x [0, t_final]``.

    Dirichlet zero boundaries, ``u(x, 0) = -sin(pi x)`` unless ``u0`` is given.
    With ``nt=None`` the step count is chosen from the stability bound; an explicit
    ``nt`` that violates it raises :class:`ConfigError`. ``n_snapshots`` evenly
    spaced time levels are kept.
    """
    if nu <= 0:
        raise ContractError(f"viscosity must be positive, got {nu}")
    if nx < 8:
        raise ContractError(f"need at least 8 grid points, got {nx}")
    if n_snapshots < 2:
        raise ContractError("need at least two snapshots")

    x = np.linspace(-1.0, 1.0, nx)
    dx = x[1] - x[0]
    u = -np.sin(np.pi * x) if u0 is None else np.asarray(u0, dtype=float).copy()
    if u.shape != x.shape:
        raise ContractError(
            f"initial condition has shape {u.shape}, grid has {x.shape}"
        )
    u[0] = u[-1] = 0.0

    bounds = stability_bounds(nu, dx, max(float(np.abs(u).max()), 1e-12))
    dt_max = min(bounds.values())
    intervals = n_snapshots - 1
    if nt is None:
        nt = math.ceil(t_final / (SAFETY * dt_max))
        nt = intervals * math.ceil(nt / intervals)
    elif nt < 1:
        raise ContractError(f"nt must be positive, got {nt}")
    dt = t_final / nt
    for name, limit in bounds.items():
        if dt > limit:
            raise ConfigError(
                f"time step {dt:.3e} violates the stability bound {name} = {limit:.3e}"
            )

    save_at = np.round(np.linspace(0, nt, n_snapshots)).astype(int)
    snapshots = np.empty((nx, n_snapshots))
    snapshots[:, 0] = u
    started = time.perf_counter()
    slot = 1
    for step in range(1, nt + 1):
        u = _step(u, nu, dx, dt)
        while slot < n_snapshots and save_at[slot] == step:
            snapshots[:, slot] = u
            slot += 1
    if not np.all(np.isfinite(snapshots)):
        raise NumericError(f"Burgers solution blew up for nu={nu}, nx={nx}, nt={nt}")
    runtime = time.perf_counter() - started
    logger.info(f"Burgers FD nu={nu:.4g} nx={nx} nt={nt} finished in {runtime:.2f}s")

    return GridSolution(
        axes={"x": x, "t": save_at * dt},
        fields={"u": snapshots},
        mu=float(nu),
        param_name="nu",
        fidelity=fidelity,
        metadata={
            "scheme": "hybrid-upwind",
            "nx": nx,
            "nt": nt,
            "dt": dt,
            "runtime_s": runtime,
        },
    )
