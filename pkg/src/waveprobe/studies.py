"""Refinement studies and lambda ladders shared by the CLI and the test suite."""

from __future__ import annotations

import math

import numpy as np

from .fields import norm_L2_Q
from .go import build_decaying_go, go_residual, project_xi
from .grid import SpaceTimeGrid, cfl_nt, default_control_sets, make_grid
from .ibvp import IbvpProblem, lateral_values, solve_ibvp
from .inversion import identity_check, run_probe


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of log(ys) against log(xs)."""
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    if xs.size < 2 or np.any(xs <= 0) or np.any(ys <= 0):
        return math.nan
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def ladder_grid(n_space: int, T: float, L: float, nx: int, lam: float, steps_per_lambda: int = 16,
                nx_per_lambda: int = 0, cfl_safety: float = 1.0) -> SpaceTimeGrid:
    """Grid for one rung of a lambda ladder: dt ~ 1/lam, optionally h ~ 1/lam too."""
    if nx_per_lambda:
        nx = int(round(nx_per_lambda * lam))
    nt = max(cfl_nt(n_space, T, L, nx, cfl_safety), int(math.ceil(steps_per_lambda * lam)))
    return make_grid(n_space, T, L, nt, nx, cfl_safety)


def exact_polynomial_error(grid: SpaceTimeGrid, backend=None) -> float:
    """Max error for u = t^2 + x_1^2, which the scheme reproduces exactly."""
    x1 = grid.space_coords[0]
    exact = grid.time_column() ** 2 + x1[None] ** 2
    g = lateral_values(grid, lambda t, x1, *rest: t**2 + x1**2)
    u = solve_ibvp(IbvpProblem(grid, dirichlet=g, u0=exact[0]), backend=backend)
    return float(np.max(np.abs(u - exact)))


def standing_wave_error(grid: SpaceTimeGrid, backend=None) -> float:
    """Relative L2(Q) error for u = sin(pi x_1) cos(pi t / L) scaled to the box."""
    k = math.pi / grid.L
    x1 = grid.space_coords[0]
    exact = np.cos(k * grid.time_column()) * np.sin(k * x1)[None]
    g = lateral_values(grid, lambda t, x1, *rest: np.cos(k * t) * np.sin(k * x1))
    u = solve_ibvp(IbvpProblem(grid, dirichlet=g, u0=exact[0]), backend=backend)
    return norm_L2_Q(grid, u - exact) / norm_L2_Q(grid, exact)


def forward_study(nx_list, n_space: int = 2, T: float = 1.0, L: float = 1.0, backend=None):
    """(nx, nt, error) rows for the standing wave with dt/h fixed at 1/2."""
    rows = []
    for nx in nx_list:
        grid = make_grid(n_space, T, L, 2 * nx * int(math.ceil(T / L)), nx)
        rows.append((nx, grid.nt, standing_wave_error(grid, backend)))
    return rows


def identity_study(nx_list, q_fn, lam: float = 8.0, xi_raw=(0.0, 0.0, math.pi / 2),
                   omega0=(1.0, 0.0), epsilon: float = 0.1, T: float = 1.0, L: float = 1.0,
                   backend=None):
    """(nx, nt, mismatch) rows of the integral identity with q1 = 0, q2 = q_fn(grid)."""
    rows = []
    for nx in nx_list:
        grid = make_grid(len(omega0), T, L, 2 * nx, nx)
        ctrl = default_control_sets(grid, omega0, epsilon)
        xi = project_xi(xi_raw, ctrl.omega0)
        exp = run_probe(grid, None, q_fn(grid), lam, ctrl.omega0, xi, ctrl, backend=backend)
        rows.append((nx, grid.nt, identity_check(exp).mismatch))
    return rows


def decaying_study(nx_list, q_fn, lam: float = 4.0, xi_raw=(0.0, 0.0, math.pi / 2),
                   omega=(1.0, 0.0), T: float = 1.0, L: float = 1.0, backend=None):
    """(nx, nt, residual) rows: the decaying probe's equation residual under refinement."""
    rows = []
    for nx in nx_list:
        grid = make_grid(len(omega), T, L, max(2 * nx, int(16 * lam)), nx)
        q = q_fn(grid)
        sol = build_decaying_go(grid, q, lam, omega, project_xi(xi_raw, omega), backend=backend)
        rows.append((nx, grid.nt, go_residual(grid, sol.field, q)))
    return rows


def observed_order(rows) -> float:
    """Order p in error ~ h^p from (nx, nt, error) rows."""
    return -loglog_slope([r[0] for r in rows], [r[2] for r in rows])
