"""Discrete differential operators, boundary traces and weighted norms.

Fields are plain float (or complex) arrays shaped like ``grid.shape``;
operators that need neighbours on both sides return interior-node arrays
of shape ``(nt - 1,) + (nx - 1,) * n``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import (
    GridError,
    SpaceTimeGrid,
    as_direction,
    check_weight,
    integrate_lateral,
    integrate_slice,
    integrate_volume,
)


@dataclass(frozen=True)
class LateralTrace:
    """Values on ``(time node, facet)`` for a subset of the grid's facet table."""

    facets: np.ndarray
    values: np.ndarray

    def restrict(self, facet_set) -> "LateralTrace":
        pos = {int(f): k for k, f in enumerate(self.facets)}
        idx = [pos[int(f)] for f in facet_set]
        return LateralTrace(np.asarray(facet_set, dtype=int), self.values[:, idx])


def _shift(u: np.ndarray, axis: int, offset: int) -> np.ndarray:
    """Interior view of u displaced by ``offset`` along ``axis``."""
    idx = [slice(1, -1)] * u.ndim
    stop = u.shape[axis] - 1 + offset
    idx[axis] = slice(1 + offset, stop if stop != 0 else None)
    return u[tuple(idx)]


def second_difference(u: np.ndarray, axis: int, step: float) -> np.ndarray:
    return (_shift(u, axis, 1) - 2.0 * _shift(u, axis, 0) + _shift(u, axis, -1)) / step**2


def centered_difference(u: np.ndarray, axis: int, step: float) -> np.ndarray:
    return (_shift(u, axis, 1) - _shift(u, axis, -1)) / (2.0 * step)


def apply_box(grid: SpaceTimeGrid, u: np.ndarray) -> np.ndarray:
    """Centered d_t^2 - Laplacian on interior nodes."""
    u = grid.check_field(u)
    out = second_difference(u, 0, grid.dt)
    for a in range(1, grid.n_space + 1):
        out = out - second_difference(u, a, grid.h)
    return out


def apply_damped(grid: SpaceTimeGrid, u: np.ndarray, s: float, omega) -> np.ndarray:
    """Box + 2 s (d_t - omega . grad) with centered first differences."""
    omega = as_direction(omega, grid.n_space)
    out = apply_box(grid, u)
    if s == 0:
        return out
    drift = centered_difference(u, 0, grid.dt)
    for a in range(grid.n_space):
        drift = drift - omega[a] * centered_difference(u, a + 1, grid.h)
    return out + 2.0 * s * drift


def apply_wave(grid: SpaceTimeGrid, u: np.ndarray, q: np.ndarray) -> np.ndarray:
    """(Box + q) u on interior nodes."""
    return apply_box(grid, u) + interior(grid, q) * interior(grid, u)


def interior(grid: SpaceTimeGrid, u: np.ndarray) -> np.ndarray:
    return np.asarray(u)[grid.interior]


def neumann_trace(grid: SpaceTimeGrid, u: np.ndarray, facet_set=None) -> LateralTrace:
    """Outward normal derivative by the one-sided stencil (3u0 - 4u1 + u2) / 2h."""
    if grid.nx < 3:
        raise GridError("neumann trace needs nx >= 3")
    u = grid.check_field(u)
    ft = grid.facets
    if facet_set is None:
        facet_set = np.arange(ft.count)
    facet_set = np.asarray(facet_set, dtype=int)
    pick = lambda nodes: u[(slice(None),) + tuple(a[facet_set] for a in nodes)]
    vals = (3.0 * pick(ft.nodes) - 4.0 * pick(ft.inner1) + pick(ft.inner2)) / (2.0 * grid.h)
    return LateralTrace(facet_set, vals)


def dirichlet_trace(grid: SpaceTimeGrid, u: np.ndarray, facet_set=None) -> LateralTrace:
    u = grid.check_field(u)
    ft = grid.facets
    if facet_set is None:
        facet_set = np.arange(ft.count)
    facet_set = np.asarray(facet_set, dtype=int)
    vals = u[(slice(None),) + tuple(a[facet_set] for a in ft.nodes)]
    return LateralTrace(facet_set, np.array(vals))


def time_derivative_at(grid: SpaceTimeGrid, u: np.ndarray, m: int) -> np.ndarray:
    """Second-order one-sided d_t at the first or last time level."""
    u = grid.check_field(u)
    if m == 0:
        return (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * grid.dt)
    if m in (-1, grid.nt):
        return (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * grid.dt)
    return (u[m + 1] - u[m - 1]) / (2.0 * grid.dt)


def space_gradient(grid: SpaceTimeGrid, v: np.ndarray) -> list[np.ndarray]:
    v = grid.check_slice(v)
    return [np.gradient(v, grid.h, axis=a, edge_order=2) for a in range(grid.n_space)]


# ---------------------------------------------------------------- norms


def _abs2(u):
    u = np.asarray(u)
    return u.real**2 + u.imag**2 if np.iscomplexobj(u) else u * u


def norm_L2_Q(grid: SpaceTimeGrid, u) -> float:
    return float(np.sqrt(integrate_volume(grid, _abs2(u))))


def norm_interior(grid: SpaceTimeGrid, values) -> float:
    """Plain quadrature norm of an interior-node array (cell volume dt * h^n)."""
    return float(np.sqrt(np.sum(_abs2(values)) * grid.dt * grid.h**grid.n_space))


def norm_weighted(grid: SpaceTimeGrid, u, lam: float, omega, sign: int) -> float:
    """(int_Q exp(2 sign lam (t + omega.x)) |u|^2)^(1/2)."""
    check_weight(grid, lam)
    wgt = np.exp(sign * 2.0 * lam * grid.phase(omega))
    return float(np.sqrt(integrate_volume(grid, wgt * _abs2(u))))


def norm_slice_weighted(grid: SpaceTimeGrid, v, lam: float, omega, sign: int,
                        m: int = 0) -> float:
    """Weighted norm of a space slice taken at time level ``m``."""
    check_weight(grid, lam)
    wgt = np.exp(sign * 2.0 * lam * (grid.t[m] + grid.omega_dot_x(omega)))
    return float(np.sqrt(integrate_slice(grid, wgt * _abs2(v))))


def norm_lateral_weighted(grid: SpaceTimeGrid, trace: LateralTrace, lam: float, omega,
                          sign: int, h_weight=None) -> float:
    """Weighted lateral norm with an optional per-facet multiplier."""
    check_weight(grid, lam)
    omega = as_direction(omega, grid.n_space)
    ft = grid.facets
    f = trace.facets
    xdot = np.zeros(f.size)
    for a in range(grid.n_space):
        xdot += omega[a] * grid.x[ft.nodes[a][f]]
    wgt = np.exp(sign * 2.0 * lam * (grid.t[:, None] + xdot[None, :]))
    vals = wgt * _abs2(trace.values)
    if h_weight is not None:
        vals = vals * np.asarray(h_weight)[None, :]
    return float(np.sqrt(integrate_lateral(grid, vals, f)))
