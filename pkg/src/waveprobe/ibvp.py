"""Leapfrog solvers for the wave IBVP, its damped conjugates, and the boundary map.

The forward problem is

    d_t^2 u - Lap u + 2 s (d_t u - omega . grad u) + q u = f   in Q,
    u(0) = u0,  d_t u(0) = v1,  u = g on the lateral boundary,

marched with centered differences. s = 0 gives the plain wave equation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .fields import LateralTrace, dirichlet_trace, neumann_trace, second_difference
from .grid import ControlSets, GridError, SpaceTimeGrid, as_direction, integrate_slice

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


class InstabilityError(SolverError):
    def __init__(self, level: int):
        super().__init__(f"non-finite values first appear at time level {level}")
        self.level = level


@dataclass
class IbvpProblem:
    """Data for one IBVP on ``grid``; ``None`` entries mean zero.

    ``dirichlet`` holds values for every entry of the grid's facet table,
    shape ``(nt + 1, grid.facets.count)``.
    """

    grid: SpaceTimeGrid
    q: np.ndarray | None = None
    rhs: np.ndarray | None = None
    dirichlet: np.ndarray | None = None
    u0: np.ndarray | None = None
    v1: np.ndarray | None = None

    def __post_init__(self):
        g = self.grid
        if self.q is not None:
            g.check_field(self.q, "q")
        if self.rhs is not None:
            g.check_field(self.rhs, "rhs")
        if self.u0 is not None:
            g.check_slice(self.u0, "u0")
        if self.v1 is not None:
            g.check_slice(self.v1, "v1")
        if self.dirichlet is not None:
            d = np.asarray(self.dirichlet, dtype=float)
            if d.shape != (g.nt + 1, g.facets.count):
                raise GridError(f"dirichlet shape {d.shape} != {(g.nt + 1, g.facets.count)}")
            _check_corners(g, d)
            u0 = np.zeros(g.space_shape) if self.u0 is None else self.u0
            edge = dirichlet_trace_slice(g, u0)
            scale = max(1.0, float(np.max(np.abs(d[0]))))
            if np.max(np.abs(edge - d[0])) > 1e-10 * scale:
                raise GridError("incompatible data: u0 differs from dirichlet at t=0")

    @property
    def q_max(self) -> float:
        return 0.0 if self.q is None else float(np.max(np.abs(self.q)))


def dirichlet_trace_slice(grid: SpaceTimeGrid, v: np.ndarray) -> np.ndarray:
    return v[tuple(a for a in grid.facets.nodes)]


def _check_corners(grid: SpaceTimeGrid, d: np.ndarray) -> None:
    if grid.n_space == 1:
        return
    flat = np.ravel_multi_index(grid.facets.nodes, grid.space_shape)
    order = np.argsort(flat, kind="stable")
    fs = flat[order]
    dup = np.flatnonzero(fs[1:] == fs[:-1])
    if dup.size:
        a, b = d[:, order[dup]], d[:, order[dup + 1]]
        scale = max(1.0, float(np.max(np.abs(d))))
        if np.max(np.abs(a - b)) > 1e-10 * scale:
            raise GridError("dirichlet data disagree at shared corner nodes")


def lateral_values(grid: SpaceTimeGrid, fn) -> np.ndarray:
    """Evaluate ``fn(t, x_1, ..., x_n)`` on every (time level, facet) pair."""
    xs = [grid.x[a][None, :] for a in grid.facets.nodes]
    vals = np.asarray(fn(grid.t[:, None], *xs), dtype=float)
    return np.broadcast_to(vals, (grid.nt + 1, grid.facets.count)).copy()


def _laplacian_slice(grid: SpaceTimeGrid, v: np.ndarray) -> np.ndarray:
    out = np.zeros(tuple(n - 2 for n in v.shape))
    for a in range(grid.n_space):
        out += _second_diff_slice(v, a, grid.h)
    return out


def _second_diff_slice(v, axis, h):
    pad = np.expand_dims(v, 0)
    pad = np.concatenate([pad, pad, pad])
    return second_difference(pad, axis + 1, h)[0]


def _centered_slice(v, axis, h):
    idx_p = [slice(1, -1)] * v.ndim
    idx_m = [slice(1, -1)] * v.ndim
    idx_p[axis] = slice(2, None)
    idx_m[axis] = slice(0, -2)
    return (v[tuple(idx_p)] - v[tuple(idx_m)]) / (2.0 * h)


def _march(grid, q, f, g, u0, v1, s, omega, backend):
    dt = grid.dt
    kern = kernels.get_backend(backend)
    nodes = grid.facets.nodes
    u = np.zeros(grid.shape)
    zero_slice = np.zeros(grid.space_shape)
    q = zero_slice[None].repeat(grid.nt + 1, 0) if q is None else np.ascontiguousarray(q, float)
    f = zero_slice[None].repeat(grid.nt + 1, 0) if f is None else np.ascontiguousarray(f, float)
    u0 = zero_slice if u0 is None else np.asarray(u0, float)
    v1 = zero_slice if v1 is None else np.asarray(v1, float)

    u[0] = u0
    inner = (slice(1, -1),) * grid.n_space
    acc = _laplacian_slice(grid, u0)
    for a in range(grid.n_space):
        acc += 2.0 * s * omega[a] * _centered_slice(u0, a, grid.h)
    acc += -2.0 * s * v1[inner] - q[0][inner] * u0[inner] + f[0][inner]
    u[1][inner] = u0[inner] + dt * v1[inner] + 0.5 * dt * dt * acc
    if g is not None:
        u[0][nodes] = g[0]
        u[1][nodes] = g[1]

    step = kern.damped_step_1d if grid.n_space == 1 else kern.damped_step_2d
    w = tuple(float(c) for c in omega)
    for m in range(1, grid.nt):
        step(u[m - 1], u[m], q[m], f[m], float(s), *w, dt, grid.h, u[m + 1])
        if g is not None:
            u[m + 1][nodes] = g[m + 1]
        if m % 32 == 0 and not np.isfinite(u[m + 1]).all():
            break
    if not np.isfinite(u).all():
        bad = np.flatnonzero(~np.isfinite(u.reshape(grid.nt + 1, -1)).all(axis=1))
        raise InstabilityError(int(bad[0]))
    return u


def solve_damped_ibvp(problem: IbvpProblem, s: float, omega, *, direction: str = "forward",
                      backend: str | None = None) -> np.ndarray:
    """March d_t^2 u - Lap u + 2 s (d_t - omega.grad) u + q u = f.

    With ``direction="backward"`` the fields ``u0``/``v1`` of ``problem`` are
    read as the final value and final velocity at t = T and the march runs
    from T down to 0.
    """
    grid = problem.grid
    omega = as_direction(omega, grid.n_space)
    if abs(s) * grid.dt >= 1.0:
        raise GridError(f"|s| * dt = {abs(s) * grid.dt:.4g} must be < 1")
    q, f, g = problem.q, problem.rhs, problem.dirichlet
    if direction == "forward":
        return _march(grid, q, f, g, problem.u0, problem.v1, s, omega, backend)
    if direction != "backward":
        raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")
    rev = lambda a: None if a is None else np.ascontiguousarray(np.asarray(a)[::-1])
    v = None if problem.v1 is None else -np.asarray(problem.v1)
    u = _march(grid, rev(q), rev(f), rev(g), problem.u0, v, -s, -omega, backend)
    return np.ascontiguousarray(u[::-1])


def solve_ibvp(problem: IbvpProblem, backend: str | None = None) -> np.ndarray:
    """Leapfrog for d_t^2 u - Lap u + q u = f with Dirichlet and Cauchy data."""
    e1 = np.zeros(problem.grid.n_space)
    e1[0] = 1.0
    return solve_damped_ibvp(problem, 0.0, e1, backend=backend)


# ---------------------------------------------------------------- boundary map


@dataclass
class BoundaryDataset:
    """One point (g, v1) -> (d_nu u on G, u(T)) of the graph of the boundary map."""

    grid: SpaceTimeGrid
    F_facets: np.ndarray
    G_facets: np.ndarray
    g: np.ndarray
    v1: np.ndarray
    neumann_G: np.ndarray
    final_value: np.ndarray
    potential_id: str = ""
    meta: dict = field(default_factory=dict)

    def equals(self, other: "BoundaryDataset") -> bool:
        return (
            np.array_equal(self.F_facets, other.F_facets)
            and np.array_equal(self.G_facets, other.G_facets)
            and np.array_equal(self.g, other.g)
            and np.array_equal(self.v1, other.v1)
            and np.array_equal(self.neumann_G, other.neumann_G)
            and np.array_equal(self.final_value, other.final_value)
        )


def check_input_support(grid: SpaceTimeGrid, g: np.ndarray, control: ControlSets) -> None:
    outside = np.setdiff1d(np.arange(grid.facets.count), control.F_facets)
    if outside.size and np.any(g[:, outside] != 0):
        raise GridError("dirichlet input is not supported in F")
    if np.any(g[0] != 0):
        raise GridError("dirichlet input must vanish at t=0")


def boundary_operator(grid: SpaceTimeGrid, q, g, v1, control: ControlSets,
                      potential_id: str = "", backend: str | None = None) -> BoundaryDataset:
    """Solve the IBVP with zero initial value and return its observed traces."""
    g = np.zeros((grid.nt + 1, grid.facets.count)) if g is None else np.asarray(g, float)
    v1 = np.zeros(grid.space_shape) if v1 is None else np.asarray(v1, float)
    check_input_support(grid, g, control)
    u = solve_ibvp(IbvpProblem(grid, q=q, dirichlet=g, v1=v1), backend=backend)
    return dataset_from_solution(grid, u, g, v1, control, potential_id)


def dataset_from_solution(grid, u, g, v1, control, potential_id=""):
    return BoundaryDataset(
        grid=grid,
        F_facets=np.asarray(control.F_facets),
        G_facets=np.asarray(control.G_facets),
        g=np.asarray(g, float),
        v1=np.asarray(v1, float),
        neumann_G=neumann_trace(grid, u, control.G_facets).values,
        final_value=np.array(u[-1]),
        potential_id=potential_id,
    )


def energy_history(grid: SpaceTimeGrid, u: np.ndarray, q=None) -> np.ndarray:
    """E(m) = 1/2 (|d_t u|^2 + |grad u|^2 + q u^2) integrated over each slice."""
    u = grid.check_field(u)
    ut = np.gradient(u, grid.dt, axis=0, edge_order=2)
    out = np.empty(grid.nt + 1)
    for m in range(grid.nt + 1):
        dens = ut[m] ** 2
        for a in range(grid.n_space):
            dens = dens + np.gradient(u[m], grid.h, axis=a, edge_order=2) ** 2
        if q is not None:
            dens = dens + q[m] * u[m] ** 2
        out[m] = 0.5 * integrate_slice(grid, dens)
    return out


def full_dirichlet(grid: SpaceTimeGrid, u: np.ndarray) -> np.ndarray:
    """Lateral values of a field on every facet, ready for ``IbvpProblem``."""
    return dirichlet_trace(grid, u).values


__all__ = [
    "BoundaryDataset",
    "IbvpProblem",
    "InstabilityError",
    "LateralTrace",
    "SolverError",
    "boundary_operator",
    "energy_history",
    "full_dirichlet",
    "lateral_values",
    "solve_damped_ibvp",
    "solve_ibvp",
]
