"""Space-time grids on (0, T) x (0, L)^n, boundary facets and quadratures."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

# exp(700) is close to the float64 ceiling
LOG_OVERFLOW = 700.0


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Uniform node grid on the closed cylinder [0, T] x [0, L]^n.

    Node (m, j) sits at t_m = m*dt and x_j = j*h componentwise. Field
    arrays have shape ``(nt + 1,) + (nx + 1,) * n_space`` with axis 0 time.
    """

    n_space: int
    T: float
    L: float
    nt: int
    nx: int
    cfl_safety: float = 1.0

    @property
    def dt(self) -> float:
        return self.T / self.nt

    @property
    def h(self) -> float:
        return self.L / self.nx

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.nt + 1,) + (self.nx + 1,) * self.n_space

    @property
    def space_shape(self) -> tuple[int, ...]:
        return (self.nx + 1,) * self.n_space

    @property
    def interior(self) -> tuple[slice, ...]:
        return (slice(1, -1),) * (1 + self.n_space)

    @cached_property
    def t(self) -> np.ndarray:
        return np.arange(self.nt + 1) * self.dt

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.nx + 1) * self.h

    @cached_property
    def space_coords(self) -> tuple[np.ndarray, ...]:
        """Broadcastable coordinate arrays over the spatial grid."""
        return tuple(np.meshgrid(*([self.x] * self.n_space), indexing="ij"))

    def time_column(self) -> np.ndarray:
        """Time coordinates shaped to broadcast against a field."""
        return self.t.reshape((-1,) + (1,) * self.n_space)

    def omega_dot_x(self, omega) -> np.ndarray:
        omega = as_direction(omega, self.n_space)
        out = np.zeros(self.space_shape)
        for a, xa in enumerate(self.space_coords):
            out += omega[a] * xa
        return out

    def phase(self, omega) -> np.ndarray:
        """t + omega.x at every node."""
        return self.time_column() + self.omega_dot_x(omega)[None]

    def check_field(self, values: np.ndarray, name: str = "field") -> np.ndarray:
        values = np.asarray(values)
        if values.shape != self.shape:
            raise GridError(f"{name}: shape {values.shape} does not match grid {self.shape}")
        return values

    def check_slice(self, values: np.ndarray, name: str = "slice") -> np.ndarray:
        values = np.asarray(values)
        if values.shape != self.space_shape:
            raise GridError(f"{name}: shape {values.shape} does not match {self.space_shape}")
        return values

    def with_steps(self, nt: int | None = None, nx: int | None = None) -> "SpaceTimeGrid":
        return make_grid(
            self.n_space, self.T, self.L, nt or self.nt, nx or self.nx, self.cfl_safety
        )

    @cached_property
    def facets(self) -> "FacetTable":
        return _build_facets(self)


def make_grid(n_space: int, T: float, L: float = 1.0, nt: int = 128, nx: int = 64,
              cfl_safety: float = 1.0) -> SpaceTimeGrid:
    if n_space not in (1, 2):
        raise GridError(f"n_space must be 1 or 2, got {n_space}")
    if T <= 0 or L <= 0:
        raise GridError("T and L must be positive")
    if not 0 < cfl_safety <= 1:
        raise GridError(f"cfl_safety must lie in (0, 1], got {cfl_safety}")
    if nt < 8 or nx < 8:
        raise GridError(f"need nt >= 8 and nx >= 8, got nt={nt}, nx={nx}")
    h = L / nx
    dt = T / nt
    limit = cfl_safety * h / math.sqrt(n_space)
    if dt > limit * (1 + 1e-12):
        nt_min = math.ceil(T / limit - 1e-9)
        raise GridError(
            f"CFL violated: dt={dt:.6g} > {limit:.6g}; need nt >= {nt_min}"
        )
    return SpaceTimeGrid(n_space, float(T), float(L), int(nt), int(nx), float(cfl_safety))


def cfl_nt(n_space: int, T: float, L: float, nx: int, cfl_safety: float = 1.0) -> int:
    """Smallest admissible number of time steps for the given spatial grid."""
    return max(8, math.ceil(T / (cfl_safety * (L / nx) / math.sqrt(n_space)) - 1e-9))


def as_direction(omega, n_space: int) -> np.ndarray:
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    if omega.shape != (n_space,):
        raise GridError(f"direction must have {n_space} components, got {omega.shape}")
    if abs(np.linalg.norm(omega) - 1.0) > 1e-12:
        raise GridError(f"direction {omega} is not a unit vector")
    return omega


def unit(*components) -> np.ndarray:
    v = np.asarray(components, dtype=float)
    return v / np.linalg.norm(v)


# ---------------------------------------------------------------- facets


@dataclass(frozen=True)
class FacetTable:
    """Boundary nodes, one entry per (face, node) pair.

    Faces are numbered ``2*axis + side`` with side 0 at x_axis = 0 (normal
    -e_axis) and side 1 at x_axis = L. Corner nodes appear once per face
    they belong to, each carrying half the trapezoid weight of that face.
    """

    face: np.ndarray
    normal: np.ndarray
    nodes: tuple[np.ndarray, ...]
    inner1: tuple[np.ndarray, ...]
    inner2: tuple[np.ndarray, ...]
    weight: np.ndarray

    @property
    def count(self) -> int:
        return len(self.face)

    def of_faces(self, faces) -> np.ndarray:
        return np.flatnonzero(np.isin(self.face, list(faces)))


def _build_facets(grid: SpaceTimeGrid) -> FacetTable:
    n, nx = grid.n_space, grid.nx
    face, normal, weight = [], [], []
    nodes = [[] for _ in range(n)]
    in1 = [[] for _ in range(n)]
    in2 = [[] for _ in range(n)]
    along = np.arange(nx + 1)
    if n == 2:
        w_along = np.full(nx + 1, grid.h)
        w_along[[0, -1]] *= 0.5
    for axis in range(n):
        for side in (0, 1):
            fid = 2 * axis + side
            nu = np.zeros(n)
            nu[axis] = 1.0 if side else -1.0
            edge, step = (nx, -1) if side else (0, 1)
            count = 1 if n == 1 else nx + 1
            for k in range(n):
                if k == axis:
                    nodes[k].append(np.full(count, edge))
                    in1[k].append(np.full(count, edge + step))
                    in2[k].append(np.full(count, edge + 2 * step))
                else:
                    nodes[k].append(along)
                    in1[k].append(along)
                    in2[k].append(along)
            face.append(np.full(count, fid))
            normal.append(np.tile(nu, (count, 1)))
            weight.append(np.ones(1) if n == 1 else w_along)
    cat = np.concatenate
    return FacetTable(
        face=cat(face),
        normal=cat(normal),
        nodes=tuple(cat(a) for a in nodes),
        inner1=tuple(cat(a) for a in in1),
        inner2=tuple(cat(a) for a in in2),
        weight=cat(weight),
    )


@dataclass(frozen=True)
class BoundaryPartition:
    omega: np.ndarray
    r: float
    nu_dot_omega: np.ndarray
    plus_omega: np.ndarray
    minus_omega: np.ndarray
    plus_r: np.ndarray
    minus_r: np.ndarray


def classify_boundary(grid: SpaceTimeGrid, omega, r: float = 0.0) -> BoundaryPartition:
    omega = as_direction(omega, grid.n_space)
    if not -1.0 <= r <= 1.0:
        raise GridError(f"threshold r must lie in [-1, 1], got {r}")
    nd = grid.facets.normal @ omega
    return BoundaryPartition(
        omega=omega,
        r=r,
        nu_dot_omega=nd,
        plus_omega=np.flatnonzero(nd >= 0),
        minus_omega=np.flatnonzero(nd <= 0),
        plus_r=np.flatnonzero(nd > r),
        minus_r=np.flatnonzero(nd <= r),
    )


def cap_sample(omega0, epsilon: float, count: int = 9) -> list[np.ndarray]:
    """Directions spread over the cap {w on the sphere : |w - omega0| <= epsilon}."""
    omega0 = np.atleast_1d(np.asarray(omega0, dtype=float))
    if omega0.size == 1:
        return [omega0.copy()]
    half = 2.0 * math.asin(min(1.0, epsilon / 2.0))
    base = math.atan2(omega0[1], omega0[0])
    if count == 1:
        angles = [base]
    else:
        angles = base + np.linspace(-half, half, count)
    return [np.array([math.cos(a), math.sin(a)]) for a in angles]


@dataclass(frozen=True)
class ControlSets:
    """Input facets F' (Dirichlet support) and observation facets G'."""

    F_facets: np.ndarray
    G_facets: np.ndarray
    omega0: np.ndarray
    epsilon: float
    F_faces: tuple[int, ...] = field(default=())
    G_faces: tuple[int, ...] = field(default=())


def _control_faces(grid, omega0, epsilon):
    ft = grid.facets
    nd = {}
    for f in range(2 * grid.n_space):
        nd[f] = float(ft.normal[ft.of_faces([f])[0]] @ omega0)
    F = tuple(f for f in nd if nd[f] > -2 * epsilon)
    G = tuple(f for f in nd if nd[f] < 2 * epsilon)
    return F, G


def _control_violations(grid, omega0, epsilon, F, G) -> list[str]:
    ft = grid.facets
    normals = {f: ft.normal[ft.of_faces([f])[0]] for f in range(2 * grid.n_space)}
    bad = []
    for w in cap_sample(omega0, epsilon, 9):
        for f, nu in normals.items():
            if nu @ (-w) <= epsilon and f not in F:
                bad.append(f"face {f} in minus(eps, -w) but not in F' for w={w}")
            if nu @ w <= epsilon and f not in G:
                bad.append(f"face {f} in minus(eps, w) but not in G' for w={w}")
    return bad


def default_control_sets(grid: SpaceTimeGrid, omega0, epsilon: float = 0.1) -> ControlSets:
    omega0 = as_direction(omega0, grid.n_space)
    if not 0 < epsilon <= 0.5:
        raise GridError(f"epsilon must lie in (0, 1/2], got {epsilon}")
    F, G = _control_faces(grid, omega0, epsilon)
    if _control_violations(grid, omega0, epsilon, F, G):
        best = 0.0
        for e in np.linspace(epsilon, 0, 201)[:-1]:
            Fe, Ge = _control_faces(grid, omega0, e)
            if not _control_violations(grid, omega0, e, Fe, Ge):
                best = float(e)
                break
        raise GridError(
            f"control sets invalid for epsilon={epsilon}; largest admissible is {best:.4g}"
        )
    ft = grid.facets
    return ControlSets(ft.of_faces(F), ft.of_faces(G), omega0, float(epsilon), F, G)


# ---------------------------------------------------------------- weights


def trapezoid_weights(n: int, step: float) -> np.ndarray:
    w = np.full(n + 1, step)
    w[[0, -1]] *= 0.5
    return w


def _volume_weights(grid: SpaceTimeGrid) -> np.ndarray:
    w = trapezoid_weights(grid.nt, grid.dt).reshape((-1,) + (1,) * grid.n_space)
    return w * _slice_weights(grid)[None]


def _slice_weights(grid: SpaceTimeGrid) -> np.ndarray:
    wx = trapezoid_weights(grid.nx, grid.h)
    out = wx
    if grid.n_space == 2:
        out = np.multiply.outer(wx, wx)
    return out


def integrate_volume(grid: SpaceTimeGrid, values) -> float:
    values = grid.check_field(values)
    return float(np.sum(_volume_weights(grid) * values))


def integrate_slice(grid: SpaceTimeGrid, values) -> float:
    values = grid.check_slice(values)
    return float(np.sum(_slice_weights(grid) * values))


def integrate_lateral(grid: SpaceTimeGrid, values, facet_set) -> float:
    """Trapezoid rule over (0, T) x (selected facets); values is (nt+1, len(facet_set))."""
    facet_set = np.asarray(facet_set, dtype=int)
    values = np.asarray(values)
    if values.shape != (grid.nt + 1, facet_set.size):
        raise GridError(
            f"lateral values shape {values.shape} != {(grid.nt + 1, facet_set.size)}"
        )
    wt = trapezoid_weights(grid.nt, grid.dt)
    wf = grid.facets.weight[facet_set]
    return float(wt @ values @ wf)


def check_weight(grid: SpaceTimeGrid, lam: float) -> None:
    if lam < 0:
        raise GridError(f"lambda must be nonnegative, got {lam}")
    if 2 * lam * (grid.T + grid.L * math.sqrt(grid.n_space)) > LOG_OVERFLOW:
        raise GridError(f"weight overflow: 2*lambda*(T + L*sqrt(n)) > {LOG_OVERFLOW}")


def carleman_weight(grid: SpaceTimeGrid, lam: float, omega, sign: int) -> np.ndarray:
    """exp(sign * 2 * lam * (t + omega.x)) at every node."""
    if sign not in (1, -1):
        raise GridError("sign must be +1 or -1")
    check_weight(grid, lam)
    return np.exp(sign * 2.0 * lam * grid.phase(omega))


# ---------------------------------------------------------------- hidden region


def boundary_distance(grid: SpaceTimeGrid) -> np.ndarray:
    d = np.full(grid.space_shape, np.inf)
    for xa in grid.space_coords:
        d = np.minimum(d, np.minimum(xa, grid.L - xa))
    return d


def hidden_region_mask(grid: SpaceTimeGrid) -> np.ndarray:
    """Nodes with dist(x, boundary) > t: unreachable from lateral data in time t."""
    return boundary_distance(grid)[None] > grid.time_column()


def discrete_hidden_mask(grid: SpaceTimeGrid) -> np.ndarray:
    """Nodes the explicit stencil cannot reach from the boundary by level m.

    A node d cells from the boundary first feels lateral data at level d + 1,
    so the solution vanishes exactly wherever d >= m (and d >= 1).
    """
    j = np.arange(grid.nx + 1)
    dj = np.minimum(j, grid.nx - j)
    d = dj
    if grid.n_space == 2:
        d = np.minimum.outer(dj, dj)
    m = np.arange(grid.nt + 1).reshape((-1,) + (1,) * grid.n_space)
    return (d[None] >= m) & (d[None] >= 1)
