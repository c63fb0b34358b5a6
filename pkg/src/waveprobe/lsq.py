"""Minimal-norm space-time least squares for the damped wave operator.

The unknown is a node field u on the whole grid. Rows are

* the PDE  (Box + 2 s (d_t - omega.grad) + q) u = f  on interior nodes,
* one block per constraint  sqrt(weight) (u[mask] - target),
* sqrt(mu) u  when mu > 0.

Constraints with infinite weight are eliminated: their nodes are fixed
and removed from the unknowns. CGLS started from zero converges to the
minimal-norm minimizer over the remaining unknowns.

When every constraint is hard, the whole t = 0 slice is fixed, the other
fixed nodes lie on the lateral boundary and mu = 0, the PDE rows can be
satisfied exactly: level 1 and the free lateral nodes determine the rest
of the field through the explicit march. The solver then runs CGLS on
that control-to-field map (forward march and its adjoint), which returns
the minimal-norm exact solution far faster than the stacked system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import kernels
from .go import make_cutoff, probe_phase
from .grid import GridError, SpaceTimeGrid, as_direction, classify_boundary


@dataclass
class Constraint:
    name: str
    mask: np.ndarray
    target: np.ndarray
    weight: float = math.inf


@dataclass
class SpaceTimeLsqProblem:
    grid: SpaceTimeGrid
    s: float
    omega: np.ndarray
    q: np.ndarray | None
    source: np.ndarray | None
    constraints: list
    mu: float = 0.0

    def __post_init__(self):
        if not self.constraints:
            raise GridError("at least one constraint row is required")
        for c in self.constraints:
            if not c.weight > 0:
                raise GridError(f"constraint {c.name!r} weight must be > 0")
            if c.mask.shape != self.grid.shape:
                raise GridError(f"constraint {c.name!r} mask has shape {c.mask.shape}")
            if np.shape(c.target) != (int(c.mask.sum()),):
                raise GridError(f"constraint {c.name!r} target does not match its mask")
        if self.mu < 0:
            raise GridError("mu must be >= 0")


@dataclass
class LsqReport:
    converged: bool
    iterations: int
    pde_residual: float
    constraint_residuals: dict
    history: list = field(default_factory=list)


def _second(n, step):
    main = np.full(n + 1, -2.0)
    m = sp.diags([np.ones(n), main, np.ones(n)], [-1, 0, 1], format="csr")
    return m / step**2


def _first(n, step):
    return sp.diags([-np.ones(n), np.ones(n)], [-1, 1], format="csr") / (2.0 * step)


def _embed(ops, axis):
    out = None
    for a, size in enumerate(ops["sizes"]):
        block = ops["mat"] if a == axis else sp.identity(size, format="csr")
        out = block if out is None else sp.kron(out, block, format="csr")
    return out


def damped_matrix(grid: SpaceTimeGrid, s: float, omega, q=None) -> sp.csr_matrix:
    """Sparse rows of the centered damped operator at the interior nodes."""
    omega = as_direction(omega, grid.n_space)
    sizes = [grid.nt + 1] + [grid.nx + 1] * grid.n_space
    op = _embed({"sizes": sizes, "mat": _second(grid.nt, grid.dt)}, 0)
    if s:
        op = op + 2.0 * s * _embed({"sizes": sizes, "mat": _first(grid.nt, grid.dt)}, 0)
    for a in range(grid.n_space):
        op = op - _embed({"sizes": sizes, "mat": _second(grid.nx, grid.h)}, a + 1)
        if s and omega[a]:
            op = op - 2.0 * s * omega[a] * _embed(
                {"sizes": sizes, "mat": _first(grid.nx, grid.h)}, a + 1)
    if q is not None:
        op = op + sp.diags(np.asarray(q, float).ravel())
    rows = np.flatnonzero(_interior_mask(grid).ravel())
    return op.tocsr()[rows]


def _interior_mask(grid):
    m = np.zeros(grid.shape, dtype=bool)
    m[grid.interior] = True
    return m


def cgls(A, b, mu=0.0, max_iter=5000, tol=1e-10):
    """CG on the normal equations of min |A x - b|^2 + mu |x|^2, from x = 0.

    Returns (x, converged, iterations, history of |A x - b|).
    Convergence is judged on the normal-equation residual relative to |A^T b|.
    """
    x = np.zeros(A.shape[1])
    r = b.copy()
    s = A.T @ r
    p = s.copy()
    gamma = s @ s
    ref = math.sqrt(gamma)
    history = [float(np.linalg.norm(r))]
    if ref == 0:
        return x, True, 0, history
    k = 0
    converged = False
    while k < max_iter:
        k += 1
        qv = A @ p
        delta = qv @ qv + mu * (p @ p)
        alpha = gamma / delta
        x += alpha * p
        r -= alpha * qv
        s = A.T @ r - mu * x
        gamma_new = s @ s
        history.append(float(np.linalg.norm(r)))
        if math.sqrt(gamma_new) <= tol * ref:
            converged = True
            break
        p = s + (gamma_new / gamma) * p
        gamma = gamma_new
    return x, converged, k, history


class _ControlMap:
    """Field = particular march + linear march of the free (control) nodes."""

    def __init__(self, grid, s, omega, q, f, fixed, values, backend=None):
        self.grid = grid
        self.s = float(s)
        self.omega = as_direction(omega, grid.n_space)
        self.q = np.ascontiguousarray(np.zeros(grid.shape) if q is None else q, dtype=float)
        self.f = np.ascontiguousarray(np.zeros(grid.shape) if f is None else f, dtype=float)
        self.values = np.where(fixed, values, 0.0)
        boundary = np.ones(grid.space_shape, dtype=bool)
        boundary[(slice(1, -1),) * grid.n_space] = False
        ctrl = np.zeros(grid.shape, dtype=bool)
        ctrl[1][(slice(1, -1),) * grid.n_space] = True
        ctrl[1:] |= boundary[None]
        self.ctrl = ctrl & ~fixed
        self.size = int(self.ctrl.sum())
        self.kern = kernels.get_backend(backend)
        self.step = self.kern.damped_step_1d if grid.n_space == 1 else self.kern.damped_step_2d
        self.zeros = np.zeros(grid.space_shape)

    def march(self, x, homogeneous=True):
        g = self.grid
        u = np.zeros(g.shape) if homogeneous else self.values.copy()
        u[self.ctrl] = x
        w = tuple(float(c) for c in self.omega)
        # the kernel writes interior nodes only, so lateral values stay put
        for m in range(1, g.nt):
            f = self.zeros if homogeneous else self.f[m]
            self.step(u[m - 1], u[m], self.q[m], f, self.s, *w, g.dt, g.h, u[m + 1])
        return u

    def adjoint(self, y):
        g = self.grid
        inner = (slice(1, -1),) * g.n_space
        acc = np.array(y, dtype=float, copy=True)
        w = tuple(-float(c) for c in self.omega)
        div = 1.0 + self.s * g.dt
        k = g.dt * g.dt / div
        nxt2 = np.zeros(g.space_shape)
        for m in range(g.nt - 1, 0, -1):
            p = np.zeros(g.space_shape)
            p[inner] = acc[m + 1][inner]
            out = np.zeros(g.space_shape)
            self.step(nxt2, p, self.q[m], self.zeros, self.s, *w, g.dt, g.h, out)
            acc[m][inner] += out[inner]
            for a in range(g.n_space):
                lo = 1.0 / g.h**2 - self.s * self.omega[a] / g.h
                hi = 1.0 / g.h**2 + self.s * self.omega[a] / g.h
                _scatter(acc[m], p, k * lo, k * hi, a)
            nxt2 = p
        return acc[self.ctrl]


def _scatter(acc, p, coef_lo, coef_hi, axis):
    """Add the boundary columns of the transposed stencil."""
    inner = [slice(1, -1)] * p.ndim
    dst, src = list(inner), list(inner)
    dst[axis], src[axis] = 0, 1
    acc[tuple(dst)] += coef_lo * p[tuple(src)]
    dst[axis], src[axis] = -1, -2
    acc[tuple(dst)] += coef_hi * p[tuple(src)]


class _MapOperator:
    def __init__(self, cmap):
        self.cmap = cmap
        self.shape = (int(np.prod(cmap.grid.shape)), cmap.size)

    def __matmul__(self, x):
        return self.cmap.march(x).ravel()

    @property
    def T(self):
        outer = self

        class _Adj:
            def __matmul__(self, y):
                return outer.cmap.adjoint(y.reshape(outer.cmap.grid.shape))

        return _Adj()


def _reducible(problem):
    if problem.mu != 0:
        return False
    fixed = np.zeros(problem.grid.shape, dtype=bool)
    for c in problem.constraints:
        if not math.isinf(c.weight):
            return False
        fixed |= c.mask
    if not fixed[0].all():
        return False
    space_inner = fixed[1:][(slice(None),) + (slice(1, -1),) * problem.grid.n_space]
    return not space_inner.any()


def solve_spacetime_lsq(problem: SpaceTimeLsqProblem, max_iter: int = 5000,
                        tol: float = 1e-10, method: str = "auto", backend: str | None = None):
    """Minimize |PDE residual|^2 + sum w_i |constraint_i residual|^2 + mu |u|^2.

    ``method`` is "stacked", "reduced" or "auto" (reduced when applicable).
    Returns the field and an ``LsqReport``; a non-converged run returns the
    best iterate with ``converged=False``.
    """
    grid = problem.grid
    A = damped_matrix(grid, problem.s, problem.omega, problem.q)
    f = np.zeros(A.shape[0]) if problem.source is None else np.asarray(
        problem.source, float)[grid.interior].ravel()
    if method == "auto":
        method = "reduced" if _reducible(problem) else "stacked"
    if method == "reduced":
        if not _reducible(problem):
            raise GridError("constraint pattern does not admit the reduced formulation")
        return _solve_reduced(problem, A, f, max_iter, tol, backend)
    if method != "stacked":
        raise ValueError(f"unknown method {method!r}")

    fixed = np.zeros(grid.shape, dtype=bool)
    values = np.zeros(grid.shape)
    soft = []
    for c in problem.constraints:
        if math.isinf(c.weight):
            values[c.mask] = c.target
            fixed |= c.mask
        else:
            soft.append(c)
    free = np.flatnonzero(~fixed.ravel())
    fixed_idx = np.flatnonzero(fixed.ravel())

    blocks = [A[:, free]]
    rhs = [f - A[:, fixed_idx] @ values.ravel()[fixed_idx]]
    col_of = np.full(fixed.size, -1)
    col_of[free] = np.arange(free.size)
    for c in soft:
        nodes = np.flatnonzero(c.mask.ravel())
        keep = col_of[nodes] >= 0
        w = math.sqrt(c.weight)
        rows = sp.csr_matrix((np.full(keep.sum(), w), (np.arange(keep.sum()), col_of[nodes[keep]])),
                             shape=(int(keep.sum()), free.size))
        blocks.append(rows)
        rhs.append(w * (np.asarray(c.target)[keep] - 0.0))
    M = sp.vstack(blocks, format="csr")
    b = np.concatenate(rhs)

    x, ok, its, hist = cgls(M, b, problem.mu, max_iter, tol)
    u = values.ravel().copy()
    u[free] = x
    u = u.reshape(grid.shape)

    return u, _report(problem, A, f, u, ok, its, hist)


def _report(problem, A, f, u, ok, its, hist):
    grid = problem.grid
    pde = float(np.linalg.norm(A @ u.ravel() - f) * math.sqrt(grid.dt * grid.h**grid.n_space))
    cons = {c.name: float(np.linalg.norm(u[c.mask] - c.target)) for c in problem.constraints}
    return LsqReport(ok, its, pde, cons, hist)


def _solve_reduced(problem, A, f, max_iter, tol, backend):
    grid = problem.grid
    fixed = np.zeros(grid.shape, dtype=bool)
    values = np.zeros(grid.shape)
    for c in problem.constraints:
        values[c.mask] = c.target
        fixed |= c.mask
    cmap = _ControlMap(grid, problem.s, problem.omega, problem.q, problem.source,
                       fixed, values, backend)
    base = cmap.march(np.zeros(cmap.size), homogeneous=False)
    x, ok, its, hist = cgls(_MapOperator(cmap), -base.ravel(), 0.0, max_iter, tol)
    u = base + cmap.march(x)
    return u, _report(problem, A, f, u, ok, its, hist)


def vanishing_lsq(grid: SpaceTimeGrid, q, lam: float, omega, epsilon: float,
                  mu: float = 0.0, max_iter: int = 5000, tol: float = 1e-10,
                  method: str = "auto", backend: str | None = None):
    """Minimal-norm z with z(0) = -1 and z = -psi on the facets with omega.nu <= 0.

    Working with z rather than y = exp(lam (t + omega.x)) z turns the plain
    L2 norm of z into the weighted norm of y, so the minimal-norm z is the
    minimal weighted-norm y.
    """
    omega = as_direction(omega, grid.n_space)
    q = np.zeros(grid.shape) if q is None else q
    part = classify_boundary(grid, omega, 0.0)
    psi = make_cutoff(grid, omega, epsilon).node_values
    ft = grid.facets
    init = np.zeros(grid.shape, dtype=bool)
    init[0] = True
    lat = np.zeros(grid.shape, dtype=bool)
    target = np.zeros(grid.shape)
    for f in part.minus_omega:
        node = tuple(a[f] for a in ft.nodes)
        lat[(slice(1, None),) + node] = True
        target[(slice(1, None),) + node] = -psi[f]
    lat &= ~init
    cons = [
        Constraint("initial", init, -np.ones(int(init.sum()))),
        Constraint("lateral", lat, target[lat]),
    ]
    prob = SpaceTimeLsqProblem(grid, float(lam), omega, q, -q, cons, mu)
    return solve_spacetime_lsq(prob, max_iter, tol, method, backend)


def conjugate_back(grid: SpaceTimeGrid, z: np.ndarray, lam: float, omega) -> np.ndarray:
    """y = exp(rho) z, the unknown of the unconjugated problem."""
    return np.exp(probe_phase(grid, lam, omega)) * z
