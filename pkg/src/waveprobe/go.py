"""Geometric-optics probes for d_t^2 u - Lap u + q u = 0.

Two families are built on a grid:

* decaying probes  u1 = exp(-rho) (exp(-i xi.(t,x)) + w),
* vanishing probes u2 = exp(+rho) (1 + z) with u2(0) = 0 and u2 = 0 on the
  facets where omega.nu < -eps/2,

where rho = a t + lam omega.x. The time rate ``a`` is the discrete null
rate: it makes exp(+-rho) exact null solutions of the centered box
operator, and tends to lam as the grid is refined.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .fields import apply_wave, norm_interior, norm_L2_Q
from .grid import GridError, SpaceTimeGrid, as_direction, classify_boundary, make_grid
from .ibvp import IbvpProblem, SolverError, solve_damped_ibvp

log = logging.getLogger(__name__)


class GoConvergenceError(SolverError):
    def __init__(self, message, ratios):
        super().__init__(message)
        self.ratios = ratios


@dataclass(frozen=True)
class CotangentFrequency:
    xi: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        if abs(self.xi @ np.concatenate([[1.0], -self.omega])) > 1e-12 * max(1.0, np.abs(self.xi).max()):
            raise GridError(f"xi={self.xi} is not orthogonal to (1, -omega)")


def project_xi(raw_xi, omega) -> CotangentFrequency:
    """Orthogonal projection of ``raw_xi`` onto the hyperplane (1, -omega)^perp."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    raw = np.asarray(raw_xi, dtype=float)
    n = np.concatenate([[1.0], -omega])
    xi = raw - (raw @ n) / (n @ n) * n
    # exact zeros keep the invariant check tight
    xi[np.abs(xi) < 1e-15 * max(1.0, np.abs(raw).max())] = 0.0
    return CotangentFrequency(xi, omega)


def null_rate(grid: SpaceTimeGrid, lam: float, omega) -> float:
    """Time rate a with exp(a t + lam omega.x) annihilated by the discrete box."""
    omega = as_direction(omega, grid.n_space)
    space = sum(2.0 * (math.cosh(lam * w * grid.h) - 1.0) for w in omega) / grid.h**2
    return math.acosh(1.0 + 0.5 * grid.dt**2 * space) / grid.dt


def probe_phase(grid: SpaceTimeGrid, lam: float, omega) -> np.ndarray:
    """rho = a t + lam omega.x with a the discrete null rate."""
    a = null_rate(grid, lam, omega)
    return a * grid.time_column() + lam * grid.omega_dot_x(omega)[None]


def plane_wave(grid: SpaceTimeGrid, xi) -> np.ndarray:
    """exp(-i xi.(t, x)) at every node."""
    xi = np.asarray(xi, dtype=float)
    arg = xi[0] * grid.time_column() + np.zeros(grid.shape)
    for a, xa in enumerate(grid.space_coords):
        arg = arg + xi[a + 1] * xa[None]
    return np.exp(-1j * arg)


@dataclass
class GoSolution:
    kind: str
    lam: float
    omega: np.ndarray
    field: np.ndarray
    remainder: np.ndarray
    residual_norm: float
    remainder_norm: float
    xi: CotangentFrequency | None = None
    rate: float = 0.0
    iterations: int = 0
    ratios: list = field(default_factory=list)
    method: str = ""


# ---------------------------------------------------------------- decaying probes


def _padded(grid: SpaceTimeGrid, pad: float):
    cells = int(math.ceil(pad * grid.T / grid.h)) if pad > 0 else 0
    if cells == 0:
        return grid, 0
    big = make_grid(grid.n_space, grid.T, grid.L + 2 * cells * grid.h, grid.nt,
                    grid.nx + 2 * cells, grid.cfl_safety)
    return big, cells


def anticausal_solve(grid: SpaceTimeGrid, source: np.ndarray, lam: float, omega,
                     pad: float = 0.5, backend: str | None = None) -> np.ndarray:
    """Solve (Box - 2 lam (d_t - omega.grad)) w = source with vanishing data at t = T.

    The source is extended by zero to a box padded by ``pad * T`` on every
    side, which carries zero Dirichlet data; the result is restricted to Q.
    Marching backward from t = T turns the -2 lam d_t term into damping.
    """
    big, k = _padded(grid, pad)
    core = (slice(None),) + (slice(k, k + grid.nx + 1),) * grid.n_space
    parts = []
    for part in (source.real, source.imag) if np.iscomplexobj(source) else (source,):
        f = np.zeros(big.shape)
        f[core] = part
        w = solve_damped_ibvp(IbvpProblem(big, rhs=f), -lam, omega,
                              direction="backward", backend=backend)
        parts.append(w[core])
    if len(parts) == 2:
        return parts[0] + 1j * parts[1]
    return parts[0]


def build_decaying_go(grid: SpaceTimeGrid, q, lam: float, omega, xi: CotangentFrequency,
                      k_max: int = 30, tol: float = 1e-10, pad: float = 0.5,
                      backend: str | None = None) -> GoSolution:
    """Probe exp(-rho)(exp(-i xi.(t,x)) + w) by fixed-point iteration on w.

    Each sweep solves the anti-causal damped problem with source
    -((Box + q) exp(-i xi.(t,x)) + q w_k).
    """
    omega = as_direction(omega, grid.n_space)
    if lam <= 1:
        raise GridError(f"lambda must exceed 1, got {lam}")
    if lam * grid.dt >= 1:
        raise GridError(f"lambda * dt = {lam * grid.dt:.3g} must be < 1")
    if not np.allclose(xi.omega, omega, atol=1e-12):
        raise GridError("xi was projected for a different direction")
    q = np.zeros(grid.shape) if q is None else grid.check_field(q)
    e = plane_wave(grid, xi.xi)
    symbol = float(xi.xi[1:] @ xi.xi[1:] - xi.xi[0] ** 2)
    base = -(symbol + q) * e
    w = np.zeros(grid.shape, dtype=complex)
    ratios: list[float] = []
    prev_step = None
    has_q = bool(np.any(q != 0))
    converged = False
    k = 0
    for k in range(1, k_max + 1):
        w_new = anticausal_solve(grid, base - q * w, lam, omega, pad, backend)
        step = norm_L2_Q(grid, w_new - w)
        if prev_step:
            ratios.append(step / prev_step)
        prev_step = step
        w = w_new
        scale = norm_L2_Q(grid, w)
        if not has_q or step <= tol * max(scale, 1e-300):
            converged = True
            break
    if not converged:
        raise GoConvergenceError(
            f"fixed point not converged after {k_max} sweeps; contraction ratios {ratios}",
            ratios,
        )
    rho = probe_phase(grid, lam, omega)
    u = np.exp(-rho) * (e + w)
    return GoSolution(
        kind="decaying",
        lam=float(lam),
        omega=omega,
        field=u,
        remainder=w,
        residual_norm=go_residual(grid, u, q),
        remainder_norm=norm_L2_Q(grid, w),
        xi=xi,
        rate=null_rate(grid, lam, omega),
        iterations=k,
        ratios=ratios,
        method="fixed_point",
    )


# ---------------------------------------------------------------- vanishing probes


@dataclass(frozen=True)
class CutoffProfile:
    """psi per facet; ``node_values`` resolves shared corner nodes by the larger value."""

    values: np.ndarray
    nu_dot_omega: np.ndarray
    epsilon: float
    node_values: np.ndarray


def smoothstep5(s):
    s = np.clip(s, 0.0, 1.0)
    return s**3 * (10.0 - 15.0 * s + 6.0 * s * s)


def make_cutoff(grid: SpaceTimeGrid, omega, epsilon: float) -> CutoffProfile:
    """psi = 1 where omega.nu <= -eps/2, 0 where omega.nu >= -eps/3, quintic ramp between."""
    if not 0 < epsilon <= 0.5:
        raise GridError(f"epsilon must lie in (0, 1/2], got {epsilon}")
    nd = classify_boundary(grid, omega).nu_dot_omega
    vals = cutoff_value(nd, epsilon)
    return CutoffProfile(vals, nd, float(epsilon), corner_max(grid, vals))


def corner_max(grid: SpaceTimeGrid, per_facet: np.ndarray) -> np.ndarray:
    """Replace each facet value by the max over facets sharing its node."""
    flat = np.ravel_multi_index(grid.facets.nodes, grid.space_shape)
    best = np.full(int(np.prod(grid.space_shape)), -np.inf)
    np.maximum.at(best, flat, per_facet)
    return best[flat]


def cutoff_value(nu_dot_omega, epsilon: float):
    s = (-epsilon / 3.0 - np.asarray(nu_dot_omega, dtype=float)) / (epsilon / 6.0)
    return smoothstep5(s)


def vanishing_data(grid: SpaceTimeGrid, lam: float, omega, epsilon: float):
    """Lateral profile and initial velocity for the damped construction of z."""
    psi = make_cutoff(grid, omega, epsilon).node_values
    decay = np.exp(-2.0 * lam * grid.t)[:, None]
    lateral = -psi[None, :] - (1.0 - psi[None, :]) * decay
    return lateral, psi


def build_vanishing_go(grid: SpaceTimeGrid, q, lam: float, omega, epsilon: float = 0.1,
                       method: str = "damped_ibvp", backend: str | None = None,
                       lsq_options: dict | None = None) -> GoSolution:
    """Probe exp(rho)(1 + z) vanishing at t = 0 and on the illuminated facets.

    z solves Box z + 2 lam (d_t - omega.grad) z + q z = -q with z(0) = -1.
    ``damped_ibvp`` marches forward with d_t z(0) = 2 lam and the lateral
    profile -psi - (1 - psi) exp(-2 lam t), both built from exact solutions
    of the q = 0 equation. ``spacetime_lsq`` fixes z = -psi on the
    illuminated half of the boundary only and takes the minimal-norm z.
    """
    omega = as_direction(omega, grid.n_space)
    if lam <= 1:
        raise GridError(f"lambda must exceed 1, got {lam}")
    q = np.zeros(grid.shape) if q is None else grid.check_field(q)
    if method == "damped_ibvp":
        if lam * grid.dt >= 1:
            raise GridError(f"lambda * dt = {lam * grid.dt:.3g} must be < 1")
        lateral, _ = vanishing_data(grid, lam, omega, epsilon)
        prob = IbvpProblem(grid, q=q, rhs=-q, dirichlet=lateral,
                           u0=-np.ones(grid.space_shape),
                           v1=np.full(grid.space_shape, 2.0 * lam))
        z = solve_damped_ibvp(prob, lam, omega, backend=backend)
        extra = {}
    elif method == "spacetime_lsq":
        from .lsq import vanishing_lsq

        z, report = vanishing_lsq(grid, q, lam, omega, epsilon, **(lsq_options or {}))
        extra = {"report": report}
    else:
        raise ValueError(f"unknown method {method!r}")
    rho = probe_phase(grid, lam, omega)
    u = np.exp(rho) * (1.0 + z)
    sol = GoSolution(
        kind="vanishing",
        lam=float(lam),
        omega=omega,
        field=u,
        remainder=z,
        residual_norm=go_residual(grid, u, q),
        remainder_norm=norm_L2_Q(grid, z),
        rate=null_rate(grid, lam, omega),
        method=method,
    )
    sol.ratios = [extra] if extra else []
    return sol


def vanishing_initial_velocity(grid: SpaceTimeGrid, lam: float, omega) -> np.ndarray:
    """d_t u2 at t = 0 for the damped construction: exp(lam omega.x) * 2 lam."""
    return 2.0 * lam * np.exp(lam * grid.omega_dot_x(omega))


# ---------------------------------------------------------------- diagnostics


def go_residual(grid: SpaceTimeGrid, u: np.ndarray, q) -> float:
    """|(Box + q) u|_interior / |u|_L2(Q), real and imaginary parts combined."""
    q = np.zeros(grid.shape) if q is None else q
    parts = (u.real, u.imag) if np.iscomplexobj(u) else (u,)
    num = math.sqrt(sum(norm_interior(grid, apply_wave(grid, p, q)) ** 2 for p in parts))
    den = norm_L2_Q(grid, u)
    return num / den if den > 0 else 0.0
