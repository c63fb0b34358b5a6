"""Term-by-term evaluation of weighted (Carleman) energy inequalities.

For a field u vanishing on the lateral boundary and with zero Cauchy data at
one end of the time interval, every integral on both sides of the
inequality is computed with the grid quadratures. Four variants are
supported:

``c1a``  weight exp(-2 lam (t + omega.x)), u(0) = d_t u(0) = 0, observed at T
``c1b``  weight exp(+2 lam (t + omega.x)), u(T) = d_t u(T) = 0, observed at 0
``tc2``  conjugated v = exp(-lam (t + omega.x)) u with the damped operator
``tc4``  conjugated v = exp(+lam (t + omega.x)) u, mirror of ``tc2``

The inequality constants are existential; reports give both sides with the
constant taken as 1 and the ratio lhs / rhs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fields import (
    apply_damped,
    apply_wave,
    interior,
    neumann_trace,
    space_gradient,
    time_derivative_at,
)
from .grid import (
    GridError,
    SpaceTimeGrid,
    as_direction,
    check_weight,
    classify_boundary,
    integrate_lateral,
    integrate_slice,
    integrate_volume,
)
from .ibvp import IbvpProblem, solve_ibvp

VARIANTS = ("c1a", "c1b", "tc2", "tc4")
SUPPORT_TOL = 1e-10


@dataclass
class CarlemanReport:
    variant: str
    lam: float
    omega: np.ndarray
    lhs_terms: dict
    rhs_terms: dict

    @property
    def lhs(self) -> float:
        return float(sum(self.lhs_terms.values()))

    @property
    def rhs(self) -> float:
        return float(sum(self.rhs_terms.values()))

    @property
    def ratio(self) -> float:
        r = self.rhs
        if r > 0:
            return self.lhs / r
        return 0.0 if self.lhs == 0 else math.inf


@dataclass
class AdmissibleEnsemble:
    seed: int
    count: int
    variant: str
    fields: list = field(default_factory=list)


# ---------------------------------------------------------------- ensemble


def band_limited_source(grid: SpaceTimeGrid, coeffs: np.ndarray) -> np.ndarray:
    """sum c_{j,k..} sin(j pi t / T) prod_a sin(k_a pi x_a / L) on the grid nodes.

    Each time factor vanishes at t = 0, so the first leapfrog level stays zero.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    nt_modes = coeffs.shape[0]
    tb = np.sin(np.outer(np.arange(1, nt_modes + 1), np.pi * grid.t / grid.T))
    xb = np.sin(np.outer(np.arange(1, coeffs.shape[1] + 1), np.pi * grid.x / grid.L))
    if grid.n_space == 1:
        return np.einsum("jk,jt,kx->tx", coeffs, tb, xb)
    return np.einsum("jkl,jt,kx,ly->txy", coeffs, tb, xb, xb)


def ensemble_coefficients(seed: int, count: int, n_space: int, band: int = 3) -> list:
    """Random mode amplitudes with 1/(j k ...) decay, fixed by ``seed``."""
    rng = np.random.default_rng(seed)
    shape = (band,) * (1 + n_space)
    idx = np.indices(shape) + 1
    decay = 1.0 / np.prod(idx, axis=0)
    return [rng.standard_normal(shape) * decay for _ in range(count)]


def random_admissible(grid: SpaceTimeGrid, q, variant: str, seed: int, count: int,
                      band: int = 3, backend: str | None = None) -> AdmissibleEnsemble:
    """Fields with zero lateral values and zero Cauchy data at the variant's end.

    Each member solves the wave equation with zero data and a band-limited
    interior source; ``c1b``/``tc4`` members are the time reversals.
    The source is a fixed continuous function of (t, x) for a given seed, so
    ensembles on different grids sample the same underlying fields.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    q_fwd = q
    if q is not None and variant in ("c1b", "tc4"):
        q_fwd = np.ascontiguousarray(np.asarray(q)[::-1])
    out = AdmissibleEnsemble(seed, count, variant)
    for c in ensemble_coefficients(seed, count, grid.n_space, band):
        f = band_limited_source(grid, c)
        u = solve_ibvp(IbvpProblem(grid, q=q_fwd, rhs=f), backend=backend)
        if variant in ("c1b", "tc4"):
            u = np.ascontiguousarray(u[::-1])
        out.fields.append(u)
    return out


# ---------------------------------------------------------------- evaluation


def _end_slices(variant):
    # (observed level, vanishing level)
    return (-1, 0) if variant in ("c1a", "tc2") else (0, -1)


def check_support(grid: SpaceTimeGrid, u: np.ndarray, variant: str) -> None:
    """Reject fields that do not vanish where the variant requires."""
    scale = max(1.0, float(np.max(np.abs(u))))
    lateral = u[(slice(None),) + grid.facets.nodes]
    bad = float(np.max(np.abs(lateral)))
    if bad > SUPPORT_TOL * scale:
        raise GridError(f"{variant}: field is not zero on the lateral boundary (max {bad:.3g})")
    _, zero = _end_slices(variant)
    near = 1 if zero == 0 else -2
    bad = max(float(np.max(np.abs(u[zero]))), float(np.max(np.abs(u[near]))))
    if bad > SUPPORT_TOL * scale:
        which = "t=0" if zero == 0 else "t=T"
        raise GridError(f"{variant}: value or velocity at {which} is not zero (max {bad:.3g})")


def _volume_interior(grid, values):
    # plain quadrature on interior nodes, matching norm_interior
    return float(np.sum(values) * grid.dt * grid.h**grid.n_space)


def evaluate_carleman(grid: SpaceTimeGrid, u: np.ndarray, q, lam: float, omega,
                      variant: str, c: float = 1.0) -> CarlemanReport:
    """Both sides of the weighted inequality, one named entry per integral."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    omega = as_direction(omega, grid.n_space)
    check_weight(grid, lam)
    u = grid.check_field(np.asarray(u, dtype=float))
    check_support(grid, u, variant)
    q = np.zeros(grid.shape) if q is None else grid.check_field(q)

    mirror = variant in ("c1b", "tc4")
    sign = 1 if mirror else -1
    observed, _ = _end_slices(variant)
    obs_name = "initial" if mirror else "final"
    part = classify_boundary(grid, omega)
    ft = grid.facets
    nd = np.abs(part.nu_dot_omega)
    # c1a/tc2 observe the shadowed side, c1b/tc4 the illuminated side
    observed_side = part.minus_omega if mirror else part.plus_omega
    other_side = part.plus_omega if mirror else part.minus_omega
    phase = grid.phase(omega)

    if variant in ("c1a", "c1b"):
        wgt = np.exp(sign * 2.0 * lam * phase)
        w_obs = wgt[observed]
        dtu = time_derivative_at(grid, u, 0 if mirror else grid.nt)
        grad = space_gradient(grid, u[observed])
        dnu = neumann_trace(grid, u).values
        lat = wgt[(slice(None),) + ft.nodes] * dnu**2 * nd[None]
        res = apply_wave(grid, u, q)
        lhs = {
            f"lhs_{obs_name}_velocity": lam * integrate_slice(grid, w_obs * dtu**2),
            "lhs_lateral_observed": lam * integrate_lateral(grid, lat[:, observed_side], observed_side),
            "lhs_lambda2_volume": lam**2 * integrate_volume(grid, wgt * u**2),
        }
        rhs = {
            "rhs_residual": _volume_interior(grid, interior(grid, wgt) * res**2),
            f"rhs_lambda3_{obs_name}_value": lam**3 * integrate_slice(grid, w_obs * u[observed] ** 2),
            f"rhs_lambda_{obs_name}_gradient": lam * integrate_slice(
                grid, w_obs * sum(g * g for g in grad)),
            "rhs_lateral_other": lam * integrate_lateral(grid, lat[:, other_side], other_side),
        }
    else:
        v = np.exp(sign * lam * phase) * u
        s = lam if variant == "tc2" else -lam
        pv = apply_damped(grid, v, s, omega)
        dtv = time_derivative_at(grid, v, 0 if mirror else grid.nt)
        grad = space_gradient(grid, v[observed])
        dnu = neumann_trace(grid, v).values
        lat = dnu**2 * nd[None]
        lhs = {
            f"lhs_{obs_name}_velocity": lam * integrate_slice(grid, dtv**2),
            "lhs_lateral_observed": 2.0 * lam * integrate_lateral(grid, lat[:, observed_side], observed_side),
            "lhs_lambda2_volume": c * lam**2 * integrate_volume(grid, v**2),
        }
        rhs = {
            "rhs_residual": _volume_interior(grid, pv**2),
            f"rhs_lambda_{obs_name}_gradient": 14.0 * lam * integrate_slice(
                grid, sum(g * g for g in grad)),
            "rhs_lateral_other": 2.0 * lam * integrate_lateral(grid, lat[:, other_side], other_side),
        }
    return CarlemanReport(variant, float(lam), omega, lhs, rhs)


# ---------------------------------------------------------------- ladders


@dataclass
class LadderSummary:
    lambdas: list
    sup_ratio: list
    reports: list
    bound: float

    @property
    def constant(self) -> float:
        """Empirical constant: the largest ratio seen over the whole ladder."""
        finite = [r for r in self.sup_ratio if math.isfinite(r)]
        return max(finite) if finite else 0.0

    @property
    def within_bound(self) -> bool:
        return all(r < self.bound for r in self.sup_ratio)

    def non_increasing(self, rel_slack: float = 0.0) -> bool:
        r = self.sup_ratio
        return all(b <= a * (1.0 + rel_slack) for a, b in zip(r, r[1:]))


def carleman_ladder(grids: list, ensembles: list, q_list, omega, lambdas,
                    variant: str = "c1a", bound: float = 1e6) -> LadderSummary:
    """Max-over-ensemble ratio per lambda.

    ``grids[i]``, ``ensembles[i]`` and ``q_list[i]`` belong to ``lambdas[i]``
    so that dt can be refined along the ladder.
    """
    if len(grids) != len(lambdas) or len(ensembles) != len(lambdas):
        raise ValueError("one grid and one ensemble per lambda are required")
    sups, reports = [], []
    for grid, ens, q, lam in zip(grids, ensembles, q_list, lambdas):
        if not ens.fields and ens.count:
            raise ValueError("ensemble is empty")
        row = [evaluate_carleman(grid, u, q, lam, omega, variant) for u in ens.fields]
        reports.append(row)
        sups.append(max((r.ratio for r in row), default=0.0))
    return LadderSummary(list(lambdas), sups, reports, bound)
