"""Probe experiments, the integral identity, Fourier sampling and reconstruction.

Setting: u1 is a decaying probe for q1, u2 a vanishing probe whose lateral
trace and initial velocity (g, v1) are admissible inputs. With w1 and ~u2
the IBVP solutions for q1 and q2 driven by (g, v1), u = w1 - ~u2 has zero
Cauchy data and zero lateral values, and (Box + q1) u = (q2 - q1) ~u2.
Green's formula then gives

    int_Q q ~u2 u1 = int_Omega (u1(T) d_t u(T) - u(T) d_t u1(T))
                     - int_Sigma d_nu u u1  + int_Q u (Box + q1) u1,

whose last term vanishes up to the probe residual. Only (g, v1) and the
observed traces of ~u2 enter the right-hand side.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .fields import neumann_trace, norm_L2_Q, time_derivative_at
from .go import (
    CotangentFrequency,
    GoSolution,
    build_decaying_go,
    build_vanishing_go,
    null_rate,
    plane_wave,
    vanishing_initial_velocity,
)
from .grid import (
    ControlSets,
    GridError,
    SpaceTimeGrid,
    as_direction,
    classify_boundary,
    discrete_hidden_mask,
    hidden_region_mask,
    integrate_lateral,
    integrate_slice,
    integrate_volume,
    trapezoid_weights,
)
from .ibvp import (
    BoundaryDataset,
    IbvpProblem,
    boundary_operator,
    check_input_support,
    full_dirichlet,
    solve_ibvp,
)

INVARIANT_TOL = 1e-9


def _cint_volume(grid, f):
    return complex(integrate_volume(grid, f.real), integrate_volume(grid, f.imag))


def _cint_slice(grid, f):
    return complex(integrate_slice(grid, f.real), integrate_slice(grid, f.imag))


def _cint_lateral(grid, f, facets):
    return complex(integrate_lateral(grid, f.real, facets), integrate_lateral(grid, f.imag, facets))


def _dt_end(grid, u):
    if np.iscomplexobj(u):
        return time_derivative_at(grid, u.real, grid.nt) + 1j * time_derivative_at(grid, u.imag, grid.nt)
    return time_derivative_at(grid, u, grid.nt)


def fourier_normalization(n_space: int) -> float:
    return (2.0 * math.pi) ** (-(n_space + 1) / 2.0)


def fourier_reference(grid: SpaceTimeGrid, q, xi) -> complex:
    """(2 pi)^(-(n+1)/2) int_Q q exp(-i xi.(t,x)) by the trapezoid rule."""
    xi = xi.xi if isinstance(xi, CotangentFrequency) else np.asarray(xi, float)
    return fourier_normalization(grid.n_space) * _cint_volume(grid, np.asarray(q) * plane_wave(grid, xi))


# ---------------------------------------------------------------- probe experiment


def probe_input(grid: SpaceTimeGrid, u2: GoSolution):
    """(g, v1) read off a vanishing probe: its lateral trace and initial velocity."""
    g = full_dirichlet(grid, np.real(u2.field))
    v1 = vanishing_initial_velocity(grid, u2.lam, u2.omega)
    return g, v1


@dataclass
class ProbeExperiment:
    grid: SpaceTimeGrid
    q1: np.ndarray
    q2: np.ndarray
    control: ControlSets
    lam: float
    omega: np.ndarray
    xi: CotangentFrequency
    u1: GoSolution
    u2: GoSolution
    g: np.ndarray
    v1: np.ndarray
    u2_ibvp: np.ndarray
    w1: np.ndarray
    u: np.ndarray
    invariant_norms: dict = field(default_factory=dict)


def run_probe(grid: SpaceTimeGrid, q1, q2, lam: float, omega, xi: CotangentFrequency,
              control: ControlSets, epsilon: float | None = None,
              method: str = "damped_ibvp", backend: str | None = None) -> ProbeExperiment:
    """Build both probes, drive q1 and q2 with the vanishing probe's data, subtract."""
    omega = as_direction(omega, grid.n_space)
    q1 = np.zeros(grid.shape) if q1 is None else grid.check_field(q1)
    q2 = np.zeros(grid.shape) if q2 is None else grid.check_field(q2)
    eps = control.epsilon if epsilon is None else epsilon
    u1 = build_decaying_go(grid, q1, lam, omega, xi, backend=backend)
    u2 = build_vanishing_go(grid, q2, lam, omega, eps, method=method, backend=backend)
    g, v1 = probe_input(grid, u2)
    check_input_support(grid, g, control)
    u2_ibvp = solve_ibvp(IbvpProblem(grid, q=q2, dirichlet=g, v1=v1), backend=backend)
    w1 = solve_ibvp(IbvpProblem(grid, q=q1, dirichlet=g, v1=v1), backend=backend)
    u = w1 - u2_ibvp
    scale = max(norm_L2_Q(grid, u), 1e-300)
    norms = {
        "initial_value": float(np.max(np.abs(u[0]))),
        # the start-up step makes (u^1 - u^0)/dt the discrete initial velocity
        "initial_velocity": float(np.max(np.abs(u[1] - u[0]))) / grid.dt,
        "lateral": float(np.max(np.abs(full_dirichlet(grid, u)))),
    }
    # u is an exact difference of two marches with equal data; anything above
    # roundoff means the data were not imposed identically
    ref = max(float(np.max(np.abs(w1))), 1.0)
    for k, v in norms.items():
        if v > INVARIANT_TOL * ref:
            raise GridError(f"probe difference violates zero {k} data: {v:.3g} (|u| = {scale:.3g})")
    return ProbeExperiment(grid, q1, q2, control, float(lam), omega, xi, u1, u2, g, v1,
                           u2_ibvp, w1, u, norms)


@dataclass
class IdentityCheck:
    volume_side: complex
    boundary_side: complex
    mismatch: float


def identity_check(exp: ProbeExperiment) -> IdentityCheck:
    grid = exp.grid
    u1 = exp.u1.field
    u = exp.u
    q = exp.q2 - exp.q1
    vol = _cint_volume(grid, q * exp.u2_ibvp * u1)
    ft = grid.facets
    allf = np.arange(ft.count)
    dnu = neumann_trace(grid, u).values
    u1_lat = u1[(slice(None),) + ft.nodes]
    bdry = _cint_slice(grid, u1[-1] * _dt_end(grid, u) - u[-1] * _dt_end(grid, u1))
    bdry -= _cint_lateral(grid, dnu * u1_lat, allf)
    floor = np.finfo(float).tiny
    mismatch = abs(vol - bdry) / (abs(vol) + abs(bdry) + floor)
    return IdentityCheck(vol, bdry, float(mismatch))


# ---------------------------------------------------------------- data-only sampling


class SyntheticProvider:
    """Dataset provider that solves the forward problem for a stored potential."""

    def __init__(self, grid: SpaceTimeGrid, q, control: ControlSets, potential_id: str = "",
                 backend: str | None = None):
        self.grid = grid
        self._q = q
        self.control = control
        self.potential_id = potential_id
        self.backend = backend

    def __call__(self, g, v1) -> BoundaryDataset:
        return boundary_operator(self.grid, self._q, g, v1, self.control,
                                 self.potential_id, self.backend)


@dataclass
class FourierSample:
    xi: CotangentFrequency
    lam: float
    omega: np.ndarray
    estimate: complex
    reference: complex | None = None

    @property
    def abs_error(self) -> float | None:
        if self.reference is None:
            return None
        return abs(self.estimate - self.reference)


@dataclass
class DirectionData:
    """Everything a direction contributes independently of xi."""

    omega: np.ndarray
    lam: float
    rate: float
    G_facets: np.ndarray
    dnu_G: np.ndarray
    final_u: np.ndarray


def check_unobserved(grid: SpaceTimeGrid, control: ControlSets, omega) -> None:
    """The facets outside G must all face along omega by more than epsilon."""
    nd = classify_boundary(grid, omega).nu_dot_omega
    outside = np.setdiff1d(np.arange(grid.facets.count), control.G_facets)
    if outside.size and np.min(nd[outside]) <= control.epsilon:
        raise GridError(f"unobserved facets are not contained in nu.omega > {control.epsilon} for omega={omega}")


def direction_data(grid: SpaceTimeGrid, q1, provider, lam: float, omega, control: ControlSets,
                   epsilon: float | None = None, backend: str | None = None) -> DirectionData:
    """Probe input from the q1 vanishing probe, measured response, and the q1 reference run."""
    omega = as_direction(omega, grid.n_space)
    q1 = np.zeros(grid.shape) if q1 is None else grid.check_field(q1)
    eps = control.epsilon if epsilon is None else epsilon
    check_unobserved(grid, control, omega)
    u2 = build_vanishing_go(grid, q1, lam, omega, eps, backend=backend)
    g, v1 = probe_input(grid, u2)
    check_input_support(grid, g, control)
    ds = provider(g, v1)
    if not np.array_equal(ds.G_facets, control.G_facets):
        raise GridError("dataset observation set differs from the control set G")
    w1 = solve_ibvp(IbvpProblem(grid, q=q1, dirichlet=g, v1=v1), backend=backend)
    G = np.asarray(control.G_facets)
    dnu_G = neumann_trace(grid, w1, G).values - ds.neumann_G
    final_u = w1[-1] - ds.final_value
    return DirectionData(omega, float(lam), null_rate(grid, lam, omega), G, dnu_G, final_u)


def sample_from_direction(grid: SpaceTimeGrid, q1, dd: DirectionData, xi: CotangentFrequency,
                          reference: complex | None = None, backend: str | None = None) -> FourierSample:
    """Estimate F(q2 - q1)(xi) from measured traces only.

    Uses  -int_G d_nu u u1 + int_Omega u(T) (a u1(T) - d_t u1(T)),  i.e. the
    identity with the unobserved Sigma minus G term dropped and d_t u(T)
    replaced by a u(T), a the probe's time rate (u grows like exp(a t)).
    """
    u1 = build_decaying_go(grid, q1, dd.lam, dd.omega, xi, backend=backend).field
    ft = grid.facets
    u1_G = u1[(slice(None),) + tuple(a[dd.G_facets] for a in ft.nodes)]
    lateral = _cint_lateral(grid, dd.dnu_G * u1_G, dd.G_facets)
    final = _cint_slice(grid, dd.final_u * (dd.rate * u1[-1] - _dt_end(grid, u1)))
    est = fourier_normalization(grid.n_space) * (final - lateral)
    return FourierSample(xi, dd.lam, dd.omega, est, reference)


def fourier_sample(grid: SpaceTimeGrid, q1, provider, lam: float, omega, xi: CotangentFrequency,
                   control: ControlSets, epsilon: float | None = None, truth=None,
                   backend: str | None = None) -> FourierSample:
    """One data-only sample; ``truth`` (q2 - q1), when given, only fills the reference."""
    dd = direction_data(grid, q1, provider, lam, omega, control, epsilon, backend)
    ref = None if truth is None else fourier_reference(grid, truth, xi)
    return sample_from_direction(grid, q1, dd, xi, ref, backend)


# ---------------------------------------------------------------- reconstruction


def _jobs():
    import os

    raw = os.environ.get("WAVEPROBE_THREADS", "")
    try:
        n = int(raw) if raw else 0
    except ValueError:
        n = 0
    return max(n, 0)


def _map(fn, items, threads):
    items = list(items)
    if threads and threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(it) for it in items]


def unique_frequencies(xis) -> np.ndarray:
    """Distinct frequencies up to sign (q real makes xi and -xi redundant)."""
    out = []
    for x in xis:
        x = np.asarray(x, float)
        if any(np.allclose(x, y, atol=1e-12) or np.allclose(x, -y, atol=1e-12) for y in out):
            continue
        out.append(x)
    return np.array(out)


def lattice_modes(n_space: int, order: int, step: float = math.pi) -> np.ndarray:
    """Frequencies step * (a, b, ...) with every |index| <= order, one per sign pair.

    With step = pi these are the modes of the period-2 extension of Q, a
    small basis that stays well conditioned against cone-shaped sample sets.
    """
    grid = np.array(list(itertools.product(range(-order, order + 1), repeat=n_space + 1)), float)
    return unique_frequencies(step * grid)


BASES = ("sampled", "lattice", "union")


def fit_basis(kind: str, n_space: int, frequencies, order: int = 1) -> np.ndarray:
    """Fit modes by name: the sampled frequencies, a lattice box, or both."""
    if kind not in BASES:
        raise GridError(f"unknown basis {kind!r}, expected one of {', '.join(BASES)}")
    sampled = unique_frequencies(np.atleast_2d(np.asarray(frequencies, float)))
    if kind == "sampled":
        return sampled
    lattice = lattice_modes(n_space, order)
    if kind == "lattice":
        return lattice
    return unique_frequencies(np.vstack([lattice, sampled]))


def mode_matrix(grid: SpaceTimeGrid, modes: np.ndarray, xis: np.ndarray) -> np.ndarray:
    """Real map from mode coefficients to stacked (Re, Im) transforms at ``xis``.

    Modes are cos(k.(t,x)) and sin(k.(t,x)) on Q (no sin for k = 0); the
    transform of a product of exponentials factors into 1D trapezoid sums.
    """
    tw = trapezoid_weights(grid.nt, grid.dt)
    xw = trapezoid_weights(grid.nx, grid.h)
    coords = [grid.t] + [grid.x] * grid.n_space
    weights = [tw] + [xw] * grid.n_space

    def transform(k):  # int_Q exp(i k.(t,x)) exp(-i xi.(t,x)) for every xi
        acc = np.ones(len(xis), dtype=complex)
        for a in range(grid.n_space + 1):
            acc *= np.exp(1j * np.outer(k[a] - xis[:, a], coords[a])) @ weights[a]
        return acc

    cols = []
    for k in modes:
        ep = transform(k)
        em = transform(-k)
        cols.append(0.5 * (ep + em))
        if np.any(k != 0):
            cols.append((ep - em) / 2j)
    M = np.array(cols).T * fourier_normalization(grid.n_space)
    return np.vstack([M.real, M.imag])


def mode_fields(grid: SpaceTimeGrid, modes: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    out = np.zeros(grid.shape)
    i = 0
    for k in modes:
        arg = k[0] * grid.time_column() + np.zeros(grid.shape)
        for a, xa in enumerate(grid.space_coords):
            arg = arg + k[a + 1] * xa[None]
        out += coeffs[i] * np.cos(arg)
        i += 1
        if np.any(k != 0):
            out += coeffs[i] * np.sin(arg)
            i += 1
    return out


@dataclass
class ReconstructionReport:
    frequencies: np.ndarray
    mu: float
    q_est: np.ndarray
    relative_error: float | None
    residuals: np.ndarray
    samples: list
    modes: np.ndarray
    unsampled_fraction: float | None = None
    passes: int = 1
    pass_errors: list = field(default_factory=list)

    @property
    def residual_norm(self) -> float:
        return float(np.linalg.norm(self.residuals))


def fit_modes(grid: SpaceTimeGrid, xis, data, mu: float, modes=None):
    """Tikhonov fit of a cos/sin series on Q to sampled transforms ``data`` at ``xis``.

    ``mu`` is relative to the mean diagonal of the normal matrix.
    Returns (q_est, coefficients, per-frequency residuals, modes).
    """
    if mu <= 0:
        raise GridError("mu must be > 0")
    xis = np.atleast_2d(np.asarray(xis, float))
    modes = unique_frequencies(xis) if modes is None else np.atleast_2d(np.asarray(modes, float))
    A = mode_matrix(grid, modes, xis)
    d = np.asarray(data, dtype=complex)
    y = np.concatenate([d.real, d.imag])
    if A.shape[1] > A.shape[0]:
        raise GridError(f"underdetermined fit: {A.shape[1]} real unknowns from {A.shape[0]} real data")
    N = A.T @ A
    scale = float(np.trace(N)) / N.shape[0]
    if scale == 0.0:
        scale = 1.0
    c = np.linalg.solve(N + mu * scale * np.eye(N.shape[0]), A.T @ y)
    r = A @ c - y
    m = len(d)
    per = np.hypot(r[:m], r[m:])
    return mode_fields(grid, modes, c), c, per, modes


def sampled_projection(grid: SpaceTimeGrid, q, modes, mu: float = 1e-10) -> np.ndarray:
    """Fit of q from its exact transforms at ``modes`` (the best any fit can do)."""
    modes = np.atleast_2d(np.asarray(modes, float))
    data = [fourier_reference(grid, q, k) for k in modes]
    q_est, *_ = fit_modes(grid, modes, data, mu, modes)
    return q_est


def reconstruct(grid: SpaceTimeGrid, q1, provider, omegas, xi_lists, lam: float, mu: float,
                control: ControlSets, epsilon: float | None = None, truth=None,
                threads: int | None = None, backend: str | None = None,
                modes=None) -> ReconstructionReport:
    """Sample F(q2 - q1) on the given (omega, xi) pairs and fit q on Q.

    ``xi_lists[i]`` holds the frequencies paired with ``omegas[i]``. The fit
    basis defaults to the sampled frequencies; ``modes`` replaces it with an
    explicit array or a ``fit_basis`` name. The unsampled fraction always
    refers to the sampled frequencies.
    """
    if len(omegas) != len(xi_lists):
        raise ValueError("one xi list per direction is required")
    threads = _jobs() if threads is None else threads
    q1 = np.zeros(grid.shape) if q1 is None else grid.check_field(q1)
    dds = _map(lambda w: direction_data(grid, q1, provider, lam, w, control, epsilon, backend),
               omegas, threads)
    jobs = [(dd, xi) for dd, xis in zip(dds, xi_lists) for xi in xis]

    def one(job):
        dd, xi = job
        ref = None if truth is None else fourier_reference(grid, truth, xi)
        return sample_from_direction(grid, q1, dd, xi, ref, backend)

    samples = _map(one, jobs, threads)
    freqs = np.array([smp.xi.xi for smp in samples])
    if isinstance(modes, str):
        modes = fit_basis(modes, grid.n_space, freqs)
    q_est, _, per, modes = fit_modes(grid, freqs, [smp.estimate for smp in samples], mu, modes)
    rel = unsampled = None
    if truth is not None:
        tn = norm_L2_Q(grid, truth)
        rel = norm_L2_Q(grid, q_est - truth) / tn if tn > 0 else norm_L2_Q(grid, q_est)
        if tn > 0:
            best = sampled_projection(grid, truth, unique_frequencies(freqs))
            unsampled = (norm_L2_Q(grid, truth - best) / tn) ** 2
    return ReconstructionReport(freqs, float(mu), q_est, rel, per, samples, modes, unsampled)


def reconstruct_refined(grid: SpaceTimeGrid, q1, provider, omegas, xi_lists, lam: float,
                        mu: float, control: ControlSets, refine: int = 0,
                        epsilon: float | None = None, truth=None, threads: int | None = None,
                        backend: str | None = None, modes=None) -> ReconstructionReport:
    """``reconstruct`` followed by ``refine`` correction passes.

    Each pass re-linearizes about the current estimate: q1 + q_est becomes
    the known potential and the data-only samples of the remaining
    difference are fitted again. The sample errors are proportional to that
    difference, so the passes contract toward the fit of exact samples.
    """
    q1 = np.zeros(grid.shape) if q1 is None else grid.check_field(q1)
    acc = np.zeros(grid.shape)
    errors = []
    rep = None
    for k in range(refine + 1):
        rest = None if truth is None else truth - acc
        rep = reconstruct(grid, q1 + acc, provider, omegas, xi_lists, lam, mu, control,
                          epsilon, rest, threads, backend, modes)
        acc = acc + rep.q_est
        if truth is not None:
            errors.append(_relative(grid, acc, truth))
    rep.q_est = acc
    rep.passes = refine + 1
    rep.pass_errors = errors
    if truth is not None:
        rep.relative_error = errors[-1]
        tn = norm_L2_Q(grid, truth)
        if tn > 0:
            best = sampled_projection(grid, truth, unique_frequencies(rep.frequencies))
            rep.unsampled_fraction = (norm_L2_Q(grid, truth - best) / tn) ** 2
    return rep


def _relative(grid, est, truth):
    tn = norm_L2_Q(grid, truth)
    return norm_L2_Q(grid, est - truth) / tn if tn > 0 else norm_L2_Q(grid, est)


def plane_frequencies(omega, values) -> list:
    """xi = (omega.eta, eta) for eta on the tensor grid ``values`` x ... x ``values``."""
    omega = np.atleast_1d(np.asarray(omega, float))
    etas = np.array(np.meshgrid(*[values] * omega.size, indexing="ij")).reshape(omega.size, -1).T
    return [CotangentFrequency(np.concatenate([[omega @ e], e]), omega) for e in etas]


# ---------------------------------------------------------------- obstruction


@dataclass
class ObstructionReport:
    max_difference: float
    per_probe: list
    support_in_hidden_region: bool
    support_in_discrete_region: bool


def admissible_probes(grid: SpaceTimeGrid, control: ControlSets, count: int, seed: int) -> list:
    """Random lateral inputs on F: smooth in time, zero at t = 0 and at face ends."""
    rng = np.random.default_rng(seed)
    ft = grid.facets
    out = []
    along = np.zeros(ft.count)
    for f in range(ft.count):
        if grid.n_space == 1:
            along[f] = 1.0
        else:
            axis = ft.face[f] // 2
            other = 1 - axis
            along[f] = math.sin(math.pi * grid.x[ft.nodes[other][f]] / grid.L)
    inF = np.zeros(ft.count, dtype=bool)
    inF[np.asarray(control.F_facets)] = True
    for _ in range(count):
        a = rng.standard_normal(3)
        freq = rng.uniform(1.0, 4.0)
        tt = grid.t / grid.T
        prof = (a[0] + a[1] * np.sin(freq * math.pi * tt) + a[2] * np.cos(freq * math.pi * tt))
        time = np.sin(0.5 * math.pi * tt) ** 2 * prof
        g = time[:, None] * (along * inF)[None, :]
        # corner nodes shared with a face outside F must be zero on both copies
        g[:, _outside_corner(grid, inF)] = 0.0
        out.append(g)
    return out


def _outside_corner(grid, inF):
    flat = np.ravel_multi_index(grid.facets.nodes, grid.space_shape)
    bad = np.zeros(int(np.prod(grid.space_shape)), dtype=bool)
    bad[flat[~inF]] = True
    return bad[flat]


def obstruction_demo(grid: SpaceTimeGrid, q_hidden, probes: list, control: ControlSets,
                     require_hidden: bool = True, backend: str | None = None) -> ObstructionReport:
    """max over probes of |B_q(g, 0) - B_0(g, 0)| over both observed blocks."""
    q_hidden = grid.check_field(q_hidden)
    supp = q_hidden != 0
    in_cont = not np.any(supp & ~hidden_region_mask(grid))
    in_disc = not np.any(supp & ~discrete_hidden_mask(grid))
    if require_hidden and not in_cont:
        raise GridError("potential support leaves the hidden region dist(x, boundary) > t")
    diffs = []
    v1 = np.zeros(grid.space_shape)
    for g in probes:
        a = boundary_operator(grid, q_hidden, g, v1, control, backend=backend)
        b = boundary_operator(grid, None, g, v1, control, backend=backend)
        d = max(float(np.max(np.abs(a.neumann_G - b.neumann_G), initial=0.0)),
                float(np.max(np.abs(a.final_value - b.final_value))))
        diffs.append(d)
    return ObstructionReport(max(diffs, default=0.0), diffs, in_cont, in_disc)
