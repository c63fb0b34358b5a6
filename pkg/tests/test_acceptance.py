"""Acceptance criteria 1 to 9 at their stated tolerances.

Each test records a single verdict line; the lines are printed together in
the pytest terminal summary under "acceptance criteria".
"""

import math
import os
import time

import numpy as np
import pytest

from waveprobe import io as wio
from waveprobe.carleman import carleman_ladder, evaluate_carleman, random_admissible
from waveprobe.cli import main as cli_main
from waveprobe.fields import apply_box, dirichlet_trace
from waveprobe.go import CotangentFrequency, build_decaying_go, build_vanishing_go, project_xi
from waveprobe.grid import (
    cap_sample,
    cfl_nt,
    classify_boundary,
    default_control_sets,
    make_grid,
)
from waveprobe.ibvp import boundary_operator
from waveprobe.inversion import (
    SyntheticProvider,
    admissible_probes,
    fourier_sample,
    obstruction_demo,
    plane_frequencies,
    reconstruct_refined,
)
from waveprobe.potentials import bump, mode
from waveprobe.studies import (
    exact_polynomial_error,
    forward_study,
    identity_study,
    ladder_grid,
    loglog_slope,
    observed_order,
    standing_wave_error,
)

pytestmark = pytest.mark.slow

LAMBDAS = (4.0, 8.0, 16.0)
W = np.array([1.0, 0.0])


def _slope(values):
    return loglog_slope(LAMBDAS, values)


def test_criterion_1_forward_order(verdict):
    poly = max(exact_polynomial_error(make_grid(n, 1.0, 1.0, 2 * nx, nx))
               for n in (1, 2) for nx in (16, 32))
    rows = forward_study([32, 64, 128])
    order = observed_order(rows)
    grid = make_grid(2, 1.0, 1.0, 256, 128)
    t0 = time.perf_counter()
    standing_wave_error(grid)
    runtime = time.perf_counter() - t0
    verdict(1, "forward solver order", poly <= 1e-11 and order >= 1.9 and runtime <= 10.0,
            f"polynomial error {poly:.2e} (<= 1e-11), order {order:.3f} (>= 1.9), "
            f"nx=128 solve {runtime:.2f} s (<= 10 s)")


def test_criterion_2_obstruction(verdict):
    grid = make_grid(2, 1.0, 1.0, 91, 64)
    ctrl = default_control_sets(grid, W, 0.1)
    probes = admissible_probes(grid, ctrl, 5, seed=11)
    hidden = obstruction_demo(grid, bump(grid, 1.0, 0.1, t_off=0.3), probes, ctrl)
    moved = obstruction_demo(grid, bump(grid, 1.0, 0.1, center=(0.5, 0.15), t_off=0.3),
                             probes, ctrl, require_hidden=False)
    ok = (len(probes) >= 5 and hidden.support_in_hidden_region
          and hidden.max_difference <= 1e-12 and moved.max_difference >= 1e-4)
    verdict(2, "finite speed obstruction", ok,
            f"hidden support diff {hidden.max_difference:.1e} (<= 1e-12) over {len(probes)} probes, "
            f"moved support diff {moved.max_difference:.2e} (>= 1e-4)")


def test_criterion_3_decaying_remainder(verdict):
    xi_raw = (0.0, 0.0, math.pi / 2)
    slopes, iters = {}, []
    for label, make_q in (("q=0", lambda g: None), ("bump", lambda g: bump(g, 1.0, 0.3))):
        norms = []
        for lam in LAMBDAS:
            grid = ladder_grid(2, 1.0, 1.0, 32, lam, steps_per_lambda=16)
            q = make_q(grid)
            assert q is None or abs(np.max(np.abs(q)) - 1.0) < 1e-12
            sol = build_decaying_go(grid, q, lam, W, project_xi(xi_raw, W))
            norms.append(sol.remainder_norm)
            if lam >= 8:
                iters.append(sol.iterations)
        slopes[label] = _slope(norms)
    ok = all(s <= -0.8 for s in slopes.values()) and max(iters) <= 8
    verdict(3, "decaying probe remainder", ok,
            ", ".join(f"slope {k} {v:.3f}" for k, v in slopes.items())
            + f" (<= -0.8), max iterations {max(iters)} (<= 8)")


def test_criterion_4_vanishing_remainder(verdict):
    slopes, zeros = {}, 0.0
    for method in ("damped_ibvp", "spacetime_lsq"):
        norms = []
        for lam in LAMBDAS:
            grid = ladder_grid(2, 1.0, 1.0, 0, lam, steps_per_lambda=16, nx_per_lambda=8)
            sol = build_vanishing_go(grid, bump(grid, 1.0, 0.3), lam, W, 0.1, method=method)
            norms.append(sol.remainder_norm)
            u = np.real(sol.field)
            shadow = classify_boundary(grid, W).nu_dot_omega <= -0.05
            lat = dirichlet_trace(grid, u).values[:, shadow]
            scale = max(np.max(np.abs(u)), 1.0)
            zeros = max(zeros, np.max(np.abs(u[0])) / scale, np.max(np.abs(lat)) / scale)
        slopes[method] = _slope(norms)
    ok = all(s <= -0.35 for s in slopes.values()) and zeros <= 1e-10
    verdict(4, "vanishing probe remainder", ok,
            ", ".join(f"slope {k} {v:.3f}" for k, v in slopes.items())
            + f" (<= -0.35), relative zeros {zeros:.1e} (<= 1e-10)")


def test_criterion_5_carleman(verdict):
    sups = {}
    for nx in (64, 128):
        grids, ens = [], []
        for lam in LAMBDAS:
            nt = max(int(16 * lam), cfl_nt(2, 1.0, 1.0, nx))
            grid = make_grid(2, 1.0, 1.0, nt, nx)
            grids.append(grid)
            ens.append(random_admissible(grid, None, "c1a", seed=7, count=20))
        summary = carleman_ladder(grids, ens, [None] * 3, W, LAMBDAS, "c1a")
        sups[nx] = summary
    finite = all(math.isfinite(r) and r > 0 for s in sups.values() for r in s.sup_ratio)
    monotone = all(s.non_increasing() for s in sups.values())
    drift = max(abs(a - b) / b for a, b in zip(sups[64].sup_ratio, sups[128].sup_ratio))

    grid = make_grid(2, 1.0, 1.0, 64, 32)
    q = bump(grid, 1.0, 0.3, time="sin")
    refl = 0.0
    for lam in LAMBDAS:
        for ub in random_admissible(grid, q, "c1b", seed=7, count=3).fields:
            rb = evaluate_carleman(grid, ub, q, lam, W, "c1b")
            ra = evaluate_carleman(grid, np.ascontiguousarray(ub[::-1]),
                                   np.ascontiguousarray(q[::-1]), lam, -W, "c1a")
            ta = {**ra.lhs_terms, **ra.rhs_terms}
            scale = math.exp(2 * lam * grid.T)
            for k, vb in {**rb.lhs_terms, **rb.rhs_terms}.items():
                va = ta[k.replace("initial", "final")]
                refl = max(refl, abs(vb - scale * va) / max(abs(vb), 1e-300))
    ok = finite and monotone and drift <= 0.10 and refl <= 1e-10
    ratios = "; ".join(f"nx={nx} " + ", ".join(f"{r:.4f}" for r in s.sup_ratio)
                       for nx, s in sups.items())
    verdict(5, "Carleman boundedness", ok,
            f"sup ratios {ratios}, non-increasing {monotone}, nx drift {drift:.3f} (<= 0.10), "
            f"reflection {refl:.1e} (<= 1e-10)")


def test_criterion_6_identity(verdict):
    rows = identity_study([32, 64, 128], lambda g: bump(g, 1.0, 0.3), lam=8.0)
    at64 = dict((r[0], r[2]) for r in rows)[64]
    order = observed_order(rows)
    verdict(6, "integral identity", at64 <= 0.05 and order >= 1.5,
            f"mismatch at nx=64 {at64:.2e} (<= 5e-2), order {order:.2f} (>= 1.5)")


def test_criterion_7_fourier_sampling(verdict):
    xi = CotangentFrequency(np.array([math.pi, math.pi, 0.0]), W)
    errors = []
    for lam in LAMBDAS:
        grid = ladder_grid(2, 1.0, 1.0, 0, lam, steps_per_lambda=16, nx_per_lambda=8)
        ctrl = default_control_sets(grid, W, 0.5)
        q2 = bump(grid, 1.0, 0.4, time="sin")
        s = fourier_sample(grid, None, SyntheticProvider(grid, q2, ctrl), lam, W, xi, ctrl, truth=q2)
        errors.append(s.abs_error)
    slope = _slope(errors)
    grid = make_grid(2, 1.0, 1.0, 128, 64)
    ctrl = default_control_sets(grid, W, 0.5)
    q1 = bump(grid, 1.0, 0.4, time="sin")
    null = abs(fourier_sample(grid, q1, SyntheticProvider(grid, q1, ctrl), 16.0, W, xi, ctrl).estimate)
    verdict(7, "Fourier sampling", slope <= -0.3 and null <= 1e-8,
            "errors " + ", ".join(f"{e:.2e}" for e in errors)
            + f", slope {slope:.3f} (<= -0.3), null estimate {null:.1e} (<= 1e-8)")


RECON_PASSES = 5


def _reconstruction(q_fn):
    grid = make_grid(2, 1.0, 1.0, 128, 64)
    ctrl = default_control_sets(grid, W, 0.5)
    omegas = cap_sample(W, 0.5, 9)
    xis = [plane_frequencies(w, math.pi * np.arange(-2, 3)) for w in omegas]
    q = q_fn(grid)
    t0 = time.perf_counter()
    rep = reconstruct_refined(grid, None, SyntheticProvider(grid, q, ctrl), omegas, xis, 16.0,
                              1e-3, ctrl, refine=RECON_PASSES - 1, truth=q, modes="union")
    return rep, time.perf_counter() - t0, sum(len(x) for x in xis)


def test_criterion_8_mode_reconstruction(verdict):
    rep, runtime, n = _reconstruction(lambda g: mode(g, [math.pi, math.pi, 0.0]))
    verdict(8, "reconstruction of a sampled mode", rep.relative_error <= 0.10 and runtime <= 600,
            f"{n} samples, pass errors " + ", ".join(f"{e:.3f}" for e in rep.pass_errors)
            + f" (final <= 0.10), unsampled fraction {rep.unsampled_fraction:.3f}, "
            f"runtime {runtime:.0f} s (<= 600 s)")


def test_criterion_8_bump_reconstruction(verdict):
    rep, runtime, n = _reconstruction(lambda g: bump(g, 1.0, 0.5, time="sin"))
    verdict(8, "reconstruction of a smooth bump", rep.relative_error <= 0.30 and runtime <= 600,
            f"{n} samples, pass errors " + ", ".join(f"{e:.3f}" for e in rep.pass_errors)
            + f" (final <= 0.30), unsampled fraction {rep.unsampled_fraction:.3f}, "
            f"runtime {runtime:.0f} s (<= 600 s)")


SUBCOMMAND_CFG = """
grid.nx = 16
probe.lambdas = 4, 6
probe.steps_per_lambda = 8
probe.omega_count = 2
probe.eta = -1, 0, 1
probe.epsilon = 0.5
potential.kind = bump
run.count = 3
run.lambda = 4
run.nx_list = 8, 16
run.basis = sampled
"""


def test_criterion_9_infrastructure(verdict, tmp_path, rng):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(SUBCOMMAND_CFG)
    identical = True
    for sub in ("forward", "go", "carleman", "probe", "reconstruct", "obstruct", "convergence"):
        outs = []
        for k in range(2):
            d = tmp_path / f"{sub}{k}"
            assert cli_main([sub, "--config", str(cfg), "--out", str(d), "--seed", "5"]) == 0
            outs.append({n: (d / n).read_bytes() for n in sorted(os.listdir(d))})
        identical &= outs[0] == outs[1] and bool(outs[0])

    grid = make_grid(2, 1.0, 1.0, 32, 16)
    ctrl = default_control_sets(grid, W, 0.1)
    field = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    g2, back = wio.parse_field(wio.dump_field(grid, field).encode())
    ds = boundary_operator(grid, bump(grid), admissible_probes(grid, ctrl, 1, seed=3)[0],
                           np.zeros(grid.space_shape), ctrl)
    ds2 = wio.parse_dataset(wio.dump_dataset(ds).encode())
    roundtrip = (np.array_equal(back, field)
                 and (g2.n_space, g2.nt, g2.nx, g2.T, g2.L) == (grid.n_space, grid.nt, grid.nx, grid.T, grid.L)
                 and all(
        np.array_equal(getattr(ds, k), getattr(ds2, k))
        for k in ("g", "v1", "neumann_G", "final_value", "F_facets", "G_facets")))

    green = 0.0
    for n in (1, 2):
        grid = make_grid(n, 1.0, 1.0, 40, 16)
        mask = np.zeros(grid.shape, bool)
        mask[(slice(2, -2),) * (n + 1)] = True
        u, v = (np.where(mask, rng.standard_normal(grid.shape), 0.0) for _ in range(2))
        lhs = np.sum(apply_box(grid, u) * v[grid.interior])
        rhs = np.sum(u[grid.interior] * apply_box(grid, v))
        green = max(green, abs(lhs - rhs) / (np.linalg.norm(u) * np.linalg.norm(v)))
    verdict(9, "infrastructure", identical and roundtrip and green <= 1e-10,
            f"subcommands bitwise repeatable {identical}, save/load bitwise {roundtrip}, "
            f"Green identity defect {green:.1e} (<= 1e-10)")
