import math

import numpy as np
import pytest

from waveprobe.fields import apply_box, dirichlet_trace
from waveprobe.go import (
    CotangentFrequency,
    GoConvergenceError,
    build_decaying_go,
    build_vanishing_go,
    cutoff_value,
    make_cutoff,
    null_rate,
    probe_phase,
    project_xi,
)
from waveprobe.grid import GridError, classify_boundary, make_grid
from waveprobe.potentials import bump

W = np.array([1.0, 0.0])


@pytest.fixture(scope="module")
def g():
    return make_grid(2, 1.0, 1.0, 64, 16)


def test_projection_is_orthogonal():
    w = np.array([0.6, 0.8])
    xi = project_xi([1.0, 2.0, -3.0], w)
    assert abs(xi.xi @ np.array([1.0, -0.6, -0.8])) <= 1e-12
    with pytest.raises(GridError):
        CotangentFrequency(np.array([1.0, 0.0, 0.0]), w)


def test_documented_projection_lands_on_null_cone():
    xi = project_xi([2 * math.pi, 0.0, 0.0], W).xi
    assert np.allclose(xi, [math.pi, math.pi, 0.0])
    assert xi[0] ** 2 == pytest.approx(xi[1] ** 2 + xi[2] ** 2)


def test_null_phase_is_discrete_null_solution(g):
    for sign in (1, -1):
        u = np.exp(sign * probe_phase(g, 6.0, W))
        assert np.max(np.abs(apply_box(g, u))) <= 1e-10 * np.max(np.abs(u))
    assert null_rate(g, 6.0, W) == pytest.approx(6.0, rel=0.02)


def test_decaying_probe_with_zero_potential_needs_one_sweep(g):
    sol = build_decaying_go(g, None, 4.0, W, project_xi([0.0, 0.0, math.pi / 2], W))
    assert sol.iterations == 1
    assert sol.residual_norm < 0.05


def test_decaying_probe_is_trivial_for_null_frequency(g):
    sol = build_decaying_go(g, None, 4.0, W, project_xi([0.0, 0.0, 0.0], W))
    assert sol.remainder_norm == 0.0
    assert sol.residual_norm <= 1e-10


def test_decaying_fixed_point_contracts(g):
    q = bump(g, 1.0, 0.3)
    sol = build_decaying_go(g, q, 6.0, W, project_xi([0.0, 0.0, math.pi / 2], W))
    assert sol.iterations <= 8
    assert all(r < 0.9 for r in sol.ratios)


def test_fixed_point_failure_reports_ratios(g):
    q = bump(g, 1.0, 0.3)
    with pytest.raises(GoConvergenceError) as err:
        build_decaying_go(g, q, 4.0, W, project_xi([0.0, 0.0, math.pi / 2], W), k_max=2)
    assert len(err.value.ratios) == 1


def test_solver_windows(g):
    xi = project_xi([0.0, 0.0, 1.0], W)
    with pytest.raises(GridError, match="exceed 1"):
        build_decaying_go(g, None, 1.0, W, xi)
    with pytest.raises(GridError, match="dt"):
        build_decaying_go(g, None, 80.0, W, xi)


def test_cutoff_profile_values():
    assert cutoff_value(-1.0, 0.1) == 1.0
    assert cutoff_value(0.0, 0.1) == 0.0
    assert cutoff_value(-0.05, 0.1) == 1.0
    assert cutoff_value(-0.1 / 3, 0.1) == 0.0
    mid = float(cutoff_value(-0.25 / 6, 0.1))
    assert mid == pytest.approx(0.5)


def test_cutoff_corner_nodes_take_larger_value(g):
    prof = make_cutoff(g, W, 0.1)
    ft = g.facets
    corner = np.flatnonzero((ft.face == 2) & (ft.nodes[0] == 0))
    assert prof.values[corner] == 0.0 and prof.node_values[corner] == 1.0


@pytest.mark.parametrize("method", ["damped_ibvp", "spacetime_lsq"])
def test_vanishing_probe_zeros(g, method):
    q = bump(g, 1.0, 0.3)
    sol = build_vanishing_go(g, q, 4.0, W, 0.1, method=method)
    u = np.real(sol.field)
    assert np.max(np.abs(u[0])) <= 1e-10
    shadow = classify_boundary(g, W).nu_dot_omega <= -0.05
    lat = dirichlet_trace(g, u).values[:, shadow]
    assert np.max(np.abs(lat)) <= 1e-10 * np.max(np.abs(u))


def test_vanishing_probe_zero_potential_is_nontrivial(g):
    sol = build_vanishing_go(g, None, 4.0, W, 0.1)
    assert sol.remainder_norm > 0 and np.max(np.abs(1 + sol.remainder)) > 0.1
