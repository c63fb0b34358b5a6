import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from waveprobe.grid import (
    GridError,
    cap_sample,
    carleman_weight,
    cfl_nt,
    classify_boundary,
    default_control_sets,
    discrete_hidden_mask,
    hidden_region_mask,
    integrate_lateral,
    integrate_slice,
    integrate_volume,
    make_grid,
    unit,
)


def test_shapes_and_steps(grid2):
    assert grid2.shape == (33, 17, 17)
    assert grid2.dt == pytest.approx(1 / 32)
    assert grid2.h == pytest.approx(1 / 16)


def test_cfl_violation_names_minimum_nt():
    with pytest.raises(GridError, match="need nt >= 23"):
        make_grid(2, 1.0, 1.0, 16, 16)
    assert cfl_nt(2, 1.0, 1.0, 16) == 23
    make_grid(2, 1.0, 1.0, 23, 16)


@pytest.mark.parametrize("bad", [dict(n_space=3), dict(T=0.0), dict(cfl_safety=1.5), dict(nx=4)])
def test_rejects_bad_parameters(bad):
    args = dict(n_space=2, T=1.0, L=1.0, nt=64, nx=16)
    args.update(bad)
    with pytest.raises(GridError):
        make_grid(**args)


def test_facet_table_counts(grid2, grid1):
    ft = grid2.facets
    assert ft.count == 4 * 17
    assert grid1.facets.count == 2
    # corner nodes appear once per adjacent face
    flat = np.ravel_multi_index(ft.nodes, grid2.space_shape)
    assert np.unique(flat).size == 4 * 16


def test_integrals_of_constants(grid2, grid1):
    assert integrate_volume(grid2, np.ones(grid2.shape)) == pytest.approx(1.0)
    assert integrate_slice(grid2, np.ones(grid2.space_shape)) == pytest.approx(1.0)
    ft = grid2.facets
    all_f = np.arange(ft.count)
    assert integrate_lateral(grid2, np.ones((grid2.nt + 1, ft.count)), all_f) == pytest.approx(4.0)
    one_face = ft.of_faces([3])
    assert integrate_lateral(grid2, np.ones((grid2.nt + 1, one_face.size)), one_face) == pytest.approx(1.0)
    assert integrate_lateral(grid1, np.ones((grid1.nt + 1, 2)), [0, 1]) == pytest.approx(2.0)


def test_trapezoid_is_exact_for_linear_functions(grid2):
    t = grid2.time_column()
    x, y = grid2.space_coords
    f = 1 + 2 * t + 3 * x[None] - y[None]
    assert integrate_volume(grid2, f) == pytest.approx(1 + 1 + 1.5 - 0.5)


def test_classify_boundary_axis_direction(grid2):
    part = classify_boundary(grid2, [1.0, 0.0])
    faces = grid2.facets.face
    assert set(faces[part.plus_r]) == {1}
    assert set(faces[classify_boundary(grid2, [1.0, 0.0], 0.5).minus_r]) == {0, 2, 3}


def test_cap_sample_stays_in_cap():
    ws = cap_sample([1.0, 0.0], 0.5, 9)
    assert len(ws) == 9
    for w in ws:
        assert np.linalg.norm(w) == pytest.approx(1.0)
        assert np.linalg.norm(w - [1.0, 0.0]) <= 0.5 + 1e-12
    assert np.allclose(ws[4], [1.0, 0.0])


def test_control_sets_default_and_rejection(grid2):
    cs = default_control_sets(grid2, [1.0, 0.0], 0.1)
    faces = grid2.facets.face
    assert set(faces[cs.F_facets]) == {1, 2, 3}
    assert set(faces[cs.G_facets]) == {0, 2, 3}
    with pytest.raises(GridError):
        default_control_sets(grid2, [1.0, 0.0], 0.8)


@pytest.mark.parametrize("angle", np.linspace(0, math.pi / 2, 7))
def test_control_sets_cover_every_cap_direction(grid2, angle):
    w0 = np.array([math.cos(angle), math.sin(angle)])
    cs = default_control_sets(grid2, w0, 0.3)
    ft = grid2.facets
    for w in cap_sample(w0, 0.3, 9):
        nd = ft.normal @ w
        assert np.all(np.isin(np.flatnonzero(-nd <= 0.3), cs.F_facets))
        assert np.all(np.isin(np.flatnonzero(nd <= 0.3), cs.G_facets))


def test_weight_overflow_guard(grid2):
    with pytest.raises(GridError, match="overflow"):
        carleman_weight(grid2, 1000.0, [1.0, 0.0], 1)


def test_hidden_masks(grid2):
    cont = hidden_region_mask(grid2)
    disc = discrete_hidden_mask(grid2)
    assert not cont[:, 0, :].any()
    assert cont[0, 8, 8] and not cont[-1, 8, 8]
    # the discrete region is what the stencil cannot reach; it differs from
    # the continuous one because the stencil travels one cell per step
    assert disc[0, 1:-1, 1:-1].all()


@settings(max_examples=25, deadline=None)
@given(nx=st.integers(8, 24), T=st.floats(0.25, 2.0), ratio=st.floats(0.3, 1.0))
def test_cfl_nt_is_admissible(nx, T, ratio):
    nt = cfl_nt(2, T, 1.0, nx, ratio)
    g = make_grid(2, T, 1.0, nt, nx, ratio)
    assert g.dt <= ratio * g.h / math.sqrt(2) * (1 + 1e-12)
