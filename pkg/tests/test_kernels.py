import numpy as np
import pytest

from waveprobe import kernels
from waveprobe.grid import make_grid
from waveprobe.ibvp import IbvpProblem, solve_damped_ibvp

needs_ext = pytest.mark.skipif(kernels.BACKEND != "cython", reason="extension not built")


@needs_ext
@pytest.mark.parametrize("n", [1, 2])
def test_backends_agree_bitwise(n, rng):
    g = make_grid(n, 1.0, 1.0, 40, 16)
    q = rng.standard_normal(g.shape)
    f = rng.standard_normal(g.shape)
    u0 = rng.standard_normal(g.space_shape)
    u0[(slice(None),) * 0 + (0,)] = 0
    w = np.ones(n) / np.sqrt(n)
    prob = IbvpProblem(g, q=q, rhs=f, u0=None, v1=u0)
    a = solve_damped_ibvp(prob, 0.8, w, backend="python")
    b = solve_damped_ibvp(prob, 0.8, w, backend="cython")
    assert np.array_equal(a, b)


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_python_backend_always_available():
    assert kernels.get_backend("python").damped_step_2d is not None
