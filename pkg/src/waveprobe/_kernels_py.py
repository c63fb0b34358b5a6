"""Pure numpy leapfrog kernels; the compiled ``_ckernels`` module mirrors these."""

import numpy as np


def damped_step_1d(prev, cur, q, f, s, w0, dt, h, out):
    """Interior update of one damped leapfrog step, written into ``out``."""
    inv_h2 = 1.0 / (h * h)
    c = 2.0 * s * w0 / (2.0 * h)
    lo = 1.0 - s * dt
    div = 1.0 + s * dt
    dt2 = dt * dt
    u = cur
    rhs = ((u[2:] + u[:-2]) - 2.0 * u[1:-1]) * inv_h2
    rhs += c * (u[2:] - u[:-2])
    rhs -= q[1:-1] * u[1:-1]
    rhs += f[1:-1]
    out[1:-1] = (2.0 * u[1:-1] - lo * prev[1:-1] + dt2 * rhs) / div


def damped_step_2d(prev, cur, q, f, s, w0, w1, dt, h, out):
    inv_h2 = 1.0 / (h * h)
    c0 = 2.0 * s * w0 / (2.0 * h)
    c1 = 2.0 * s * w1 / (2.0 * h)
    lo = 1.0 - s * dt
    div = 1.0 + s * dt
    dt2 = dt * dt
    u = cur
    c = u[1:-1, 1:-1]
    rhs = ((u[2:, 1:-1] + u[:-2, 1:-1]) - 2.0 * c) * inv_h2
    rhs += ((u[1:-1, 2:] + u[1:-1, :-2]) - 2.0 * c) * inv_h2
    rhs += c0 * (u[2:, 1:-1] - u[:-2, 1:-1])
    rhs += c1 * (u[1:-1, 2:] - u[1:-1, :-2])
    rhs -= q[1:-1, 1:-1] * c
    rhs += f[1:-1, 1:-1]
    out[1:-1, 1:-1] = (2.0 * c - lo * prev[1:-1, 1:-1] + dt2 * rhs) / div
