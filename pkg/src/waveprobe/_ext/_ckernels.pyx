# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled damped leapfrog steps; same arithmetic as ``_kernels_py``."""


def damped_step_1d(const double[::1] prev, const double[::1] cur, const double[::1] q,
                   const double[::1] f, double s, double w0, double dt, double h,
                   double[::1] out):
    cdef Py_ssize_t j, n = cur.shape[0]
    cdef double inv_h2 = 1.0 / (h * h)
    cdef double c = 2.0 * s * w0 / (2.0 * h)
    cdef double lo = 1.0 - s * dt
    cdef double div = 1.0 + s * dt
    cdef double dt2 = dt * dt
    cdef double rhs, uc
    with nogil:
        for j in range(1, n - 1):
            uc = cur[j]
            rhs = ((cur[j + 1] + cur[j - 1]) - 2.0 * uc) * inv_h2
            rhs = rhs + c * (cur[j + 1] - cur[j - 1])
            rhs = rhs - q[j] * uc
            rhs = rhs + f[j]
            out[j] = (2.0 * uc - lo * prev[j] + dt2 * rhs) / div


def damped_step_2d(const double[:, ::1] prev, const double[:, ::1] cur,
                   const double[:, ::1] q, const double[:, ::1] f, double s,
                   double w0, double w1, double dt, double h, double[:, ::1] out):
    cdef Py_ssize_t i, j, n0 = cur.shape[0], n1 = cur.shape[1]
    cdef double inv_h2 = 1.0 / (h * h)
    cdef double c0 = 2.0 * s * w0 / (2.0 * h)
    cdef double c1 = 2.0 * s * w1 / (2.0 * h)
    cdef double lo = 1.0 - s * dt
    cdef double div = 1.0 + s * dt
    cdef double dt2 = dt * dt
    cdef double rhs, uc
    with nogil:
        for i in range(1, n0 - 1):
            for j in range(1, n1 - 1):
                uc = cur[i, j]
                rhs = ((cur[i + 1, j] + cur[i - 1, j]) - 2.0 * uc) * inv_h2
                rhs = rhs + ((cur[i, j + 1] + cur[i, j - 1]) - 2.0 * uc) * inv_h2
                rhs = rhs + c0 * (cur[i + 1, j] - cur[i - 1, j])
                rhs = rhs + c1 * (cur[i, j + 1] - cur[i, j - 1])
                rhs = rhs - q[i, j] * uc
                rhs = rhs + f[i, j]
                out[i, j] = (2.0 * uc - lo * prev[i, j] + dt2 * rhs) / div
