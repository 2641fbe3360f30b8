# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled quadrature kernel for fringe and dip scans.

For every delay ``tau[k]`` it accumulates

    s[k] = sum_j w[j] * Im(exp(i x[j] tau[k]) * u[j])**2
    c[k] = sum_j w[j] * Re(exp(i x[j] tau[k]) * u[j])**2

The carrier phasor is advanced along the (uniform) ``x`` grid by complex
rotation and re-anchored with an exact sincos every ``block`` points, which
bounds the drift to ~block ulps. Each ``k`` is summed sequentially, so
threaded and single-threaded results are bit-identical.
"""
from cython.parallel cimport prange
from libc.math cimport sin, cos


cdef void _one_delay(const double* x, const double* ur, const double* ui,
                     const double* w, Py_ssize_t n, double h, double t,
                     Py_ssize_t block, double* out_s, double* out_c) noexcept nogil:
    cdef Py_ssize_t j, j0, j1
    cdef double acc_s = 0.0, acc_c = 0.0
    cdef double rr = cos(h * t), ri = sin(h * t)
    cdef double zr, zi, qr, qi, tmp
    j0 = 0
    while j0 < n:
        j1 = j0 + block
        if j1 > n:
            j1 = n
        zr = cos(x[j0] * t)
        zi = sin(x[j0] * t)
        for j in range(j0, j1):
            qr = zr * ur[j] - zi * ui[j]
            qi = zr * ui[j] + zi * ur[j]
            acc_s = acc_s + w[j] * qi * qi
            acc_c = acc_c + w[j] * qr * qr
            tmp = zr * rr - zi * ri
            zi = zr * ri + zi * rr
            zr = tmp
        j0 = j1
    out_s[0] = acc_s
    out_c[0] = acc_c


def phase_sums(const double[::1] x, const double[::1] ur, const double[::1] ui,
               const double[::1] w, const double[::1] tau,
               double[::1] out_s, double[::1] out_c,
               Py_ssize_t block=64, int num_threads=1):
    cdef Py_ssize_t n = x.shape[0], m = tau.shape[0], k
    cdef double h
    if ur.shape[0] != n or ui.shape[0] != n or w.shape[0] != n:
        raise ValueError("x, ur, ui and w must have equal length")
    if out_s.shape[0] != m or out_c.shape[0] != m:
        raise ValueError("output arrays must match tau")
    if n == 0:
        out_s[:] = 0.0
        out_c[:] = 0.0
        return
    if block < 1:
        block = 1
    h = (x[n - 1] - x[0]) / (n - 1) if n > 1 else 0.0
    for k in prange(m, nogil=True, num_threads=num_threads, schedule="static"):
        _one_delay(&x[0], &ur[0], &ui[0], &w[0], n, h, tau[k], block,
                   &out_s[k], &out_c[k])
