# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops; semantics mirror varsense._kernels_py exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, sqrt, exp

cnp.import_array()


def homodyne_sample_stats(double m0, double m1, double disp_amp, double phi_alpha,
                          double c00, double c01, double c11, double phi_hd,
                          const double[::1] basis_offsets,
                          const double[::1] disp_offsets,
                          const double[::1] z):
    cdef Py_ssize_t n = z.shape[0]
    cdef Py_ssize_t i
    cdef bint noisy_basis = basis_offsets.shape[0] > 0
    cdef bint noisy_disp = disp_offsets.shape[0] > 0
    cdef double c = cos(phi_hd), s = sin(phi_hd)
    cdef double dx = disp_amp * cos(phi_alpha), dy = disp_amp * sin(phi_alpha)
    cdef double mx, my, mu, var, x, shift, mean, s1 = 0.0, s2 = 0.0
    shift = c * (m0 + dx) + s * (m1 + dy)
    for i in range(n):
        if noisy_basis:
            c = cos(phi_hd + basis_offsets[i])
            s = sin(phi_hd + basis_offsets[i])
        if noisy_disp:
            dx = disp_amp * cos(phi_alpha + disp_offsets[i])
            dy = disp_amp * sin(phi_alpha + disp_offsets[i])
        mx = m0 + dx
        my = m1 + dy
        mu = c * mx + s * my
        var = c * c * c00 + 2.0 * c * s * c01 + s * s * c11
        x = mu + sqrt(var) * z[i] - shift
        s1 += x
        s2 += x * x
    mean = s1 / n
    return shift + mean, (s2 - s1 * mean) / (n - 1)


def rbf_cross(const double[:, ::1] a, const double[:, ::1] b, double lengthscale, double scale):
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], d = a.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double acc, diff
    cdef double inv = 1.0 / (2.0 * lengthscale * lengthscale)
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for k in range(d):
                diff = a[i, k] - b[j, k]
                acc += diff * diff
            o[i, j] = scale * exp(-acc * inv)
    return out
