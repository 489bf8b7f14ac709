# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementation of the hot per-step kernels.

Statement-for-statement transliteration of ``_ref.py``; the arithmetic order
must not drift from the reference, or traces stop being bit-identical across
backends.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()

BACKEND = "cython"


cdef inline double _sign(double x) nogil:
    if x > 0.0:
        return 1.0
    if x < 0.0:
        return -1.0
    return 0.0


def jet_mul(cnp.ndarray[cnp.float64_t, ndim=2] a,
            cnp.ndarray[cnp.float64_t, ndim=2] b):
    """Truncated jet product; see the reference backend for the layout."""
    cdef Py_ssize_t korder = a.shape[0]
    cdef Py_ssize_t width = a.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((korder, width))
    cdef double[:, ::1] av = a
    cdef double[:, ::1] bv = b
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t k, i, j, d
    cdef double a0, b0
    for k in range(korder):
        for i in range(k + 1):
            j = k - i
            a0 = av[i, 0]
            b0 = bv[j, 0]
            for d in range(width):
                ov[k, d] += a0 * bv[j, d]
            for d in range(1, width):
                ov[k, d] += b0 * av[i, d]
    return out


def observer_step_core(cnp.ndarray[cnp.float64_t, ndim=1] r,
                       cnp.ndarray[cnp.float64_t, ndim=1] chi0,
                       cnp.ndarray[cnp.float64_t, ndim=1] chi1,
                       cnp.ndarray[cnp.float64_t, ndim=1] int_sign,
                       cnp.ndarray[cnp.float64_t, ndim=1] w_hat,
                       cnp.ndarray[cnp.float64_t, ndim=1] phi_i,
                       cnp.ndarray[cnp.float64_t, ndim=1] phi_next,
                       double dt, double lam0, double lam1,
                       double k1, double k2):
    """One explicit-Euler observer-channel update; see the reference backend."""
    cdef Py_ssize_t m = r.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] r_new = np.empty(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sigma0 = np.empty(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] chi0_new = np.empty(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] chi1_new = np.empty(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] zeta = np.empty(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sigma1 = np.empty(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] int_new = np.empty(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w_new = np.empty(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w_dot = np.empty(m)
    cdef Py_ssize_t j
    cdef double err, z, s1, s0, corr, gap, step1
    for j in range(m):
        r_new[j] = r[j] + dt * (phi_next[j] + w_hat[j])
        s0 = r_new[j] - phi_i[j]
        sigma0[j] = s0

        # sliding corrections clamped so one step cannot cross the target
        err = chi0[j] - s0
        corr = lam0 * sqrt(fabs(err))
        if corr > fabs(err) / dt:
            corr = fabs(err) / dt
        z = -corr * _sign(err) + chi1[j]
        zeta[j] = z
        chi0_new[j] = chi0[j] + dt * z
        gap = chi1[j] - z
        step1 = lam1 * dt
        if step1 > fabs(gap):
            step1 = fabs(gap)
        chi1_new[j] = chi1[j] - step1 * _sign(gap)

        sigma1[j] = s0 + z
        s1 = _sign(sigma1[j])
        w_dot[j] = -z - k1 * sqrt(fabs(sigma1[j])) * s1 - k2 * int_sign[j]
        w_new[j] = w_hat[j] + dt * w_dot[j]
        int_new[j] = int_sign[j] + dt * s1

    return (r_new, sigma0, chi0_new, chi1_new, zeta, sigma1,
            int_new, w_new, w_dot)
