# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twin of _kernels_py: packed-mixture chain-update blocks.

Consumes the same pre-drawn randomness in the same order as the numpy
implementation, so trajectories agree up to floating-point roundoff.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, sqrt

cnp.import_array()


cdef double _packed_logp_score(
    double[:, ::1] means,
    double[:, :, ::1] precs,
    double[::1] log_consts,
    double tau,
    double[::1] lin_i,
    double[::1] u,
    double[::1] score_out,
    double[:, ::1] pd_scratch,
    double[::1] comp_scratch,
) nogil:
    """Write the score of the packed target at u into score_out and
    return its log density. Scratch shapes: (c, d) and (c,)."""
    cdef Py_ssize_t c = means.shape[0]
    cdef Py_ssize_t d = means.shape[1]
    cdef Py_ssize_t ci, j, k
    cdef double quad, acc, peak, z, logp, resp
    peak = -1e300
    for ci in range(c):
        quad = 0.0
        for j in range(d):
            acc = 0.0
            for k in range(d):
                acc += precs[ci, j, k] * (u[k] - means[ci, k])
            pd_scratch[ci, j] = acc
            quad += acc * (u[j] - means[ci, j])
        comp_scratch[ci] = log_consts[ci] - 0.5 * quad
        if comp_scratch[ci] > peak:
            peak = comp_scratch[ci]
    z = 0.0
    for ci in range(c):
        z += exp(comp_scratch[ci] - peak)
    logp = log(z) + peak
    for j in range(d):
        score_out[j] = 0.0
    for ci in range(c):
        resp = exp(comp_scratch[ci] - peak) / z
        for j in range(d):
            score_out[j] -= resp * pd_scratch[ci, j]
    for j in range(d):
        logp += lin_i[j] * u[j] - 0.5 * tau * u[j] * u[j]
        score_out[j] += lin_i[j] - tau * u[j]
    return logp


def mala_block_packed(
    double[:, ::1] means,
    double[:, :, ::1] precs,
    double[::1] log_consts,
    double tau,
    double[:, ::1] lin,
    double[:, ::1] x,
    double[::1] logp,
    double[:, ::1] score,
    double h,
    double[:, :, ::1] normals,
    double[:, ::1] logu,
):
    cdef Py_ssize_t steps = normals.shape[0]
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    cdef Py_ssize_t c = means.shape[0]
    cdef double root = sqrt(2.0 * h)
    cdef double inv4h = 1.0 / (4.0 * h)
    cdef Py_ssize_t t, i, j
    cdef double lp, fwd2, bwd2, fj, bj, log_alpha
    cdef int accepted = 0

    prop_arr = np.empty(d)
    sc_arr = np.empty(d)
    pd_arr = np.empty((c, d))
    comp_arr = np.empty(c)
    cdef double[::1] prop = prop_arr
    cdef double[::1] sc = sc_arr
    cdef double[:, ::1] pd = pd_arr
    cdef double[::1] comp = comp_arr

    with nogil:
        for t in range(steps):
            for i in range(n):
                for j in range(d):
                    prop[j] = x[i, j] + h * score[i, j] + root * normals[t, i, j]
                lp = _packed_logp_score(
                    means, precs, log_consts, tau, lin[i], prop, sc, pd, comp
                )
                fwd2 = 0.0
                bwd2 = 0.0
                for j in range(d):
                    fj = prop[j] - x[i, j] - h * score[i, j]
                    bj = x[i, j] - prop[j] - h * sc[j]
                    fwd2 += fj * fj
                    bwd2 += bj * bj
                log_alpha = lp - logp[i] + (fwd2 - bwd2) * inv4h
                if logu[t, i] < log_alpha:
                    for j in range(d):
                        x[i, j] = prop[j]
                        score[i, j] = sc[j]
                    logp[i] = lp
                    accepted += 1
    return accepted


def ula_block_packed(
    double[:, ::1] means,
    double[:, :, ::1] precs,
    double[::1] log_consts,
    double tau,
    double[:, ::1] lin,
    double[:, ::1] x,
    double h,
    double[:, :, ::1] normals,
):
    cdef Py_ssize_t steps = normals.shape[0]
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    cdef Py_ssize_t c = means.shape[0]
    cdef double root = sqrt(2.0 * h)
    cdef Py_ssize_t t, i, j

    sc_arr = np.empty(d)
    pd_arr = np.empty((c, d))
    comp_arr = np.empty(c)
    cdef double[::1] sc = sc_arr
    cdef double[:, ::1] pd = pd_arr
    cdef double[::1] comp = comp_arr

    with nogil:
        for t in range(steps):
            for i in range(n):
                _packed_logp_score(
                    means, precs, log_consts, tau, lin[i], x[i], sc, pd, comp
                )
                for j in range(d):
                    x[i, j] = x[i, j] + h * sc[j] + root * normals[t, i, j]
    return None
