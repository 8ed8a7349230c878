# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled risk/gradient kernels; the numpy module mirrors this exactly.

One pass over the triplets, scalar math per triplet. All four losses are
expressed through the label-oriented squared distances (d_near^2, d_far^2);
see losses.py for the formulas.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, isfinite, log, log1p

cnp.import_array()

ctypedef cnp.int64_t idx_t

cdef int STE = 0, GNMDS_HINGE = 1, TSTE = 2, CKL = 3


cdef inline double softplus(double x) nogil:
    # log(1 + e^x) without overflow for large |x|
    if x > 0.0:
        return x + log1p(exp(-x))
    return log1p(exp(x))


cdef inline double sigmoid(double x) nogil:
    cdef double e
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


def risk_grad(
    double[:, ::1] Y,
    idx_t[::1] I,
    idx_t[::1] J,
    idx_t[::1] K,
    idx_t[::1] W,
    int loss_code,
    double param,
    bint want_grad=True,
):
    """Mean per-triplet loss and (optionally) its gradient w.r.t. Y."""
    cdef Py_ssize_t m = Y.shape[0]
    cdef Py_ssize_t n = Y.shape[1]
    cdef Py_ssize_t size = I.shape[0]
    cdef Py_ssize_t t, dim, ii, jj, kk, ni, fi
    cdef double d2_j, d2_k, near, far, diff
    cdef double loss_sum = 0.0
    cdef double loss, g_near, g_far, g_n_scaled, g_f_scaled
    cdef double c, x, a, mu, den, log_kn, log_kf, log_den, one_minus_p, scale

    grad_arr = np.zeros((m, n), dtype=np.float64)
    cdef double[:, ::1] grad = grad_arr
    cdef double inv_size = 1.0 / size

    with nogil:
        for t in range(size):
            ii = I[t]
            jj = J[t]
            kk = K[t]
            d2_j = 0.0
            d2_k = 0.0
            for dim in range(m):
                diff = Y[dim, ii] - Y[dim, jj]
                d2_j += diff * diff
                diff = Y[dim, ii] - Y[dim, kk]
                d2_k += diff * diff
            if W[t] == -1:
                near = d2_j
                far = d2_k
                ni = jj
                fi = kk
            else:
                near = d2_k
                far = d2_j
                ni = kk
                fi = jj

            if loss_code == STE:
                c = 1.0 / (2.0 * param * param)
                x = c * (near - far)
                loss = softplus(x)
                g_near = c * sigmoid(x)
                g_far = -g_near
            elif loss_code == GNMDS_HINGE:
                x = 1.0 + near - far
                if x > 0.0:
                    loss = x
                    g_near = 1.0
                    g_far = -1.0
                else:
                    loss = 0.0
                    g_near = 0.0
                    g_far = 0.0
            elif loss_code == TSTE:
                a = param
                log_kn = -(a + 1.0) / 2.0 * log1p(near / a)
                log_kf = -(a + 1.0) / 2.0 * log1p(far / a)
                if log_kn > log_kf:
                    log_den = log_kn + log1p(exp(log_kf - log_kn))
                else:
                    log_den = log_kf + log1p(exp(log_kn - log_kf))
                loss = log_den - log_kn
                one_minus_p = exp(log_kf - log_den)
                scale = (a + 1.0) / (2.0 * a)
                g_near = scale * one_minus_p / (1.0 + near / a)
                g_far = -scale * one_minus_p / (1.0 + far / a)
            else:  # CKL
                mu = param
                den = 2.0 * mu + near + far
                loss = log(den) - log(mu + far)
                g_near = 1.0 / den
                g_far = 1.0 / den - 1.0 / (mu + far)

            loss_sum += loss
            if not isfinite(loss_sum):
                break

            if want_grad:
                g_n_scaled = 2.0 * g_near * inv_size
                g_f_scaled = 2.0 * g_far * inv_size
                for dim in range(m):
                    diff = Y[dim, ii] - Y[dim, ni]
                    grad[dim, ii] += g_n_scaled * diff
                    grad[dim, ni] -= g_n_scaled * diff
                    diff = Y[dim, ii] - Y[dim, fi]
                    grad[dim, ii] += g_f_scaled * diff
                    grad[dim, fi] -= g_f_scaled * diff

    if not want_grad:
        grad_arr = None
    if not isfinite(loss_sum):
        return float("inf"), grad_arr
    return loss_sum * inv_size, grad_arr
