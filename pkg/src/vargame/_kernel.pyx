# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled evaluation kernel.

Same contract as the numpy fallback: for each action, enumerate the 2^f
success/failure outcomes of its fractional loads in lexicographic order
(first fractional load most significant, failure before success) and
accumulate probability-weighted clipped losses per defense sequentially in
outcome order. Deterministic loads accumulate into the base vector with
in-place adds in ascending load order.

The traversal is a depth-first recursion with one partial demand vector per
depth, so each outcome costs O(K) instead of O(f K) and no outcome matrix is
materialized. Determinism holds within this kernel; against the numpy kernel
results agree to rounding (different summation grouping in the outcome
expansion), around 1e-15 relative.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


cdef inline double _clip(double v, double lo) nogil:
    if v <= lo:
        return lo
    if v >= 1.0:
        return 1.0
    return v


cdef void _dfs(int depth, int f, double p, double[:, ::1] xs,
               const double[:, ::1] atk_rows, Py_ssize_t* frac,
               double* av_frac, const double[:, ::1] def_vecs,
               double clip_lo, double* acc) nogil:
    cdef Py_ssize_t K = xs.shape[1]
    cdef Py_ssize_t m = def_vecs.shape[0]
    cdef Py_ssize_t c, i
    cdef double y, d
    if depth == f:
        for i in range(m):
            y = 0.0
            for c in range(K):
                d = fabs(xs[f, c] - def_vecs[i, c])
                if d > y:
                    y = d
            acc[i] += p * _clip(y, clip_lo)
        return
    cdef Py_ssize_t k = frac[depth]
    # failure branch first keeps outcomes in lexicographic order
    for c in range(K):
        xs[depth + 1, c] = xs[depth, c]
    _dfs(depth + 1, f, p * (1.0 - av_frac[depth]), xs, atk_rows, frac,
         av_frac, def_vecs, clip_lo, acc)
    for c in range(K):
        xs[depth + 1, c] = xs[depth, c] + atk_rows[k, c]
    _dfs(depth + 1, f, p * av_frac[depth], xs, atk_rows, frac,
         av_frac, def_vecs, clip_lo, acc)


def scan(const double[::1] x_base, const double[:, ::1] atk_rows,
         const double[:, ::1] def_vecs, const double[:, ::1] a_vals,
         double clip_lo, int chunk_bits=12):
    """Attacker expected utilities for every (defense, action) pair.

    Arguments and result match the numpy kernel's scan; chunk_bits is
    accepted for signature parity (the depth-first walk needs no blocking).
    """
    cdef Py_ssize_t K = x_base.shape[0]
    cdef Py_ssize_t m = def_vecs.shape[0]
    cdef Py_ssize_t n = a_vals.shape[0]
    out_arr = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    frac_arr = np.empty(K, dtype=np.intp)
    cdef Py_ssize_t[::1] frac = frac_arr
    av_arr = np.empty(K, dtype=np.float64)
    cdef double[::1] av_frac = av_arr
    acc_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] acc = acc_arr
    xs_arr = np.empty((K + 1, K), dtype=np.float64)
    cdef double[:, ::1] xs = xs_arr

    cdef Py_ssize_t i, j, k, c, f
    cdef double v, y, d
    with nogil:
        for j in range(n):
            f = 0
            for c in range(K):
                xs[0, c] = x_base[c]
            # sure loads fold into the base in ascending order
            for k in range(K):
                v = a_vals[j, k]
                if v == 1.0:
                    for c in range(K):
                        xs[0, c] = xs[0, c] + atk_rows[k, c]
                elif v > 0.0:
                    frac[f] = k
                    av_frac[f] = v
                    f += 1
            if f == 0:
                for i in range(m):
                    y = 0.0
                    for c in range(K):
                        d = fabs(xs[0, c] - def_vecs[i, c])
                        if d > y:
                            y = d
                    out[i, j] = _clip(y, clip_lo)
            else:
                for i in range(m):
                    acc[i] = 0.0
                _dfs(0, <int>f, 1.0, xs, atk_rows, &frac[0], &av_frac[0],
                     def_vecs, clip_lo, &acc[0])
                for i in range(m):
                    out[i, j] = acc[i]
    return out_arr
