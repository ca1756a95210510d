# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled DP table builders; semantics match _reference exactly (int64)."""

import numpy as np

cimport cython
from libc.stdint cimport int64_t

INF = 1 << 62

BACKEND_NAME = "compiled"

cdef int64_t C_INF = <int64_t>1 << 62


def bucket_suffix_error_table(values, counts, int q_max):
    u_arr = np.ascontiguousarray(values, dtype=np.int64)
    c_arr = np.ascontiguousarray(counts, dtype=np.int64)
    cdef int64_t[::1] u = u_arr
    cdef int64_t[::1] c = c_arr
    cdef Py_ssize_t n = u.shape[0]

    cc_arr = np.zeros(n + 1, dtype=np.int64)
    w_arr = np.zeros(n + 1, dtype=np.int64)
    cdef int64_t[::1] cc = cc_arr
    cdef int64_t[::1] w = w_arr
    cdef Py_ssize_t i, j
    for i in range(n):
        cc[i + 1] = cc[i] + c[i]
        w[i + 1] = w[i] + c[i] * u[i]

    table_arr = np.full((n + 1, q_max + 1), INF, dtype=np.int64)
    cdef int64_t[:, ::1] table = table_arr
    table[n, 0] = 0

    cdef int r
    cdef int64_t best, run_cost, cand
    for r in range(1, q_max + 1):
        for i in range(n - 1, -1, -1):
            best = C_INF
            for j in range(i + 1, n + 1):
                run_cost = u[j - 1] * (cc[j] - cc[i]) - (w[j] - w[i])
                if run_cost >= best:
                    break  # run cost only grows with j and prev >= 0
                if table[j, r - 1] < C_INF:
                    cand = run_cost + table[j, r - 1]
                    if cand < best:
                        best = cand
            table[i, r] = best
    return table_arr


def minimax_suffix_table(lengths, int m_max):
    s_arr = np.ascontiguousarray(lengths, dtype=np.int64)
    cdef int64_t[::1] s = s_arr
    cdef Py_ssize_t n = s.shape[0]

    ps_arr = np.zeros(n + 1, dtype=np.int64)
    cdef int64_t[::1] ps = ps_arr
    cdef Py_ssize_t i, j
    for i in range(n):
        ps[i + 1] = ps[i] + s[i]

    table_arr = np.full((n + 1, m_max + 1), INF, dtype=np.int64)
    cdef int64_t[:, ::1] table = table_arr
    table[n, 0] = 0

    cdef int r
    cdef int64_t best, seg, cand
    for r in range(1, m_max + 1):
        for i in range(n - 1, -1, -1):
            best = C_INF
            for j in range(i + 1, n + 1):
                seg = ps[j] - ps[i]
                if seg >= best:
                    break  # segment sum only grows with j
                cand = table[j, r - 1]
                if seg > cand:
                    cand = seg
                if cand < best:
                    best = cand
            table[i, r] = best
    return table_arr
