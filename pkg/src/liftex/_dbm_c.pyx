# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled difference-bound-matrix kernels (same contract as _dbm_py)."""

cdef long long CINF = 1LL << 40
INF = CINF


def close(long long[::1] d, Py_ssize_t n):
    cdef Py_ssize_t i, j, k
    cdef long long dik, dkj, s
    for k in range(n):
        for i in range(n):
            dik = d[i * n + k]
            if dik >= CINF:
                continue
            for j in range(n):
                dkj = d[k * n + j]
                if dkj >= CINF:
                    continue
                s = dik + dkj
                if s < d[i * n + j]:
                    d[i * n + j] = s
        if d[k * n + k] < 0:
            return False
    for i in range(n):
        if d[i * n + i] < 0:
            return False
    return True


def tighten(long long[::1] d, Py_ssize_t n, Py_ssize_t i, Py_ssize_t j, long long b):
    cdef Py_ssize_t p, q
    cdef long long dpi, djq, s, base
    if b >= d[i * n + j]:
        return True
    if d[j * n + i] < CINF and d[j * n + i] + b < 0:
        return False
    # column i and row j are read before being overwritten; copy them
    cdef long long[64] col_i
    cdef long long[64] row_j
    if n > 64:
        from . import _dbm_py
        return _dbm_py.tighten(d, n, i, j, b)
    for p in range(n):
        col_i[p] = d[p * n + i]
        row_j[p] = d[j * n + p]
    for p in range(n):
        dpi = col_i[p]
        if dpi >= CINF:
            continue
        base = dpi + b
        for q in range(n):
            djq = row_j[q]
            if djq >= CINF:
                continue
            s = base + djq
            if s < d[p * n + q]:
                d[p * n + q] = s
    return True
