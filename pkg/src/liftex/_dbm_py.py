"""Pure-Python difference-bound-matrix kernels.

A matrix of size ``n`` is stored row-major in a flat ``array('q')`` of
length ``n*n``. Entries at or above ``INF`` mean "no bound".
"""

INF = 1 << 40


def close(d, n):
    """Floyd-Warshall closure in place. Returns False on a negative cycle."""
    for k in range(n):
        rk = k * n
        for i in range(n):
            dik = d[i * n + k]
            if dik >= INF:
                continue
            ri = i * n
            for j in range(n):
                dkj = d[rk + j]
                if dkj >= INF:
                    continue
                s = dik + dkj
                if s < d[ri + j]:
                    d[ri + j] = s
        if d[k * n + k] < 0:
            return False
    for i in range(n):
        if d[i * n + i] < 0:
            return False
    return True


def tighten(d, n, i, j, b):
    """Add ``x_i - x_j <= b`` to a closed matrix, keeping it closed."""
    if b >= d[i * n + j]:
        return True
    dji = d[j * n + i]
    if dji < INF and dji + b < 0:
        return False
    col_i = [d[p * n + i] for p in range(n)]
    row_j = d[j * n:(j + 1) * n]
    for p in range(n):
        dpi = col_i[p]
        if dpi >= INF:
            continue
        base = dpi + b
        rp = p * n
        for q in range(n):
            djq = row_j[q]
            if djq >= INF:
                continue
            s = base + djq
            if s < d[rp + q]:
                d[rp + q] = s
    return True
