"""Pure-Python (numpy) implementations of the hot DP table builders.

Both kernels fill suffix tables ``table[i][r]`` = best value for splitting the
suffix starting at element ``i`` into exactly ``r`` contiguous non-empty runs.
``table[0][r]`` therefore covers the whole input. All arithmetic is int64, so
the compiled backend produces bit-identical tables.
"""

import numpy as np

INF = 1 << 62

BACKEND_NAME = "python"


def bucket_suffix_error_table(values, counts, q_max):
    """Suffix table of minimal bucketing error over unique sorted lengths.

    A run [i, j) is represented by its largest value ``values[j-1]``; its
    error is the summed upward deviation of the run's members, weighted by
    ``counts``.
    """
    u = np.ascontiguousarray(values, dtype=np.int64)
    c = np.ascontiguousarray(counts, dtype=np.int64)
    n = u.shape[0]
    cc = np.zeros(n + 1, dtype=np.int64)
    cc[1:] = np.cumsum(c)
    w = np.zeros(n + 1, dtype=np.int64)
    w[1:] = np.cumsum(c * u)

    table = np.full((n + 1, q_max + 1), INF, dtype=np.int64)
    table[n, 0] = 0
    for r in range(1, q_max + 1):
        prev = table[:, r - 1]
        for i in range(n - 1, -1, -1):
            # run [i, j) for j in i+1..n, rep u[j-1]
            cost = u[i:n] * (cc[i + 1 : n + 1] - cc[i]) - (w[i + 1 : n + 1] - w[i])
            table[i, r] = np.min(cost + prev[i + 1 : n + 1])
    return table


def minimax_suffix_table(lengths, m_max):
    """Suffix table of minimal maximum-run-sum partitions.

    For each cell the candidates max(run_sum, rest) are minimized at the
    crossing of the increasing run sum and the non-increasing remainder, so a
    binary search per cell replaces the inner scan.
    """
    s = np.ascontiguousarray(lengths, dtype=np.int64)
    n = s.shape[0]
    ps = np.zeros(n + 1, dtype=np.int64)
    ps[1:] = np.cumsum(s)

    table = np.full((n + 1, m_max + 1), INF, dtype=np.int64)
    table[n, 0] = 0
    if m_max >= 1:
        table[0:n, 1] = ps[n] - ps[0:n]
    for r in range(2, m_max + 1):
        prev = table[:, r - 1]
        j_max = n - (r - 1)  # last start leaving r-1 non-empty parts
        if j_max < 1:
            continue
        g = ps[1 : j_max + 1] - prev[1 : j_max + 1]  # increasing on the feasible range
        for i in range(j_max - 1, -1, -1):
            lo = i + 1
            cross = lo + int(np.searchsorted(g[lo - 1 : j_max], ps[i]))
            best = INF
            if cross <= j_max:
                best = int(ps[cross] - ps[i])
            if cross - 1 >= lo:
                cand = int(prev[cross - 1])
                if cand < best:
                    best = cand
            table[i, r] = best
    return table
