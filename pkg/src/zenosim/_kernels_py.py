"""Pure-numpy aggregation kernels.

Same signatures and results as the compiled ``_kernels`` module. Row means
are accumulated sequentially in row order, as the compiled loop does, so
both backends agree bit for bit there; distances and norms may differ in
the last ulp.
"""

import numpy as np


def mean_rows(v, rows):
    rows = np.asarray(rows, dtype=np.intp)
    if rows.shape[0] == 0:
        raise ValueError("no rows to average")
    acc = v[rows[0]].copy()
    for r in rows[1:]:
        acc += v[r]
    return acc / rows.shape[0]


def coordinate_median(v):
    m = v.shape[0]
    if m == 0:
        raise ValueError("empty gradient set")
    s = np.sort(v, axis=0)
    h = m // 2
    if m % 2:
        return s[h].copy()
    return (s[h - 1] + s[h]) / 2.0


def pairwise_sq_dists(v):
    m = v.shape[0]
    out = np.zeros((m, m))
    for i in range(m - 1):
        diff = v[i + 1:] - v[i]
        d = np.einsum("ij,ij->i", diff, diff)
        out[i, i + 1:] = d
        out[i + 1:, i] = d
    return out


def krum_scores(dist, neighbours):
    m = dist.shape[0]
    if neighbours < 0 or neighbours > m - 1:
        raise ValueError("neighbour count out of range")
    off = dist[~np.eye(m, dtype=bool)].reshape(m, m - 1)
    part = np.sort(off, axis=1)[:, :neighbours]
    out = np.zeros(m)
    for k in range(neighbours):
        out += part[:, k]
    return out


def sq_norms(v):
    return np.einsum("ij,ij->i", v, v)
