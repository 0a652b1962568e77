# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled aggregation kernels. Mirrors ``_kernels_py`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport qsort, malloc, free

cnp.import_array()


cdef int _cmp_double(const void* a, const void* b) noexcept nogil:
    cdef double x = (<double*>a)[0]
    cdef double y = (<double*>b)[0]
    return (x > y) - (x < y)


def mean_rows(const double[:, ::1] v, const cnp.intp_t[::1] rows):
    cdef Py_ssize_t k = rows.shape[0], d = v.shape[1], i, j
    if k == 0:
        raise ValueError("no rows to average")
    out = np.empty(d, dtype=np.float64)
    cdef double[::1] acc = out
    cdef cnp.intp_t r
    with nogil:
        r = rows[0]
        for j in range(d):
            acc[j] = v[r, j]
        for i in range(1, k):
            r = rows[i]
            for j in range(d):
                acc[j] += v[r, j]
        for j in range(d):
            acc[j] = acc[j] / k
    return out


cdef double _select(double* a, Py_ssize_t n, Py_ssize_t k) noexcept nogil:
    """k-th smallest of a[0:n]; partially reorders a so a[0:k] <= a[k]."""
    cdef Py_ssize_t lo = 0, hi = n - 1, i, j, mid
    cdef double pivot, tmp
    while hi > lo:
        mid = lo + (hi - lo) // 2
        # median-of-three pivot, moved to a[mid]
        if a[mid] < a[lo]:
            tmp = a[mid]; a[mid] = a[lo]; a[lo] = tmp
        if a[hi] < a[lo]:
            tmp = a[hi]; a[hi] = a[lo]; a[lo] = tmp
        if a[hi] < a[mid]:
            tmp = a[hi]; a[hi] = a[mid]; a[mid] = tmp
        pivot = a[mid]
        i = lo
        j = hi
        while i <= j:
            while a[i] < pivot:
                i += 1
            while a[j] > pivot:
                j -= 1
            if i <= j:
                tmp = a[i]; a[i] = a[j]; a[j] = tmp
                i += 1
                j -= 1
        if k <= j:
            hi = j
        elif k >= i:
            lo = i
        else:
            break
    return a[k]


def coordinate_median(const double[:, ::1] v):
    cdef Py_ssize_t m = v.shape[0], d = v.shape[1], i, j, h = m // 2
    cdef double upper, lower
    if m == 0:
        raise ValueError("empty gradient set")
    # column-major copy so each coordinate is selected in place, contiguously
    cols = np.ascontiguousarray(np.asarray(v).T)
    cdef double[:, ::1] c = cols
    out = np.empty(d, dtype=np.float64)
    cdef double[::1] res = out
    with nogil:
        for j in range(d):
            upper = _select(&c[j, 0], m, h)
            if m % 2:
                res[j] = upper
            else:
                lower = c[j, 0]
                for i in range(1, h):
                    if c[j, i] > lower:
                        lower = c[j, i]
                res[j] = (lower + upper) / 2.0
    return out


def pairwise_sq_dists(const double[:, ::1] v):
    cdef Py_ssize_t m = v.shape[0], d = v.shape[1], i, k, j
    out = np.zeros((m, m), dtype=np.float64)
    cdef double[:, ::1] dist = out
    cdef double s, t
    with nogil:
        for i in range(m):
            for k in range(i + 1, m):
                s = 0.0
                for j in range(d):
                    t = v[i, j] - v[k, j]
                    s += t * t
                dist[i, k] = s
                dist[k, i] = s
    return out


def krum_scores(const double[:, ::1] dist, Py_ssize_t neighbours):
    cdef Py_ssize_t m = dist.shape[0], i, k, n
    if neighbours < 0 or neighbours > m - 1:
        raise ValueError("neighbour count out of range")
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] res = out
    cdef double* row = <double*>malloc((m if m > 1 else 1) * sizeof(double))
    cdef double s
    if row == NULL:
        raise MemoryError()
    try:
        with nogil:
            for i in range(m):
                n = 0
                for k in range(m):
                    if k != i:
                        row[n] = dist[i, k]
                        n += 1
                qsort(row, n, sizeof(double), _cmp_double)
                s = 0.0
                for k in range(neighbours):
                    s += row[k]
                res[i] = s
    finally:
        free(row)
    return out


def sq_norms(const double[:, ::1] v):
    cdef Py_ssize_t m = v.shape[0], d = v.shape[1], i, j
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] res = out
    cdef double s
    with nogil:
        for i in range(m):
            s = 0.0
            for j in range(d):
                s += v[i, j] * v[i, j]
            res[i] = s
    return out
