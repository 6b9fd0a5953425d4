# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Fortuin-Kasteleyn subset enumeration.

Edges are decided one at a time in a depth-first walk; a union-find with union
by size and explicit undo keeps the component count current, so every subset
is reached in O(1) amortized work.
"""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free

ctypedef long long i64


cdef struct Walk:
    int n
    int m
    int* eu
    int* ev
    int* parent
    int* size
    i64* counts


cdef inline int _find(int* parent, int x) noexcept nogil:
    while parent[x] != x:
        x = parent[x]
    return x


cdef void _walk(Walk* w, int d, int comp, int nsel) noexcept nogil:
    cdef int a, b
    if d == w.m:
        w.counts[nsel * (w.n + 1) + comp] += 1
        return
    _walk(w, d + 1, comp, nsel)
    a = _find(w.parent, w.eu[d])
    b = _find(w.parent, w.ev[d])
    if a == b:
        _walk(w, d + 1, comp, nsel + 1)
        return
    if w.size[a] < w.size[b]:
        a, b = b, a
    w.parent[b] = a
    w.size[a] += w.size[b]
    _walk(w, d + 1, comp - 1, nsel + 1)
    w.size[a] -= w.size[b]
    w.parent[b] = b


def fk_counts(int n_vertices, edges):
    """Return an int64 table ``c[|E'|, k(E')]`` of subset counts."""
    cdef cnp.ndarray[cnp.int32_t, ndim=2] e = np.ascontiguousarray(edges, dtype=np.int32).reshape(-1, 2)
    cdef int m = e.shape[0]
    cdef int i
    cdef Walk w
    out = np.zeros((m + 1, n_vertices + 1), dtype=np.int64)
    cdef i64[:, ::1] cv = out
    w.n = n_vertices
    w.m = m
    w.eu = <int*> malloc(max(m, 1) * sizeof(int))
    w.ev = <int*> malloc(max(m, 1) * sizeof(int))
    w.parent = <int*> malloc(max(n_vertices, 1) * sizeof(int))
    w.size = <int*> malloc(max(n_vertices, 1) * sizeof(int))
    try:
        for i in range(m):
            w.eu[i] = e[i, 0]
            w.ev[i] = e[i, 1]
        for i in range(n_vertices):
            w.parent[i] = i
            w.size[i] = 1
        w.counts = &cv[0, 0]
        with nogil:
            _walk(&w, 0, n_vertices, 0)
    finally:
        free(w.eu)
        free(w.ev)
        free(w.parent)
        free(w.size)
    return out
