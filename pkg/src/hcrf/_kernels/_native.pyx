# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Cython CRF kernels; see _pure.py for the array layout contract.

Arithmetic must stay bit-identical to the pure backend: same operations,
same accumulation order, plain IEEE-754 doubles (no fast-math, no
reassociation).
"""


def icm_sweep(const double[:, :, ::1] unary,
              const double[:, ::1] wr,
              const double[:, ::1] wd,
              double coupling,
              int[:, ::1] labels):
    """One raster-order sweep; mutates ``labels``; returns changed-pixel count."""
    cdef Py_ssize_t h = unary.shape[0]
    cdef Py_ssize_t w = unary.shape[1]
    cdef Py_ssize_t k = unary.shape[2]
    cdef Py_ssize_t y, x, kk, best
    cdef double s, cost, best_cost
    cdef int changes = 0
    with nogil:
        for y in range(h):
            for x in range(w):
                best = 0
                best_cost = 0.0
                for kk in range(k):
                    s = 0.0
                    if x > 0 and labels[y, x - 1] != kk:
                        s += wr[y, x - 1]
                    if x < w - 1 and labels[y, x + 1] != kk:
                        s += wr[y, x]
                    if y > 0 and labels[y - 1, x] != kk:
                        s += wd[y - 1, x]
                    if y < h - 1 and labels[y + 1, x] != kk:
                        s += wd[y, x]
                    cost = unary[y, x, kk] + coupling * s
                    if kk == 0 or cost < best_cost:
                        best = kk
                        best_cost = cost
                if best != <Py_ssize_t> labels[y, x]:
                    labels[y, x] = <int> best
                    changes += 1
    return changes


def grid_energy(const double[:, :, ::1] unary,
                const double[:, ::1] wr,
                const double[:, ::1] wd,
                double coupling,
                const int[:, ::1] labels):
    """Total labeling energy (unary sum + coupling * disagreeing edge weight)."""
    cdef Py_ssize_t h = unary.shape[0]
    cdef Py_ssize_t w = unary.shape[1]
    cdef Py_ssize_t y, x
    cdef double unary_total = 0.0
    cdef double horizontal = 0.0
    cdef double vertical = 0.0
    with nogil:
        for y in range(h):
            for x in range(w):
                unary_total += unary[y, x, labels[y, x]]
        for y in range(h):
            for x in range(w - 1):
                if labels[y, x] != labels[y, x + 1]:
                    horizontal += wr[y, x]
        for y in range(h - 1):
            for x in range(w):
                if labels[y, x] != labels[y + 1, x]:
                    vertical += wd[y, x]
    return unary_total + coupling * (horizontal + vertical)
