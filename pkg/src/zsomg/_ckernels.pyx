# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; ``zsomg._pykernels`` documents the shared layout."""

import numpy as np
from libc.stdlib cimport malloc, free, qsort
from libc.math cimport fabs


cdef struct Segment:
    double slope
    double length
    long coord
    long rank


cdef struct Breakpoint:
    double pos
    double inc


cdef int _cmp_segment(const void* pa, const void* pb) noexcept nogil:
    cdef const Segment* a = <const Segment*> pa
    cdef const Segment* b = <const Segment*> pb
    if a.slope < b.slope:
        return -1
    if a.slope > b.slope:
        return 1
    if a.coord != b.coord:
        return -1 if a.coord < b.coord else 1
    if a.rank != b.rank:
        return -1 if a.rank < b.rank else 1
    return 0


cdef int _cmp_breakpoint(const void* pa, const void* pb) noexcept nogil:
    cdef double a = (<const Breakpoint*> pa).pos
    cdef double b = (<const Breakpoint*> pb).pos
    if a < b:
        return -1
    if a > b:
        return 1
    return 0


def separable_min(const double[:, ::1] alpha, const double[::1] d, const double[:, ::1] W,
                  const double[::1] eta, const double[::1] kappa, const long[::1] eptr,
                  const long[::1] gptr, const long[::1] pieces):
    cdef Py_ssize_t nvar = eptr.shape[0] - 1
    cdef Py_ssize_t ngroups = gptr.shape[0] - 1
    cdef Py_ssize_t npieces = pieces.shape[0]
    cdef Py_ssize_t nent = d.shape[0]
    values_np = np.empty(npieces, dtype=np.float64)
    args_np = np.zeros((npieces, nvar), dtype=np.float64)
    cdef double[::1] values = values_np
    cdef double[:, ::1] args = args_np
    cdef Segment* segs = <Segment*> malloc((nent + nvar + 1) * sizeof(Segment))
    cdef Breakpoint* bps = <Breakpoint*> malloc((nent + 1) * sizeof(Breakpoint))
    cdef Py_ssize_t q, p, g, j, e, k, nseg, nbp
    cdef double total, e_eta, w, de, slope, start, remaining, take
    if segs == NULL or bps == NULL:
        free(segs)
        free(bps)
        raise MemoryError()
    try:
        with nogil:
            for q in range(npieces):
                p = pieces[q]
                e_eta = eta[p]
                total = kappa[p]
                for g in range(ngroups):
                    nseg = 0
                    for j in range(gptr[g], gptr[g + 1]):
                        slope = alpha[p, j]
                        nbp = 0
                        for e in range(eptr[j], eptr[j + 1]):
                            w = W[p, e]
                            de = d[e]
                            total += e_eta * w
                            if de > 0.0:
                                if w > 0.0:
                                    slope -= e_eta * de
                                    if w < de:
                                        bps[nbp].pos = w / de
                                        bps[nbp].inc = 2.0 * e_eta * de
                                        nbp += 1
                                else:
                                    slope += e_eta * de
                        if nbp > 1:
                            qsort(bps, nbp, sizeof(Breakpoint), _cmp_breakpoint)
                        start = 0.0
                        for k in range(nbp):
                            if bps[k].pos > start:
                                segs[nseg].slope = slope
                                segs[nseg].length = bps[k].pos - start
                                segs[nseg].coord = j
                                segs[nseg].rank = k
                                nseg += 1
                                start = bps[k].pos
                            slope += bps[k].inc
                        if start < 1.0:
                            segs[nseg].slope = slope
                            segs[nseg].length = 1.0 - start
                            segs[nseg].coord = j
                            segs[nseg].rank = nbp
                            nseg += 1
                    qsort(segs, nseg, sizeof(Segment), _cmp_segment)
                    remaining = 1.0
                    for k in range(nseg):
                        if remaining <= 0.0:
                            break
                        take = segs[k].length if segs[k].length < remaining else remaining
                        total += take * segs[k].slope
                        args[q, segs[k].coord] += take
                        remaining -= take
                values[q] = total
    finally:
        free(segs)
        free(bps)
    return values_np, args_np


def vertex_max(const double[:, ::1] alpha, const double[::1] d, const double[:, ::1] W,
               const double[::1] eta, const double[::1] kappa, const long[::1] eptr,
               const long[::1] gptr, const double[:, :, ::1] verts, const long[::1] pieces):
    cdef Py_ssize_t ngroups = verts.shape[0]
    cdef Py_ssize_t nk = verts.shape[1]
    cdef Py_ssize_t na = verts.shape[2]
    cdef Py_ssize_t npieces = pieces.shape[0]
    out_np = np.empty(npieces, dtype=np.float64)
    cdef double[::1] out = out_np
    cdef Py_ssize_t q, p, g, k, a, j, e
    cdef double total, best, acc, t, e_eta
    with nogil:
        for q in range(npieces):
            p = pieces[q]
            e_eta = eta[p]
            total = kappa[p]
            for g in range(ngroups):
                best = -1e300
                for k in range(nk):
                    acc = 0.0
                    for a in range(na):
                        j = gptr[g] + a
                        t = verts[g, k, a]
                        acc += alpha[p, j] * t
                        for e in range(eptr[j], eptr[j + 1]):
                            acc += e_eta * fabs(W[p, e] - d[e] * t)
                    if acc > best:
                        best = acc
                total += best
            out[q] = total
    return out_np


def l1_rows(const double[:, ::1] V, const double[::1] q):
    cdef Py_ssize_t n = V.shape[0]
    cdef Py_ssize_t m = V.shape[1]
    out_np = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_np
    cdef Py_ssize_t i, j
    cdef double acc
    with nogil:
        for i in range(n):
            acc = 0.0
            for j in range(m):
                acc += fabs(V[i, j] - q[j])
            out[i] = acc
    return out_np
