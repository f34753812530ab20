"""Pure numpy kernels.  The compiled module mirrors these signatures exactly.

Shared layout: a piece p is the convex function

    kappa[p] + alpha[p] . x + eta[p] * sum_e |W[p, e] - d[e] * x[c(e)]|

of a vector x living on a product of simplices.  Entries are stored sorted
by coordinate, so the entries of coordinate c are columns ``eptr[c]:eptr[c+1]``,
and the simplices are coordinate ranges ``gptr[g]:gptr[g+1]``.
"""

from __future__ import annotations

import numpy as np


def _coord_of_entry(eptr):
    counts = np.diff(eptr)
    return np.repeat(np.arange(len(counts)), counts)


def _group_of_coord(gptr, nvar):
    return np.repeat(np.arange(len(gptr) - 1), np.diff(gptr))[:nvar]


def separable_min(alpha, d, W, eta, kappa, eptr, gptr, pieces):
    """Exact minimum of each listed piece, with a minimiser.

    Each coordinate contributes a 1-D convex piecewise-linear function, so
    filling each simplex with the cheapest slope segments first is optimal.
    """
    nvar = len(eptr) - 1
    coord = _coord_of_entry(eptr)
    group = _group_of_coord(gptr, nvar)
    pos = d > 0
    values = np.empty(len(pieces))
    args = np.zeros((len(pieces), nvar))
    for q, p in enumerate(pieces):
        w = W[p]
        e_eta = eta[p]
        f0 = e_eta * w.sum()
        s0 = alpha[p] + e_eta * np.bincount(coord[pos], np.where(w[pos] > 0, -d[pos], d[pos]),
                                            minlength=nvar)
        bmask = pos & (w > 0) & (w < d)
        bc = coord[bmask]
        bp = w[bmask] / d[bmask]
        inc = 2.0 * e_eta * d[bmask]
        order = np.lexsort((bp, bc))
        bc, bp, inc = bc[order], bp[order], inc[order]
        # slope after each breakpoint = s0 + cumulative increments within the coordinate
        cum = np.cumsum(inc)
        first = np.searchsorted(bc, np.arange(nvar))
        base = np.concatenate(([0.0], cum))[first]
        after = s0[bc] + cum - base[bc]
        # segments: one starting at 0 per coordinate, one after each breakpoint
        seg_c = np.concatenate((np.arange(nvar), bc))
        seg_start = np.concatenate((np.zeros(nvar), bp))
        seg_slope = np.concatenate((s0, after))
        rank = np.concatenate((np.zeros(nvar, dtype=np.int64),
                               np.arange(len(bc)) - first[bc] + 1))
        o2 = np.lexsort((rank, seg_c))
        seg_c, seg_start, seg_slope, rank = seg_c[o2], seg_start[o2], seg_slope[o2], rank[o2]
        nxt = np.append(seg_start[1:], 1.0)
        last = np.append(seg_c[1:] != seg_c[:-1], True)
        seg_end = np.where(last, 1.0, nxt)
        length = seg_end - seg_start
        keep = length > 0
        seg_c, seg_slope, length, rank = seg_c[keep], seg_slope[keep], length[keep], rank[keep]
        seg_g = group[seg_c]
        o3 = np.lexsort((rank, seg_c, seg_slope, seg_g))
        seg_c, seg_slope, length, seg_g = seg_c[o3], seg_slope[o3], length[o3], seg_g[o3]
        csum = np.cumsum(length)
        gstart = np.searchsorted(seg_g, np.arange(len(gptr) - 1))
        before = np.concatenate(([0.0], csum))[gstart][seg_g]
        used = csum - length - before
        take = np.clip(1.0 - used, 0.0, length)
        values[q] = kappa[p] + f0 + float(take @ seg_slope)
        args[q] = np.bincount(seg_c, take, minlength=nvar)
    return values, args


def vertex_max(alpha, d, W, eta, kappa, eptr, gptr, verts, pieces):
    """Per piece, kappa + sum over simplices of the max over the cell's vertices.

    ``verts[g, k, a]`` is coordinate ``gptr[g] + a`` of vertex ``k`` of the
    cell's component on simplex ``g``.  A convex function on a simplex peaks
    at a vertex, and the pieces are separable across simplices, so this is
    an upper bound on the piece over the whole cell.
    """
    nvar = len(eptr) - 1
    coord = _coord_of_entry(eptr)
    ng, nk, na = verts.shape
    # xv[k, c]: value of coordinate c at vertex k of its own simplex
    xv = verts.transpose(1, 0, 2).reshape(nk, ng * na)[:, :nvar]
    group = _group_of_coord(gptr, nvar)
    out = np.empty(len(pieces))
    for q, p in enumerate(pieces):
        lin = alpha[p][None, :] * xv
        dev = np.abs(W[p][None, :] - d[None, :] * xv[:, coord])
        per_coord = lin + eta[p] * np.stack([np.bincount(coord, row, minlength=nvar) for row in dev])
        per_group = np.stack([np.bincount(group, row, minlength=ng) for row in per_coord])
        out[q] = kappa[p] + per_group.max(axis=0).sum()
    return out


def l1_rows(V, q):
    return np.abs(V - q[None, :]).sum(axis=1)
