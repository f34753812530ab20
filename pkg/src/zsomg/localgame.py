"""One-stage games Q(o, b1, b2) = r(o, b) + gamma * Bound(T(o, b)).

Decision rules are flattened into vectors: coordinate ``g * |A| + a`` is the
probability of action ``a`` at the ``g``-th history (sorted by id) carrying
positive mass in ``o``.  Every next-occupancy entry e = (s', h1.a1.z1, h2.a2.z2)
has probability ``c_e * x1[i(e)] * x2[j(e)]``, so with one player's rule fixed
each cone of the next-depth bound becomes a separable convex function of the
other player's coordinates.  That is what makes exact best responses cheap.
"""

from __future__ import annotations

import csv
import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from . import kernels
from .bounds import UPPER, ValueBound
from .model import PosgModel, reward_bounds
from .occupancy import (HISTORIES, OccupancyState, expected_reward, marginal_private_histories,
                        transition)
from .strategy import DecisionRule, DecisionRuleProfile

DEFAULT_BUDGET = 20_000
INNER_BUDGET = 4_000
MAX_GRID_POINTS = 10**6
PIECE_BATCH = 32


class LocalSolverError(RuntimeError):
    pass


@dataclass
class LocalSolution:
    beta1: DecisionRule
    beta2: DecisionRule
    value_lo: float
    value_hi: float
    solver_tag: str
    budget_exceeded: bool = False
    nodes: int = 0

    @property
    def gap(self) -> float:
        return self.value_hi - self.value_lo


@dataclass
class SearchResult:
    point: np.ndarray
    lo: float
    hi: float
    response: np.ndarray
    nodes: int
    exceeded: bool = False


# ---------------------------------------------------------------------------
# cells: products of sub-simplices, one per history

@dataclass
class Cell:
    verts: np.ndarray            # (groups, vertices, actions)
    node_id: int = 0
    depth: int = 0
    hint: np.ndarray | None = field(default=None, repr=False)

    @property
    def center(self) -> np.ndarray:
        return self.verts.mean(axis=1).reshape(-1)

    def radius(self, weights: np.ndarray) -> float:
        c = self.verts.mean(axis=1, keepdims=True)
        return float(weights @ np.abs(self.verts - c).sum(axis=2).max(axis=1))

    def split(self, weights: np.ndarray) -> list["Cell"]:
        """Longest-edge bisection of the component with the largest weighted diameter."""
        V = self.verts
        ng, nk, _ = V.shape
        if nk < 2:
            return []
        pair_d = np.abs(V[:, :, None, :] - V[:, None, :, :]).sum(axis=3)  # g, k, l
        diam = pair_d.reshape(ng, -1).max(axis=1)
        score = weights * diam
        g = int(np.argmax(score))
        if score[g] <= 0.0:
            return []
        k, l = divmod(int(np.argmax(pair_d[g])), nk)
        k, l = min(k, l), max(k, l)
        mid = (V[g, k] + V[g, l]) / 2.0
        a, b = V.copy(), V.copy()
        a[g, k] = mid
        b[g, l] = mid
        return [Cell(a, depth=self.depth + 1), Cell(b, depth=self.depth + 1)]


def root_cell(n_groups: int, n_actions: int) -> Cell:
    return Cell(np.tile(np.eye(n_actions), (n_groups, 1, 1)))


# ---------------------------------------------------------------------------
# the separable min-of-convex game

class CvxGame:
    """F(x, y) = min_p [x' B_p y + kappa_p + eta_p * sum_e |W_pe - c_e x_i(e) y_j(e)|].

    Piece 0 is bilinear (eta_0 = 0, matrix ``B0``); the others share ``B``.
    ``x`` maximises F, ``y`` minimises it.
    """

    def __init__(self, B0, B, kappa, eta, W, c, ix, iy, nx_groups, nx_actions,
                 ny_groups, ny_actions, wx, wy, lipschitz):
        self.B0 = np.ascontiguousarray(B0, dtype=float)
        self.B = np.ascontiguousarray(B, dtype=float)
        self.kappa = np.ascontiguousarray(kappa, dtype=float)
        self.eta = np.ascontiguousarray(eta, dtype=float)
        self.W = np.ascontiguousarray(W, dtype=float)
        self.c = np.asarray(c, dtype=float)
        self.ix = np.asarray(ix, dtype=np.int64)
        self.iy = np.asarray(iy, dtype=np.int64)
        self.gx, self.ax = nx_groups, nx_actions
        self.gy, self.ay = ny_groups, ny_actions
        self.nx, self.ny = nx_groups * nx_actions, ny_groups * ny_actions
        self.wx = np.asarray(wx, dtype=float)
        self.wy = np.asarray(wy, dtype=float)
        self.lipschitz = float(lipschitz)
        self.n_pieces = len(self.kappa)
        self._prepare()

    @property
    def bilinear(self) -> bool:
        return self.n_pieces == 1

    def _prepare(self):
        # entries grouped by y coordinate (inner minimisation) and by x coordinate (cell bounds)
        self.ord_y = np.argsort(self.iy, kind="stable")
        self.ord_x = np.argsort(self.ix, kind="stable")
        self.eptr_y = np.searchsorted(self.iy[self.ord_y], np.arange(self.ny + 1)).astype(np.int64)
        self.eptr_x = np.searchsorted(self.ix[self.ord_x], np.arange(self.nx + 1)).astype(np.int64)
        self.gptr_y = np.arange(0, self.ny + 1, self.ay, dtype=np.int64)
        self.gptr_x = np.arange(0, self.nx + 1, self.ax, dtype=np.int64)
        self.W_y = np.ascontiguousarray(self.W[:, self.ord_y])
        self.W_x = np.ascontiguousarray(self.W[:, self.ord_x])
        self.c_y, self.ix_y = self.c[self.ord_y], self.ix[self.ord_y]
        self.c_x, self.iy_x = self.c[self.ord_x], self.iy[self.ord_x]
        # projection of entries onto (x coordinate, y history): independent of y
        gy_of_e = self.iy // self.ay
        self.proj = self.ix * self.gy + gy_of_e
        nproj = self.nx * self.gy
        self.W_proj = np.stack([np.bincount(self.proj, w, minlength=nproj) for w in self.W]) \
            if self.n_pieces else np.zeros((0, nproj))
        cij = np.zeros((self.nx, self.ny))
        np.add.at(cij, (self.ix, self.iy), self.c)
        self.proj_mass = cij.reshape(self.nx, self.gy, self.ay).mean(axis=2).reshape(-1)

    # -- evaluation ---------------------------------------------------------
    def piece_values(self, x, y) -> np.ndarray:
        T = self.c * x[self.ix] * y[self.iy]
        out = self.kappa + float(x @ self.B @ y) + self.eta * np.abs(self.W - T).sum(axis=1)
        out[0] = self.kappa[0] + float(x @ self.B0 @ y)
        return out

    def value(self, x, y) -> float:
        return float(self.piece_values(x, y).min())

    # -- exact inner minimisation over y ----------------------------------
    def best_response_y(self, x) -> tuple[float, np.ndarray]:
        a0 = (x @ self.B0).reshape(self.gy, self.ay)
        pick = a0.argmin(axis=1)
        best = self.kappa[0] + float(a0[np.arange(self.gy), pick].sum())
        y = np.zeros(self.ny)
        y[np.arange(self.gy) * self.ay + pick] = 1.0
        if self.n_pieces == 1:
            return best, y
        alpha = x @ self.B
        lin_min = float(alpha.reshape(self.gy, self.ay).min(axis=1).sum())
        tproj = np.repeat(x, self.gy) * self.proj_mass
        lb = self.kappa[1:] + lin_min + self.eta[1:] * np.abs(self.W_proj[1:] - tproj).sum(axis=1)
        order = np.argsort(lb, kind="stable") + 1
        lb_sorted = np.sort(lb, kind="stable")
        d = self.c_y * x[self.ix_y]
        pos = 0
        while pos < len(order) and lb_sorted[pos] < best:
            stop = pos
            while stop < len(order) and stop - pos < PIECE_BATCH and lb_sorted[stop] < best:
                stop += 1
            batch = order[pos:stop]
            vals, args = kernels.separable_min(
                np.ascontiguousarray(np.broadcast_to(alpha, (len(batch), self.ny))), d,
                np.ascontiguousarray(self.W_y[batch]), self.eta[batch], self.kappa[batch],
                self.eptr_y, self.gptr_y, np.arange(len(batch), dtype=np.int64))
            k = int(np.argmin(vals))
            if vals[k] < best:
                best, y = float(vals[k]), args[k]
            pos = stop
        return best, y

    # -- upper bound over an x cell for a fixed y ------------------------
    def cell_upper(self, cell: Cell, y: np.ndarray, center_values: np.ndarray | None = None) -> float:
        verts = np.ascontiguousarray(cell.verts)
        a0 = (self.B0 @ y).reshape(self.gx, 1, self.ax)
        best = self.kappa[0] + float((verts * a0).sum(axis=2).max(axis=1).sum())
        if self.n_pieces == 1:
            return best
        if center_values is None:
            center_values = self.piece_values(cell.center, y)
        alpha = self.B @ y
        d = self.c_x * y[self.iy_x]
        cv = center_values[1:]
        order = np.argsort(cv, kind="stable") + 1
        cv_sorted = np.sort(cv, kind="stable")
        pos = 0
        while pos < len(order) and cv_sorted[pos] < best:
            stop = min(pos + PIECE_BATCH, len(order))
            batch = order[pos:stop]
            vals = kernels.vertex_max(
                np.ascontiguousarray(np.broadcast_to(alpha, (len(batch), self.nx))), d,
                np.ascontiguousarray(self.W_x[batch]), self.eta[batch], self.kappa[batch],
                self.eptr_x, self.gptr_x, verts, np.arange(len(batch), dtype=np.int64))
            best = min(best, float(vals.min()))
            pos = stop
        return best

    # -- lower bound over a y cell for a fixed x ------------------------
    def cell_lower(self, cell: Cell, x: np.ndarray) -> float:
        """A value no larger than min over the cell of F(x, .).

        Linear parts are minimised at the cell's vertices; the absolute-value
        terms of the cone pieces are bounded below by zero.
        """
        verts = cell.verts
        a0 = (x @ self.B0).reshape(self.gy, 1, self.ay)
        lb = self.kappa[0] + float((verts * a0).sum(axis=2).min(axis=1).sum())
        if self.n_pieces > 1:
            a = (x @ self.B).reshape(self.gy, 1, self.ay)
            lin = float((verts * a).sum(axis=2).min(axis=1).sum())
            lb = min(lb, float(self.kappa[1:].min()) + lin)
        return lb

    # -- branch and bound ---------------------------------------------------
    def maximin(self, tol: float, budget: int = DEFAULT_BUDGET, trace: list | None = None) -> SearchResult:
        """max_x min_y F with an exact inner minimisation at every node."""
        counter = itertools.count()

        def evaluate(cell: Cell, parent_y):
            x = cell.center
            g, y = self.best_response_y(x)
            hi = g + self.lipschitz * cell.radius(self.wx)
            for cand in (y, parent_y):
                if cand is not None and hi > g:
                    hi = min(hi, self.cell_upper(cell, cand))
            cell.node_id = next(counter)
            cell.hint = y
            if trace is not None:
                trace.append((cell.node_id, cell.depth, cell.radius(self.wx), g, hi))
            return g, max(hi, g), x, y

        root = root_cell(self.gx, self.ax)
        g, hi, x, y = evaluate(root, None)
        best = (g, x, y)
        heap = [(-hi, root.node_id, root)]
        nodes, exceeded, top = 1, False, hi
        while heap:
            top = -heap[0][0]
            if top - best[0] <= tol:
                break
            if nodes >= budget:
                exceeded = True
                break
            _, _, cell = heapq.heappop(heap)
            for child in cell.split(self.wx):
                g, hi, x, y = evaluate(child, cell.hint)
                nodes += 1
                if g > best[0]:
                    best = (g, x, y)
                if hi > best[0]:
                    heapq.heappush(heap, (-hi, child.node_id, child))
        else:
            top = best[0]
        return SearchResult(best[1], best[0], max(top, best[0]), best[2], nodes, exceeded)

    def best_response_x(self, y, tol: float, budget: int = INNER_BUDGET,
                        stop_above: float = math.inf) -> SearchResult:
        """Bracket max_x F(x, y) by branch and bound over x cells."""
        counter = itertools.count()

        def evaluate(cell: Cell):
            x = cell.center
            pv = self.piece_values(x, y)
            v = float(pv.min())
            hi = min(v + self.lipschitz * cell.radius(self.wx), self.cell_upper(cell, y, pv))
            cell.node_id = next(counter)
            return v, max(hi, v), x

        root = root_cell(self.gx, self.ax)
        v, hi, x = evaluate(root)
        best = (v, x)
        heap = [(-hi, root.node_id, root)]
        nodes, exceeded, top = 1, False, hi
        while heap:
            top = -heap[0][0]
            if top - best[0] <= tol or best[0] >= stop_above:
                break
            if nodes >= budget:
                exceeded = True
                break
            _, _, cell = heapq.heappop(heap)
            for child in cell.split(self.wx):
                v, hi, x = evaluate(child)
                nodes += 1
                if v > best[0]:
                    best = (v, x)
                if hi > best[0]:
                    heapq.heappush(heap, (-hi, child.node_id, child))
        else:
            top = best[0]
        return SearchResult(best[1], best[0], max(top, best[0]), y, nodes, exceeded)

    def minimax(self, tol: float, budget: int = DEFAULT_BUDGET, trace: list | None = None) -> SearchResult:
        """min_y max_x F; each node brackets the inner maximum to tol/2."""
        counter = itertools.count()
        incumbent = [math.inf, None, None]  # hi, y, x
        used = [0]

        def evaluate(cell: Cell):
            y = cell.center
            inner = self.best_response_x(y, tol / 2.0, INNER_BUDGET, stop_above=incumbent[0])
            used[0] += inner.nodes
            if inner.hi < incumbent[0]:
                incumbent[:] = [inner.hi, y, inner.point]
            lb = max(inner.lo - self.lipschitz * cell.radius(self.wy), self.cell_lower(cell, inner.point))
            cell.node_id = next(counter)
            if trace is not None:
                trace.append((cell.node_id, cell.depth, cell.radius(self.wy), lb, inner.hi))
            return lb, inner.exceeded

        root = root_cell(self.gy, self.ay)
        lb, inner_exceeded = evaluate(root)
        heap = [(lb, root.node_id, root)]
        nodes, exceeded, bottom = 1, inner_exceeded, lb
        while heap:
            bottom = heap[0][0]
            if incumbent[0] - bottom <= tol:
                break
            if nodes >= budget:
                exceeded = True
                break
            _, _, cell = heapq.heappop(heap)
            for child in cell.split(self.wy):
                lb, ex = evaluate(child)
                exceeded |= ex
                nodes += 1
                if lb < incumbent[0]:
                    heapq.heappush(heap, (lb, child.node_id, child))
        else:
            bottom = incumbent[0]
        return SearchResult(incumbent[1], min(bottom, incumbent[0]), incumbent[0], incumbent[2],
                            nodes, exceeded and incumbent[0] - bottom > tol)

    # -- exact routes for the bilinear case ------------------------------
    def lp_maximin(self) -> tuple[float, np.ndarray]:
        """max_x min_y x'B0 y + kappa_0 by linear programming."""
        return _lp_maximin(self.B0, self.gx, self.ax, self.gy, self.ay, self.kappa[0])

    def lp_minimax(self) -> tuple[float, np.ndarray]:
        v, y = _lp_maximin(-self.B0.T, self.gy, self.ay, self.gx, self.ax, -self.kappa[0])
        return -v, y


def _lp_maximin(M, gx, ax, gy, ay, offset):
    """max over x (per-group simplices) of sum_g min_{j in g} (x'M)_j."""
    nx, ny = gx * ax, gy * ay
    n = nx + gy
    cost = np.concatenate((np.zeros(nx), -np.ones(gy)))
    A_ub = np.zeros((ny, n))
    A_ub[:, :nx] = -M.T
    A_ub[np.arange(ny), nx + np.arange(ny) // ay] = 1.0
    A_eq = np.zeros((gx, n))
    for g in range(gx):
        A_eq[g, g * ax:(g + 1) * ax] = 1.0
    bounds = [(0, None)] * nx + [(None, None)] * gy
    opts = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}
    for attempt in range(3):
        Mu = A_ub if attempt == 0 else A_ub + np.random.default_rng(attempt).normal(
            scale=1e-13, size=A_ub.shape) * (A_ub != 0)
        res = linprog(cost, A_ub=Mu, b_ub=np.zeros(ny), A_eq=A_eq, b_eq=np.ones(gx),
                      bounds=bounds, method="highs", options=opts)
        if res.status == 0:
            x = np.clip(res.x[:nx], 0.0, None).reshape(gx, ax)
            x /= x.sum(axis=1, keepdims=True)
            x = x.reshape(-1)
            # report the value the rounded rule actually guarantees
            val = float((x @ M).reshape(gy, ay).min(axis=1).sum()) + offset
            return val, x
    raise LocalSolverError(f"linear program failed: {res.message}")


# ---------------------------------------------------------------------------
# local games

@dataclass
class _Layout:
    h1: list[int]
    h2: list[int]
    m1: np.ndarray
    m2: np.ndarray
    R: np.ndarray          # (n1, n2) expected immediate reward matrix
    keys: list             # next-occupancy keys
    c: np.ndarray
    i1: np.ndarray
    i2: np.ndarray


def _layout(m: PosgModel, o: OccupancyState) -> _Layout:
    A1, A2 = m.n_actions(1), m.n_actions(2)
    marg1 = marginal_private_histories(o, 1)
    marg2 = marginal_private_histories(o, 2)
    h1, h2 = list(marg1), list(marg2)
    pos1 = {h: k for k, h in enumerate(h1)}
    pos2 = {h: k for k, h in enumerate(h2)}
    R = np.zeros((len(h1) * A1, len(h2) * A2))
    acc: dict[tuple, float] = {}
    idx: dict[tuple, tuple[int, int]] = {}
    ext = HISTORIES.extend
    for (s, a, b), p in o:
        g1, g2 = pos1[a] * A1, pos2[b] * A2
        R[g1:g1 + A1, g2:g2 + A2] += p * m.reward[s]
        for a1 in range(A1):
            for a2 in range(A2):
                for s2, z1, z2, pt in m.successors[s][a1][a2]:
                    key = (s2, ext(a, a1, z1), ext(b, a2, z2))
                    acc[key] = acc.get(key, 0.0) + p * pt
                    idx[key] = (g1 + a1, g2 + a2)
    keys = sorted(acc)
    c = np.array([acc[k] for k in keys])
    i1 = np.array([idx[k][0] for k in keys], dtype=np.int64)
    i2 = np.array([idx[k][1] for k in keys], dtype=np.int64)
    return _Layout(h1, h2, np.array([marg1[h] for h in h1]), np.array([marg2[h] for h in h2]),
                   R, keys, c, i1, i2)


class LocalGame:
    """The stage game at ``o`` against one side of the next-depth bound.

    ``bound=None`` means the next depth is terminal (continuation value 0).
    """

    def __init__(self, m: PosgModel, o: OccupancyState, bound: ValueBound | None = None):
        self.model = m
        self.o = o
        self.bound = bound
        self.gamma = m.gamma
        self.depth = o.depth
        self.layout = _layout(m, o)
        nxt = self.depth + 1
        self._has_next = bound is not None and nxt <= bound.h_max
        slope = bound.max_slope(nxt) if self._has_next else 0.0
        self.lipschitz_q = reward_bounds(m).lambda_r + self.gamma * slope
        self._cvx: CvxGame | None = None

    @property
    def side(self) -> str:
        return self.bound.side if self.bound is not None else UPPER

    @property
    def n_actions(self) -> tuple[int, int]:
        return self.model.n_actions(1), self.model.n_actions(2)

    def _next_parts(self):
        L = self.layout
        n1, n2 = L.R.shape
        G = np.zeros((n1, n2))
        if not self._has_next:
            return G, np.zeros((0, len(L.keys))), np.zeros(0), np.zeros(0), np.zeros(0)
        nxt = self.depth + 1
        vnext = self.bound.init[nxt][[k[0] for k in L.keys]]
        np.add.at(G, (L.i1, L.i2), L.c * vnext)
        W, outside, values, slopes = self.bound.restricted(nxt, L.keys)
        return G, W, outside, values, slopes

    @property
    def bilinear(self) -> bool:
        return not self._has_next or self.bound.n_cones(self.depth + 1) == 0

    def cvx(self) -> CvxGame:
        """The game as F(x, y) with x maximising: Q for the upper side, -Q for the lower."""
        if self._cvx is not None:
            return self._cvx
        L = self.layout
        g = self.gamma
        G, W, outside, values, slopes = self._next_parts()
        A1, A2 = self.n_actions
        ncone = len(values)
        eta = np.concatenate(([0.0], g * slopes))
        Wfull = np.vstack((np.zeros((1, len(L.keys))), W))
        if self.side == UPPER:
            kappa = np.concatenate(([0.0], g * values + g * slopes * outside))
            self._cvx = CvxGame(L.R + g * G, L.R, kappa, eta, Wfull, L.c, L.i1, L.i2,
                                len(L.h1), A1, len(L.h2), A2, L.m1, L.m2, self.lipschitz_q)
        else:
            kappa = np.concatenate(([0.0], -g * values + g * slopes * outside))
            self._cvx = CvxGame(-(L.R + g * G).T, -L.R.T, kappa, eta, Wfull, L.c, L.i2, L.i1,
                                len(L.h2), A2, len(L.h1), A1, L.m2, L.m1, self.lipschitz_q)
        assert self._cvx.n_pieces == ncone + 1
        return self._cvx

    # -- conversions --------------------------------------------------------
    def rule(self, player: int, vec: np.ndarray) -> DecisionRule:
        hs = self.layout.h1 if player == 1 else self.layout.h2
        n = self.n_actions[player - 1]
        vec = np.asarray(vec, dtype=float).reshape(len(hs), n)
        return DecisionRule.from_rows(player, self.depth, {h: vec[k] for k, h in enumerate(hs)})

    def vector(self, rule: DecisionRule) -> np.ndarray:
        hs = self.layout.h1 if rule.player == 1 else self.layout.h2
        return np.concatenate([np.asarray(rule.table[h], dtype=float) for h in hs])

    def q_value(self, x1: np.ndarray, x2: np.ndarray) -> float:
        """Payoff at flattened rules, via the compiled representation."""
        F = self.cvx()
        return F.value(x1, x2) if self.side == UPPER else -F.value(x2, x1)

    def payoff(self, beta1: DecisionRule, beta2: DecisionRule) -> float:
        """r(o, b) + gamma * Bound(T(o, b)), computed from the definitions."""
        d = DecisionRuleProfile(beta1, beta2)
        r = expected_reward(self.model, self.o, d)
        if not self._has_next:
            return r
        return r + self.gamma * self.bound.evaluate(transition(self.model, self.o, d))

    def metric(self, player: int, a: np.ndarray, b: np.ndarray) -> float:
        w = self.layout.m1 if player == 1 else self.layout.m2
        n = self.n_actions[player - 1]
        return float(w @ np.abs(np.asarray(a) - np.asarray(b)).reshape(len(w), n).sum(axis=1))


# ---------------------------------------------------------------------------
# solvers

def _solution(g: LocalGame, x1, x2, lo, hi, tag, res: SearchResult | None = None) -> LocalSolution:
    return LocalSolution(g.rule(1, x1), g.rule(2, x2), float(lo), float(max(hi, lo)), tag,
                         bool(res.exceeded) if res else False, res.nodes if res else 0)


def _terminal(g: LocalGame) -> LocalSolution:
    F = g.cvx()
    v1, xF = F.lp_maximin()
    v2, yF = F.lp_minimax()
    if g.side == UPPER:
        x1, x2, lo, hi = xF, yF, v1, v2
    else:
        x1, x2, lo, hi = yF, xF, -v2, -v1
    # lo and hi are the values guaranteed by each rule; they agree up to LP precision
    lo, hi = min(lo, hi), max(lo, hi)
    return _solution(g, x1, x2, lo, hi, "terminal-lp")


def solve_terminal_lp(o: OccupancyState, m: PosgModel, bound: ValueBound | None = None) -> LocalSolution:
    """Exact equilibrium of a bilinear stage game (terminal depth or fresh next bound)."""
    g = LocalGame(m, o, bound)
    if not g.bilinear:
        raise ValueError("solve_terminal_lp needs a bilinear stage game")
    return _terminal(g)


def nested_doo(g: LocalGame, tol: float, budget: int = DEFAULT_BUDGET,
               trace: list | None = None) -> LocalSolution:
    """Player 1's maximin by optimistic search over cells of its rule space."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    F = g.cvx()
    if g.side == UPPER:
        res = F.maximin(tol, budget, trace)
        return _solution(g, res.point, res.response, res.lo, res.hi, "nested-doo", res)
    res = F.minimax(tol, budget, trace)
    return _solution(g, res.point, res.response, -res.hi, -res.lo, "nested-doo", res)


def solve_maximin(g: LocalGame, tol: float, budget: int = DEFAULT_BUDGET,
                  trace: list | None = None, method: str = "auto") -> LocalSolution:
    """beta1 guarantees at least value_lo; the maximin value lies in the bracket.

    ``method`` is "auto" (linear programming whenever the game is bilinear),
    "lp" or "doo".
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if method not in ("auto", "lp", "doo"):
        raise ValueError(f"unknown method {method!r}")
    if method == "lp" and not g.bilinear:
        raise ValueError("the LP route needs a bilinear stage game")
    if method != "doo" and g.bilinear:
        return _terminal(g)
    return nested_doo(g, tol, budget, trace)


def solve_minimax(g: LocalGame, tol: float, budget: int = DEFAULT_BUDGET,
                  trace: list | None = None, method: str = "auto") -> LocalSolution:
    """beta2 concedes at most value_hi; the minimax value lies in the bracket.

    ``method`` is "auto" (linear programming whenever the game is bilinear),
    "lp" or "doo".
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if method not in ("auto", "lp", "doo"):
        raise ValueError(f"unknown method {method!r}")
    if method == "lp" and not g.bilinear:
        raise ValueError("the LP route needs a bilinear stage game")
    if method != "doo" and g.bilinear:
        return _terminal(g)
    F = g.cvx()
    if g.side == UPPER:
        res = F.minimax(tol, budget, trace)
        return _solution(g, res.response, res.point, res.lo, res.hi, "nested-doo", res)
    res = F.maximin(tol, budget, trace)
    return _solution(g, res.response, res.point, -res.hi, -res.lo, "nested-doo", res)


def _compositions(k: int, n: int):
    for bars in itertools.combinations(range(k + n - 1), n - 1):
        prev, out = -1, []
        for b in bars:
            out.append(b - prev - 1)
            prev = b
        out.append(k + n - 1 - prev - 1)
        yield np.array(out, dtype=float) / k


def grid_solve(g: LocalGame, k: int) -> LocalSolution:
    """Exhaustive maximin over rules with probabilities in multiples of 1/k."""
    if k < 1:
        raise ValueError("grid resolution must be at least 1")
    A1 = g.n_actions[0]
    ng = len(g.layout.h1)
    per = math.comb(k + A1 - 1, A1 - 1)
    if per ** ng > MAX_GRID_POINTS:
        raise ValueError(f"grid of {per}^{ng} points exceeds {MAX_GRID_POINTS}")
    simplex = list(_compositions(k, A1))
    F = g.cvx()
    best = (-math.inf, None, None)
    for combo in itertools.product(simplex, repeat=ng):
        x1 = np.concatenate(combo)
        if g.side == UPPER:
            v, x2 = F.best_response_y(x1)
        else:
            # inner min over player 2 of Q = -max over y-of-F; no exact route, bracket tightly
            res = F.best_response_x(x1, 1e-9, INNER_BUDGET)
            v, x2 = -res.hi, res.point
        if v > best[0]:
            best = (v, x1, x2)
    cover = 2 * (A1 // 2) / k
    lo = best[0]
    return _solution(g, best[1], best[2], lo, lo + 2 * g.lipschitz_q * cover, "grid")


def write_trace(rows: Sequence[tuple], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node_id", "depth", "radius", "lo", "hi"])
        for r in rows:
            w.writerow([r[0], r[1], f"{r[2]:.10g}", f"{r[3]:.10g}", f"{r[4]:.10g}"])
