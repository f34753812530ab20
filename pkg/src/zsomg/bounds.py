"""Upper and lower approximations of the optimal value function.

Each side keeps, per depth, a state-value vector lifted linearly to
occupancy states plus a set of L1 cones.  The upper envelope is

    U(o) = min(sum_s o(s) Vbar(s), min_k value_k + slope_k * |o - w_k|_1)

and the lower envelope is the mirror image with max and minus.
"""

from __future__ import annotations

import copy
import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .model import PosgModel, reward_bounds, static_horizon_bounds
from .occupancy import Key, OccupancyState, state_distribution

PRUNE_EVERY = 50
DOMINANCE_MARGIN = 1e-12
UPPER, LOWER = "upper", "lower"


def static_lambda(m: PosgModel, tau: int) -> float:
    lo, hi = static_horizon_bounds(m, tau)
    return (hi - lo) / 2.0


@dataclass
class LipschitzSchedule:
    lambdas: np.ndarray
    lambda_r: float
    mode: str = "static"
    static: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.mode not in ("static", "refined"):
            raise ValueError(f"unknown Lipschitz mode {self.mode!r}")
        self.lambdas = np.asarray(self.lambdas, dtype=float)
        if self.static is None:
            self.static = self.lambdas.copy()
        if np.any(self.lambdas < 0):
            raise ValueError("Lipschitz constants must be non-negative")

    @classmethod
    def for_model(cls, m: PosgModel, h_max: int, mode: str = "static") -> "LipschitzSchedule":
        lams = np.array([static_lambda(m, t) for t in range(h_max + 1)])
        return cls(lams, reward_bounds(m).lambda_r, mode)

    def __getitem__(self, tau: int) -> float:
        return float(self.lambdas[min(tau, len(self.lambdas) - 1)])

    @property
    def max_lambda(self) -> float:
        return float(self.lambdas.max())


@dataclass(frozen=True)
class Cone:
    vertex: OccupancyState
    value: float
    slope: float
    direction: str  # "down" on the upper side, "up" on the lower side
    cone_id: int = 0


class _DepthCones:
    """Cones of one depth in a dense (cone x occupancy-key) matrix."""

    def __init__(self):
        self.index: dict[Key, int] = {}
        self.mat = np.zeros((8, 8))
        self.n = 0
        self.values = np.zeros(8)
        self.slopes = np.zeros(8)
        self.ids: list[int] = []
        self.vertices: list[OccupancyState] = []
        self.since_prune = 0

    @property
    def ncols(self) -> int:
        return len(self.index)

    def _grow(self, rows: int, cols: int):
        r, c = self.mat.shape
        if rows <= r and cols <= c:
            return
        nr, nc = max(r, 1), max(c, 1)
        while nr < rows:
            nr *= 2
        while nc < cols:
            nc *= 2
        mat = np.zeros((nr, nc))
        mat[:r, :c] = self.mat
        self.mat = mat
        if nr > len(self.values):
            self.values = np.resize(self.values, nr)
            self.slopes = np.resize(self.slopes, nr)

    def query(self, o: OccupancyState) -> tuple[np.ndarray, float]:
        # padded to the matrix capacity: unused columns are zero on both sides
        q = np.zeros(self.mat.shape[1])
        outside = 0.0
        for k, p in o:
            col = self.index.get(k)
            if col is None:
                outside += p
            else:
                q[col] = p
        return q, outside

    def distances(self, o: OccupancyState) -> np.ndarray:
        if self.n == 0:
            return np.zeros(0)
        q, outside = self.query(o)
        return kernels.l1_rows(self.mat[:self.n], q) + outside

    def append(self, o: OccupancyState, value: float, slope: float, cid: int):
        for k, _ in o:
            if k not in self.index:
                self.index[k] = len(self.index)
        self._grow(self.n + 1, self.ncols)
        row = self.mat[self.n]
        row[:] = 0.0
        for k, p in o:
            row[self.index[k]] = p
        self.values[self.n] = value
        self.slopes[self.n] = slope
        self.ids.append(cid)
        self.vertices.append(o)
        self.n += 1
        self.since_prune += 1

    def remove(self, rows: Sequence[int]):
        keep = np.setdiff1d(np.arange(self.n), np.asarray(rows, dtype=int))
        k = len(keep)
        self.mat[:k] = self.mat[keep]
        self.mat[k:self.n] = 0.0
        self.values[:k] = self.values[keep]
        self.slopes[:k] = self.slopes[keep]
        self.ids = [self.ids[i] for i in keep]
        self.vertices = [self.vertices[i] for i in keep]
        self.n = k


class ValueBound:
    """One side (upper or lower) of the value-function sandwich."""

    def __init__(self, side: str, model: PosgModel, init: Sequence[np.ndarray]):
        if side not in (UPPER, LOWER):
            raise ValueError(f"side must be {UPPER!r} or {LOWER!r}")
        self.side = side
        self.model = model
        self.init = [np.asarray(v, dtype=float) for v in init]
        self._cones = [_DepthCones() for _ in self.init]
        self._next_id = 0
        self.pruned = 0

    # -- geometry -----------------------------------------------------------
    @property
    def sign(self) -> float:
        return 1.0 if self.side == UPPER else -1.0

    @property
    def h_max(self) -> int:
        return len(self.init) - 1

    def _depth(self, tau: int) -> int:
        if tau > self.h_max:
            raise ValueError(f"depth {tau} beyond bound horizon {self.h_max}")
        return tau

    def init_value(self, o: OccupancyState) -> float:
        return float(state_distribution(self.model, o) @ self.init[self._depth(o.depth)])

    def init_lipschitz(self, tau: int) -> float:
        v = self.init[tau]
        return float(v.max() - v.min()) / 2.0

    def n_cones(self, tau: int | None = None) -> int:
        if tau is None:
            return sum(c.n for c in self._cones)
        return self._cones[tau].n

    def cones(self, tau: int) -> list[Cone]:
        st = self._cones[tau]
        d = "down" if self.side == UPPER else "up"
        return [Cone(st.vertices[i], float(st.values[i]), float(st.slopes[i]), d, st.ids[i])
                for i in range(st.n)]

    def max_slope(self, tau: int) -> float:
        st = self._cones[tau]
        s = self.init_lipschitz(tau)
        if st.n:
            s = max(s, float(st.slopes[:st.n].max()))
        return s

    def evaluate(self, o: OccupancyState) -> float:
        tau = self._depth(o.depth)
        base = self.init_value(o)
        st = self._cones[tau]
        if st.n == 0:
            return base
        dist = st.distances(o)
        vals, slopes = st.values[:st.n], st.slopes[:st.n]
        if self.side == UPPER:
            return float(min(base, (vals + slopes * dist).min()))
        return float(max(base, (vals - slopes * dist).max()))

    def extreme(self, tau: int) -> float:
        """Largest (upper) or smallest (lower) initial value or cone summit at ``tau``."""
        st = self._cones[tau]
        v = self.init[tau]
        if self.side == UPPER:
            out = float(v.max())
            return max(out, float(st.values[:st.n].max())) if st.n else out
        out = float(v.min())
        return min(out, float(st.values[:st.n].min())) if st.n else out

    def restricted(self, tau: int, keys: Sequence[Key]):
        """Cone data restricted to ``keys``: (W, outside_mass, values, slopes).

        ``W[k, e]`` is cone k's vertex mass on ``keys[e]``; ``outside_mass[k]``
        is the remaining vertex mass.
        """
        st = self._cones[tau]
        n = st.n
        cols = np.array([st.index.get(k, -1) for k in keys], dtype=np.int64)
        W = np.zeros((n, len(keys)))
        if n:
            hit = cols >= 0
            W[:, hit] = st.mat[:n, cols[hit]]
            total = st.mat[:n, :st.ncols].sum(axis=1)
            outside = np.clip(total - W.sum(axis=1), 0.0, None)
        else:
            outside = np.zeros(0)
        return W, outside, st.values[:n].copy(), st.slopes[:n].copy()

    # -- updates ------------------------------------------------------------
    def _dominated(self, st: _DepthCones, o: OccupancyState, value: float, slope: float,
                   dist: np.ndarray | None = None, skip: int = -1) -> bool:
        """Is the cone (o, value, slope) dominated everywhere by one flatter piece?"""
        s = self.sign
        if self.init_lipschitz(o.depth) <= slope + 1e-15:
            if s * (self.init_value(o) - value) <= -DOMINANCE_MARGIN:
                return True
        if st.n == 0:
            return False
        if dist is None:
            dist = st.distances(o)
        vals, slopes = st.values[:st.n], st.slopes[:st.n]
        ok = (slopes <= slope + 1e-15) & (s * (vals + s * slopes * dist - value) <= -DOMINANCE_MARGIN)
        if 0 <= skip < st.n:
            ok[skip] = False
        return bool(ok.any())

    def add_cone(self, o: OccupancyState, value: float, slope: float) -> bool:
        """Insert a cone at ``o``; returns False when it is provably redundant."""
        if slope < 0:
            raise ValueError("cone slope must be non-negative")
        tau = self._depth(o.depth)
        st = self._cones[tau]
        if self._dominated(st, o, value, slope):
            return False
        st.append(o, float(value), float(slope), self._next_id)
        self._next_id += 1
        if st.since_prune >= PRUNE_EVERY:
            self.prune(tau)
        return True

    def prune(self, tau: int) -> int:
        """Drop cones that a single no-steeper piece dominates at their vertex.

        By the triangle inequality such a cone is dominated everywhere, so the
        envelope is unchanged.  Strict margins rule out mutual domination, so
        dominated cones can all go at once.  Pairs of old cones were checked
        at the previous pass and are skipped.
        """
        st = self._cones[tau]
        n, s = st.n, self.sign
        recent = max(n - st.since_prune, 0)
        st.since_prune = 0
        if n == 0:
            return 0
        vals, slopes = st.values[:n], st.slopes[:n]
        # D[r, k] = |w_{recent+r} - w_k|_1
        D = np.stack([st.distances(st.vertices[j]) for j in range(recent, n)])
        flat = slopes[recent:, None] <= slopes[None, :] + 1e-15
        beats = flat & (s * (vals[recent:, None] + s * slopes[recent:, None] * D
                             - vals[None, :]) <= -DOMINANCE_MARGIN)
        beats[np.arange(n - recent), np.arange(recent, n)] = False
        drop = set(np.flatnonzero(beats.any(axis=0)).tolist())
        lip = self.init_lipschitz(tau)
        for k in range(recent, n):
            if k not in drop and lip <= slopes[k] + 1e-15 and \
                    s * (self.init_value(st.vertices[k]) - vals[k]) <= -DOMINANCE_MARGIN:
                drop.add(k)
        if drop:
            st.remove(sorted(drop))
            self.pruned += len(drop)
        return len(drop)

    def snapshot(self) -> "ValueBound":
        return copy.deepcopy(self)

    # -- output -------------------------------------------------------------
    def dump_csv(self, out=None) -> str:
        """CSV ``depth,kind,vertex_id,value,slope``; init rows use the state index."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["depth", "kind", "vertex_id", "value", "slope"])
        for tau, v in enumerate(self.init):
            lip = self.init_lipschitz(tau)
            for s, val in enumerate(v):
                w.writerow([tau, "init", s, f"{val:.12g}", f"{lip:.12g}"])
            for c in self.cones(tau):
                w.writerow([tau, "cone", c.cone_id, f"{c.value:.12g}", f"{c.slope:.12g}"])
        text = buf.getvalue()
        if out is not None:
            with open(out, "w") as fh:
                fh.write(text)
        return text


# ---------------------------------------------------------------------------
# initialisation

def _backup(m: PosgModel, nxt: np.ndarray, pick) -> np.ndarray:
    Ps = m.transition.sum(axis=(4, 5))  # S, A1, A2, S'
    q = m.reward + m.gamma * Ps @ nxt
    return pick(q.reshape(m.n_states, -1), axis=1)


def _stationary(m: PosgModel, pick, tol: float = 1e-13) -> np.ndarray:
    v = np.zeros(m.n_states)
    for _ in range(100_000):
        nv = _backup(m, v, pick)
        if np.max(np.abs(nv - v)) <= tol:
            return nv
        v = nv
    return v


def _cooperative_values(m: PosgModel, h_max: int, pick) -> list[np.ndarray]:
    if m.horizon is None:
        v = _stationary(m, pick)
        return [v.copy() for _ in range(h_max + 1)]
    vals = [np.zeros(m.n_states)]
    for _ in range(m.horizon):
        vals.append(_backup(m, vals[-1], pick))
    vals = vals[::-1]
    return vals[:h_max + 1] if h_max < m.horizon else vals


def init_upper(m: PosgModel, h_max: int | None = None) -> ValueBound:
    """Both players maximise: the cooperative relaxation bounds V* from above."""
    h = m.horizon if h_max is None else h_max
    return ValueBound(UPPER, m, _cooperative_values(m, h, np.max))


def init_lower(m: PosgModel, h_max: int | None = None) -> ValueBound:
    h = m.horizon if h_max is None else h_max
    return ValueBound(LOWER, m, _cooperative_values(m, h, np.min))


def eval_bound(b: ValueBound, o: OccupancyState) -> float:
    return b.evaluate(o)


def add_cone(b: ValueBound, o: OccupancyState, v: float, slope: float) -> ValueBound:
    b.add_cone(o, v, slope)
    return b


def refresh_refined_constants(U: ValueBound, L: ValueBound,
                              schedule: LipschitzSchedule) -> LipschitzSchedule:
    """Tighten each depth's constant to half the current range of the bounds."""
    if schedule.mode != "refined":
        return schedule
    lams = schedule.lambdas.copy()
    for tau in range(min(len(lams), U.h_max + 1)):
        refined = max(U.extreme(tau) - L.extreme(tau), 0.0) / 2.0
        lams[tau] = min(lams[tau], schedule.static[tau], refined)
    return LipschitzSchedule(lams, schedule.lambda_r, "refined", schedule.static.copy())


def width(U: ValueBound, L: ValueBound, o: OccupancyState) -> float:
    return U.evaluate(o) - L.evaluate(o)


def sup_gap(U: ValueBound, L: ValueBound) -> float:
    """max over depths and states of (Vbar - Vunder) for the initial vectors."""
    return max(float(np.max(u - l)) for u, l in zip(U.init, L.init))

