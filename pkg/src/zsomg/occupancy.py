"""Occupancy states and the deterministic occupancy-game dynamics.

Private action-observation histories are interned: every history is an
integer id, id 0 is the empty history, and ``HISTORIES.extend(h, a, z)``
returns the id of ``h`` followed by ``(a, z)``.  Ids are shared by both
players (a history is just a sequence of index pairs).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

from .model import PosgModel

PRUNE_EPS = 1e-12
EQ_TOL = 1e-12
MASS_TOL = 1e-9


class HistoryInterner:
    def __init__(self):
        self._lock = threading.Lock()
        self._parent = [-1]
        self._step = [(-1, -1)]
        self._depth = [0]
        self._index: dict[tuple[int, int, int], int] = {}

    def extend(self, h: int, a: int, z: int) -> int:
        key = (h, a, z)
        hid = self._index.get(key)
        if hid is None:
            with self._lock:
                hid = self._index.get(key)
                if hid is None:
                    hid = len(self._parent)
                    self._parent.append(h)
                    self._step.append((a, z))
                    self._depth.append(self._depth[h] + 1)
                    self._index[key] = hid
        return hid

    def depth(self, h: int) -> int:
        return self._depth[h]

    def parent(self, h: int) -> int:
        return self._parent[h]

    def last(self, h: int) -> tuple[int, int]:
        return self._step[h]

    def steps(self, h: int) -> tuple[tuple[int, int], ...]:
        out = []
        while h > 0:
            out.append(self._step[h])
            h = self._parent[h]
        return tuple(reversed(out))

    def from_steps(self, steps: Iterable[tuple[int, int]]) -> int:
        h = 0
        for a, z in steps:
            h = self.extend(h, int(a), int(z))
        return h

    def render(self, h: int) -> str:
        """``a1z1.a2z2`` chain, e.g. ``0z1.2z0``; the empty history is ``-``."""
        steps = self.steps(h)
        if not steps:
            return "-"
        return ".".join(f"{a}z{z}" for a, z in steps)

    def parse(self, text: str) -> int:
        if text in ("-", ""):
            return 0
        steps = []
        for part in text.split("."):
            a, z = part.split("z")
            steps.append((int(a), int(z)))
        return self.from_steps(steps)


HISTORIES = HistoryInterner()
EMPTY = 0


@dataclass(frozen=True)
class JointHistory:
    theta1: tuple[tuple[int, int], ...]
    theta2: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if len(self.theta1) != len(self.theta2):
            raise ValueError("joint history components must have equal length")

    @property
    def depth(self) -> int:
        return len(self.theta1)

    @classmethod
    def from_ids(cls, h1: int, h2: int) -> "JointHistory":
        return cls(HISTORIES.steps(h1), HISTORIES.steps(h2))

    def ids(self) -> tuple[int, int]:
        return HISTORIES.from_steps(self.theta1), HISTORIES.from_steps(self.theta2)


Key = tuple  # (state, history-id of player 1, history-id of player 2)


class OccupancyState:
    """Sparse distribution over (state, h1, h2) at a fixed depth."""

    __slots__ = ("depth", "_entries", "_hash")

    def __init__(self, depth: int, entries: Mapping[Key, float], *, normalize: bool = False,
                 check: bool = True):
        clean = {k: float(p) for k, p in entries.items() if p > PRUNE_EPS}
        total = sum(clean.values())
        if normalize and clean:
            clean = {k: p / total for k, p in clean.items()}
            total = 1.0
        if check:
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"occupancy mass is {total!r}, expected 1")
            for s, h1, h2 in clean:
                if HISTORIES.depth(h1) != depth or HISTORIES.depth(h2) != depth:
                    raise ValueError(f"history depth mismatch in key {(s, h1, h2)} at depth {depth}")
        self.depth = depth
        self._entries = MappingProxyType(dict(sorted(clean.items())))
        self._hash = None

    @property
    def entries(self) -> Mapping[Key, float]:
        return self._entries

    def __len__(self):
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries.items())

    def get(self, key: Key) -> float:
        return self._entries.get(key, 0.0)

    def close_to(self, other: "OccupancyState", tol: float = EQ_TOL) -> bool:
        if self.depth != other.depth or self._entries.keys() != other._entries.keys():
            return False
        return all(abs(p - other._entries[k]) <= tol for k, p in self._entries.items())

    def __eq__(self, other):
        return isinstance(other, OccupancyState) and self.close_to(other)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.depth, tuple(self._entries.keys())))
        return self._hash

    def __repr__(self):
        return f"OccupancyState(depth={self.depth}, support={len(self)})"

    def __reduce__(self):
        return (_rebuild, (self.depth, dict(self._entries)))

    def dump(self) -> str:
        """One ``state<TAB>h1<TAB>h2<TAB>prob`` line per entry."""
        lines = []
        for (s, h1, h2), p in self._entries.items():
            lines.append(f"{s}\t{HISTORIES.render(h1)}\t{HISTORIES.render(h2)}\t{p:.12g}")
        return "\n".join(lines) + ("\n" if lines else "")


def _rebuild(depth, entries):
    return OccupancyState(depth, entries, check=False)


def mix(a: OccupancyState, b: OccupancyState, alpha: float) -> OccupancyState:
    if a.depth != b.depth:
        raise ValueError("cannot mix occupancy states of different depths")
    keys = set(a.entries) | set(b.entries)
    return OccupancyState(a.depth, {k: alpha * a.get(k) + (1 - alpha) * b.get(k) for k in keys})


def initial_occupancy(m: PosgModel) -> OccupancyState:
    return OccupancyState(0, {(s, EMPTY, EMPTY): float(p) for s, p in enumerate(m.b0) if p > 0})


def _rule_row(rule, h, player):
    try:
        return rule.table[h]
    except KeyError:
        raise KeyError(f"player {player} decision rule has no entry for history "
                       f"{HISTORIES.render(h)}") from None


def _check_depths(o, d):
    if d.depth != o.depth:
        raise ValueError(f"decision rules at depth {d.depth} applied to occupancy at depth {o.depth}")


def push_forward(m: PosgModel, o: OccupancyState, d) -> dict[Key, float]:
    """Unnormalised next-step weights; linear in ``o`` and in each decision rule.

    o'(s', (h1,a1,z1), (h2,a2,z2)) = b1(h1,a1) b2(h2,a2) sum_s P(s',z1,z2|s,a1,a2) o(s,h1,h2)
    """
    _check_depths(o, d)
    out: dict[Key, float] = {}
    succ = m.successors
    ext = HISTORIES.extend
    for (s, h1, h2), p in o.entries.items():
        row1 = _rule_row(d.beta1, h1, 1)
        row2 = _rule_row(d.beta2, h2, 2)
        for a1, q1 in enumerate(row1):
            if q1 <= 0.0:
                continue
            for a2, q2 in enumerate(row2):
                if q2 <= 0.0:
                    continue
                w = p * q1 * q2
                for s2, z1, z2, pt in succ[s][a1][a2]:
                    key = (s2, ext(h1, a1, z1), ext(h2, a2, z2))
                    out[key] = out.get(key, 0.0) + w * pt
    return out


def transition(m: PosgModel, o: OccupancyState, d) -> OccupancyState:
    """Next occupancy state under decision-rule profile ``d``."""
    out = push_forward(m, o, d)
    total = sum(out.values())
    if abs(total - 1.0) > MASS_TOL:
        raise ValueError(f"transition lost mass: total {total!r}")
    # renormalising only absorbs rounding and pruned dust
    return OccupancyState(o.depth + 1, out, normalize=True)


def expected_reward(m: PosgModel, o: OccupancyState, d) -> float:
    _check_depths(o, d)
    total = 0.0
    R = m.reward
    for (s, h1, h2), p in o.entries.items():
        row1 = _rule_row(d.beta1, h1, 1)
        row2 = _rule_row(d.beta2, h2, 2)
        total += p * float(row1 @ R[s] @ row2)
    return total


def l1_distance(a: OccupancyState, b: OccupancyState) -> float:
    if a.depth != b.depth:
        raise ValueError(f"depth mismatch: {a.depth} vs {b.depth}")
    ea, eb = a.entries, b.entries
    total = 0.0
    for k, p in ea.items():
        total += abs(p - eb.get(k, 0.0))
    for k, p in eb.items():
        if k not in ea:
            total += p
    return total


def marginal_private_histories(o: OccupancyState, player: int) -> dict[int, float]:
    if player not in (1, 2):
        raise ValueError("player must be 1 or 2")
    out: dict[int, float] = {}
    for (s, h1, h2), p in o.entries.items():
        h = h1 if player == 1 else h2
        out[h] = out.get(h, 0.0) + p
    return dict(sorted((h, p) for h, p in out.items() if p > 0))


def state_distribution(m: PosgModel, o: OccupancyState) -> np.ndarray:
    b = np.zeros(m.n_states)
    for (s, _, _), p in o.entries.items():
        b[s] += p
    return b
