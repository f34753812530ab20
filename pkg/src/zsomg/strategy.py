"""Decision rules, behavioral and pure strategies, exact profile evaluation."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .model import PosgModel
from .occupancy import (HISTORIES, OccupancyState, expected_reward, marginal_private_histories,
                        transition)

MAX_PURE_STRATEGIES = 10**6


class CoverageError(KeyError):
    """A strategy has no rule for a history it is asked to act on."""


class ExplosionError(RuntimeError):
    """An enumeration would exceed its size guard."""


@dataclass(frozen=True, eq=False)
class DecisionRule:
    player: int
    depth: int
    table: Mapping[int, np.ndarray]

    def __post_init__(self):
        for h, row in self.table.items():
            row = np.asarray(row, dtype=float)
            if np.any(row < -1e-12) or abs(row.sum() - 1.0) > 1e-9:
                raise ValueError(f"rule row for history {HISTORIES.render(h)} is not a distribution: {row}")

    def __getitem__(self, h: int) -> np.ndarray:
        return self.table[h]

    @classmethod
    def from_rows(cls, player: int, depth: int, rows: Mapping[int, Sequence[float]]) -> "DecisionRule":
        table = {}
        for h, row in rows.items():
            arr = np.clip(np.asarray(row, dtype=float), 0.0, None)
            arr = arr / arr.sum()
            arr.setflags(write=False)
            table[h] = arr
        return cls(player, depth, table)


@dataclass(frozen=True, eq=False)
class DecisionRuleProfile:
    beta1: DecisionRule
    beta2: DecisionRule

    def __post_init__(self):
        if self.beta1.depth != self.beta2.depth:
            raise ValueError("decision rules of a profile must share a depth")
        if self.beta1.player != 1 or self.beta2.player != 2:
            raise ValueError("profile expects (player-1 rule, player-2 rule)")

    @property
    def depth(self) -> int:
        return self.beta1.depth


@dataclass(frozen=True, eq=False)
class BehavioralStrategy:
    player: int
    rules: Mapping[int, DecisionRule] = field(default_factory=dict)

    def __post_init__(self):
        depths = sorted(self.rules)
        if depths and depths != list(range(depths[0], depths[-1] + 1)):
            raise ValueError("behavioral strategy rules must cover consecutive depths")
        for t, rule in self.rules.items():
            if rule.depth != t or rule.player != self.player:
                raise ValueError("rule depth/player inconsistent with its slot")

    def rule(self, depth: int) -> DecisionRule:
        try:
            return self.rules[depth]
        except KeyError:
            raise CoverageError(f"player {self.player} strategy has no rule at depth {depth}") from None

    def act(self, depth: int, h: int) -> np.ndarray:
        try:
            return self.rule(depth).table[h]
        except KeyError:
            raise CoverageError(f"player {self.player} strategy has no rule for history "
                                f"{HISTORIES.render(h)} at depth {depth}") from None

    def replace(self, rule: DecisionRule) -> "BehavioralStrategy":
        rules = dict(self.rules)
        rules[rule.depth] = rule
        return BehavioralStrategy(self.player, rules)

    def to_json(self) -> dict:
        return {
            "player": self.player,
            "rules": {str(t): {HISTORIES.render(h): [float(p) for p in row]
                               for h, row in sorted(r.table.items())}
                      for t, r in sorted(self.rules.items())},
        }

    @classmethod
    def from_json(cls, data: dict) -> "BehavioralStrategy":
        player = int(data["player"])
        rules = {}
        for t, table in data["rules"].items():
            rows = {HISTORIES.parse(h): row for h, row in table.items()}
            rules[int(t)] = DecisionRule.from_rows(player, int(t), rows)
        return cls(player, rules)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "BehavioralStrategy":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True, eq=False)
class PureStrategy:
    player: int
    table: Mapping[int, int]

    def __repr__(self):
        items = ", ".join(f"{HISTORIES.render(h)}:{a}" for h, a in sorted(self.table.items()))
        return f"PureStrategy(player={self.player}, {{{items}}})"


def uniform_rule(m: PosgModel, o: OccupancyState, player: int) -> DecisionRule:
    n = m.n_actions(player)
    rows = {h: np.full(n, 1.0 / n) for h in marginal_private_histories(o, player)}
    return DecisionRule.from_rows(player, o.depth, rows)


def uniform_strategy(m: PosgModel, o: OccupancyState, player: int, horizon: int) -> BehavioralStrategy:
    """Uniform play on every self-reachable history from the support of ``o``."""
    n, nz = m.n_actions(player), m.n_observations(player)
    rules = {}
    frontier = list(marginal_private_histories(o, player))
    for t in range(o.depth, horizon):
        rules[t] = DecisionRule.from_rows(player, t, {h: np.full(n, 1.0 / n) for h in frontier})
        frontier = [HISTORIES.extend(h, a, z) for h in frontier for a in range(n) for z in range(nz)]
    return BehavioralStrategy(player, rules)


def _horizon(m: PosgModel, horizon: int | None) -> int:
    if horizon is not None:
        return horizon
    if m.horizon is None:
        raise ValueError("an explicit horizon is required for infinite-horizon models")
    return m.horizon


def evaluate_profile(m: PosgModel, o: OccupancyState, s1: BehavioralStrategy,
                     s2: BehavioralStrategy, horizon: int | None = None) -> float:
    """Exact value of (s1, s2) from ``o`` via V(o) = r(o, b) + gamma V(T(o, b))."""
    H = _horizon(m, horizon)
    value, discount = 0.0, 1.0
    for t in range(o.depth, H):
        try:
            d = DecisionRuleProfile(s1.rule(t), s2.rule(t))
            value += discount * expected_reward(m, o, d)
            if t + 1 < H:
                o = transition(m, o, d)
        except KeyError as exc:
            if isinstance(exc, CoverageError):
                raise
            raise CoverageError(str(exc.args[0])) from None
        discount *= m.gamma
    return value


def count_pure(m: PosgModel, player: int, roots: int, depth: int, horizon: int) -> int:
    n, nz = m.n_actions(player), m.n_observations(player)
    per_root = 1
    for _ in range(horizon - depth):
        per_root = n * per_root ** nz
        if per_root > MAX_PURE_STRATEGIES:
            return MAX_PURE_STRATEGIES + 1
    total = per_root ** roots
    return total if total <= MAX_PURE_STRATEGIES else MAX_PURE_STRATEGIES + 1


def _subtree_plans(n: int, nz: int, h: int, steps: int):
    """All reduced plans below history ``h`` as tuples of (history, action)."""
    if steps == 0:
        return [()]
    plans = []
    for a in range(n):
        children = [_subtree_plans(n, nz, HISTORIES.extend(h, a, z), steps - 1) for z in range(nz)]
        for combo in itertools.product(*children):
            plans.append(((h, a),) + tuple(itertools.chain.from_iterable(combo)))
    return plans


def enumerate_pure(m: PosgModel, player: int, horizon: int | None = None,
                   o: OccupancyState | None = None) -> list[PureStrategy]:
    """Every reduced pure strategy of ``player`` for the subgame rooted at ``o``.

    Without ``o`` the root is the empty history at depth 0.
    """
    H = _horizon(m, horizon)
    depth = 0 if o is None else o.depth
    roots = [0] if o is None else list(marginal_private_histories(o, player))
    count = count_pure(m, player, len(roots), depth, H)
    if count > MAX_PURE_STRATEGIES:
        raise ExplosionError(f"player {player} has more than {MAX_PURE_STRATEGIES} pure strategies "
                             f"over depths {depth}..{H - 1}")
    n, nz = m.n_actions(player), m.n_observations(player)
    per_root = [_subtree_plans(n, nz, h, H - depth) for h in roots]
    return [PureStrategy(player, dict(itertools.chain.from_iterable(combo)))
            for combo in itertools.product(*per_root)]


def pure_to_behavioral(p: PureStrategy, n_actions: int) -> BehavioralStrategy:
    by_depth: dict[int, dict[int, np.ndarray]] = {}
    for h, a in p.table.items():
        row = np.zeros(n_actions)
        row[a] = 1.0
        by_depth.setdefault(HISTORIES.depth(h), {})[h] = row
    rules = {t: DecisionRule.from_rows(p.player, t, rows) for t, rows in by_depth.items()}
    return BehavioralStrategy(p.player, rules)


def mixed_to_behavioral(pures: Sequence[PureStrategy], weights: Sequence[float],
                        n_actions: int) -> BehavioralStrategy:
    """Behavioral strategy generated by a mixture of pure strategies.

    Rows are conditional action frequencies among pure strategies that reach
    the history; histories reached by no weighted strategy get uniform rows.
    """
    if not pures:
        raise ValueError("empty mixture")
    player = pures[0].player
    reach: dict[int, np.ndarray] = {}
    for p, w in zip(pures, weights):
        for h, a in p.table.items():
            row = reach.setdefault(h, np.zeros(n_actions))
            row[a] += w
    by_depth: dict[int, dict[int, np.ndarray]] = {}
    for h, row in reach.items():
        total = row.sum()
        dist = row / total if total > 0 else np.full(n_actions, 1.0 / n_actions)
        by_depth.setdefault(HISTORIES.depth(h), {})[h] = dist
    rules = {t: DecisionRule.from_rows(player, t, rows) for t, rows in by_depth.items()}
    return BehavioralStrategy(player, rules)


def mix_rules(a: DecisionRule, b: DecisionRule, alpha: float) -> DecisionRule:
    if a.player != b.player or a.depth != b.depth or a.table.keys() != b.table.keys():
        raise ValueError("rules must share player, depth and domain")
    return DecisionRule.from_rows(a.player, a.depth,
                                  {h: alpha * a.table[h] + (1 - alpha) * b.table[h] for h in a.table})
