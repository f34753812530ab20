"""Heuristic search value iteration over occupancy states.

Trials descend from the initial occupancy state while the gap between the
bounds exceeds a depth-dependent threshold, updating both bounds on the way
down and again on the way back up.
"""

from __future__ import annotations

import csv
import json
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bounds import (LipschitzSchedule, ValueBound, init_lower, init_upper,
                     refresh_refined_constants, sup_gap)
from .localgame import DEFAULT_BUDGET, LocalGame, solve_maximin, solve_minimax
from .model import PosgModel, reward_bounds
from .occupancy import (HISTORIES, OccupancyState, initial_occupancy, l1_distance,
                        marginal_private_histories, transition)
from .strategy import BehavioralStrategy, DecisionRule, DecisionRuleProfile

MAX_FILL_HISTORIES = 100_000


class ConfigError(ValueError):
    """Solver settings violate a precondition (for instance rho too large)."""


class BudgetWarning(RuntimeWarning):
    pass


@dataclass
class SolverConfig:
    epsilon: float = 0.01
    rho: float | None = None
    rho_fraction: float = 0.5
    local_tol: float | None = None
    max_trials: int = 10_000
    lipschitz: str = "static"
    seed: int = 0
    local_budget: int = DEFAULT_BUDGET
    ball_samples: int = 0          # random points checked around each update
    record_states: bool = False    # keep every updated occupancy state
    time_limit: float | None = None  # seconds; checked between trials

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if self.local_tol is None:
            self.local_tol = self.epsilon / 10.0
        if not self.local_tol > 0:
            raise ConfigError("local_tol must be positive")
        if self.lipschitz not in ("static", "refined"):
            raise ConfigError("lipschitz mode must be 'static' or 'refined'")
        if self.max_trials < 0:
            raise ConfigError("max_trials must be non-negative")
        if not 0 < self.rho_fraction < 1:
            raise ConfigError("rho_fraction must lie in (0, 1)")
        if self.time_limit is not None and not self.time_limit > 0:
            raise ConfigError("time_limit must be positive")


@dataclass
class TraceRecord:
    trial: int
    depth: int
    width: float
    threshold: float
    u_value: float
    l_value: float
    support: int


@dataclass
class ContractionRecord:
    """Width at a node after its backward update, against gamma * thr(depth + 1).

    ``deepest`` marks the last updated node of a trial, whose successor was
    left untouched; only there is the contraction guaranteed, because shallower
    nodes may switch rules once deeper bounds have moved.
    """
    trial: int
    depth: int
    width: float
    limit: float
    deepest: bool = True

    @property
    def violated(self) -> bool:
        return self.width > self.limit + 1e-9


@dataclass
class SolveResult:
    model: PosgModel
    config: SolverConfig
    lower: float
    upper: float
    trials_run: int
    max_trial_length: int
    converged: bool
    rho: float
    t_max: int
    depth_cap: int
    upper_bound: ValueBound
    lower_bound: ValueBound
    schedule: LipschitzSchedule
    trace: list[TraceRecord] = field(default_factory=list)
    trial_lengths: list[int] = field(default_factory=list)
    contraction: list[ContractionRecord] = field(default_factory=list)
    lambda_history: list[np.ndarray] = field(default_factory=list)
    width_history: list[float] = field(default_factory=list)
    ball_violations: int = 0
    budget_warnings: int = 0
    visited: list[OccupancyState] = field(default_factory=list)
    wallclock_ms: float = 0.0

    @property
    def gap(self) -> float:
        return self.upper - self.lower

    @property
    def contraction_violations(self) -> int:
        return sum(r.violated for r in self.contraction if r.deepest)

    def summary(self) -> dict:
        return {"lower": self.lower, "upper": self.upper, "gap": self.gap,
                "trials": self.trials_run, "max_trial_len": self.max_trial_length,
                "wallclock_ms": round(self.wallclock_ms, 3)}

    def write_trace(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["trial", "depth", "width", "threshold", "u_value", "l_value",
                        "occupancy_support"])
            for r in self.trace:
                w.writerow([r.trial, r.depth, f"{r.width:.12g}", f"{r.threshold:.12g}",
                            f"{r.u_value:.12g}", f"{r.l_value:.12g}", r.support])

    def write_summary(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=1, sort_keys=True)
            fh.write("\n")


# ---------------------------------------------------------------------------
# threshold arithmetic

def _lam(lam, tau: int) -> float:
    if np.isscalar(lam):
        return float(lam)
    return float(lam[min(tau, len(lam) - 1)])


def threshold(epsilon: float, gamma: float, rho: float, lam, tau: int) -> float:
    """thr(0) = epsilon, thr(t) = (thr(t-1) - 2 rho lam_{t-1}) / gamma.

    ``lam`` is one constant or a per-depth sequence; for a constant this is
    gamma^-t epsilon - 2 rho lam (gamma^-t - 1) / (1 - gamma).
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    thr = epsilon
    for t in range(tau):
        thr = (thr - 2.0 * rho * _lam(lam, t)) / gamma
    return thr


def max_rho(epsilon: float, gamma: float, lam: float) -> float:
    if lam <= 0:
        return math.inf
    return (1.0 - gamma) * epsilon / (2.0 * lam)


def t_max(epsilon: float, gamma: float, rho: float, lam: float, W: float) -> int:
    """Longest possible trial: ceil(log_gamma((eps - c) / (W - c))), c = 2 rho lam / (1 - gamma)."""
    if W <= epsilon:
        return 0
    c = 2.0 * rho * lam / (1.0 - gamma)
    if c >= epsilon:
        raise ConfigError("rho is not below its maximum; trials are unbounded")
    if gamma == 0.0:
        return 1
    return max(0, math.ceil(math.log((epsilon - c) / (W - c)) / math.log(gamma) - 1e-12))


# ---------------------------------------------------------------------------
# solver

class _Solver:
    def __init__(self, m: PosgModel, cfg: SolverConfig):
        if not 0.0 <= m.gamma < 1.0:
            raise ConfigError("discount factor must lie in [0, 1)")
        self.m, self.cfg = m, cfg
        rb = reward_bounds(m)
        if m.horizon is None:
            lam0 = rb.lambda_r / (1.0 - m.gamma)
            W = sup_gap(init_upper(m, 0), init_lower(m, 0))
        else:
            self.U, self.L = init_upper(m), init_lower(m)
            W = sup_gap(self.U, self.L)
            lam0 = LipschitzSchedule.for_model(m, m.horizon).max_lambda
        limit = max_rho(cfg.epsilon, m.gamma, lam0)
        rho = cfg.rho if cfg.rho is not None else cfg.rho_fraction * (0.0 if math.isinf(limit) else limit)
        if rho < 0 or (not math.isinf(limit) and rho >= limit):
            raise ConfigError(f"rho={rho:g} must lie in [0, {limit:g})")
        self.rho, self.W, self.lam0 = rho, W, lam0
        self.tmax = t_max(cfg.epsilon, m.gamma, rho, lam0, W)
        if m.horizon is None:
            h = max(self.tmax, 1)
            self.U, self.L = init_upper(m, h), init_lower(m, h)
            self.cap = self.tmax
            self.schedule = LipschitzSchedule(np.full(h + 1, lam0), rb.lambda_r, cfg.lipschitz)
        else:
            self.cap = min(m.horizon, self.tmax)
            self.schedule = LipschitzSchedule.for_model(m, m.horizon, cfg.lipschitz)
        self.rng = np.random.default_rng(cfg.seed)
        self.o0 = initial_occupancy(m)
        self.thr = [threshold(cfg.epsilon, m.gamma, rho, self.schedule.lambdas, t)
                    for t in range(self.cap + 1)]
        self.trace: list[TraceRecord] = []
        self.contraction: list[ContractionRecord] = []
        self.visited: list[OccupancyState] = []
        self.ball_violations = 0
        self.budget_warnings = 0

    def width(self, o: OccupancyState) -> float:
        return self.U.evaluate(o) - self.L.evaluate(o)

    def update(self, o: OccupancyState):
        cfg, tau = self.cfg, o.depth
        gu = LocalGame(self.m, o, self.U)
        su = solve_maximin(gu, cfg.local_tol, cfg.local_budget)
        gl = LocalGame(self.m, o, self.L)
        sl = solve_minimax(gl, cfg.local_tol, cfg.local_budget)
        for s in (su, sl):
            if s.budget_exceeded:
                self.budget_warnings += 1
                warnings.warn(f"local solver budget exhausted at depth {tau} "
                              f"(bracket {s.value_lo:.6g}..{s.value_hi:.6g})", BudgetWarning)
        lam = self.schedule[tau]
        # value_hi bounds the upper game's maximin from above, value_lo the lower game's from below
        self.U.add_cone(o, su.value_hi, lam)
        self.L.add_cone(o, sl.value_lo, lam)
        if cfg.record_states:
            self.visited.append(o)
        return su, sl

    def check_ball(self, o: OccupancyState, limit: float):
        """Sample points within rho of o and count widths above ``limit``."""
        keys = [k for k, _ in o]
        probs = np.array([p for _, p in o])
        for _ in range(self.cfg.ball_samples):
            q = probs * np.exp(self.rng.normal(scale=1.0, size=len(probs)))
            q /= q.sum()
            d = np.abs(q - probs).sum()
            if d > self.rho:
                q = probs + (q - probs) * (self.rho / d)
            other = OccupancyState(o.depth, dict(zip(keys, q)), normalize=True)
            if l1_distance(o, other) <= self.rho + 1e-12 and self.width(other) > limit + 1e-9:
                self.ball_violations += 1

    def explore(self, o: OccupancyState, tau: int, trial: int) -> int:
        """One trial from ``o``; returns the number of depths updated."""
        length = 0
        path = []
        while tau < self.cap:
            u, l = self.U.evaluate(o), self.L.evaluate(o)
            self.trace.append(TraceRecord(trial, tau, u - l, self.thr[tau], u, l, len(o)))
            if u - l <= self.thr[tau]:
                break
            su, sl = self.update(o)
            path.append(o)
            length += 1
            o = transition(self.m, o, DecisionRuleProfile(su.beta1, sl.beta2))
            tau += 1
        for k, o in enumerate(reversed(path)):
            t = o.depth
            self.update(o)
            w = self.width(o)
            # gamma * thr(t + 1) == thr(t) - 2 rho lam_t
            limit = self.m.gamma * self.thr[t + 1] + 2.0 * self.cfg.local_tol
            self.contraction.append(ContractionRecord(trial, t, w, limit, deepest=k == 0))
            if self.cfg.ball_samples and k == 0:
                self.check_ball(o, self.thr[t] + 2.0 * self.cfg.local_tol)
        return length

    def run(self) -> SolveResult:
        cfg = self.cfg
        start = time.perf_counter()
        trials, lengths, widths, lambdas = 0, [], [], [self.schedule.lambdas.copy()]
        w = self.width(self.o0)
        widths.append(w)
        while w > cfg.epsilon and trials < cfg.max_trials:
            if cfg.time_limit is not None and time.perf_counter() - start > cfg.time_limit:
                break
            lengths.append(self.explore(self.o0, 0, trials))
            trials += 1
            if cfg.lipschitz == "refined":
                self.schedule = refresh_refined_constants(self.U, self.L, self.schedule)
                self.thr = [threshold(cfg.epsilon, self.m.gamma, self.rho, self.schedule.lambdas, t)
                            for t in range(self.cap + 1)]
                lambdas.append(self.schedule.lambdas.copy())
            w = self.width(self.o0)
            widths.append(w)
        upper, lower = self.U.evaluate(self.o0), self.L.evaluate(self.o0)
        return SolveResult(
            self.m, cfg, lower, upper, trials, max(lengths, default=0), upper - lower <= cfg.epsilon,
            self.rho, self.tmax, self.cap, self.U, self.L, self.schedule, self.trace, lengths,
            self.contraction, lambdas, widths, self.ball_violations, self.budget_warnings,
            self.visited, (time.perf_counter() - start) * 1000.0)


def solve(m: PosgModel, cfg: SolverConfig | None = None) -> SolveResult:
    return _Solver(m, cfg or SolverConfig()).run()


def update_at(m: PosgModel, o: OccupancyState, U: ValueBound, L: ValueBound,
              schedule: LipschitzSchedule, local_tol: float,
              budget: int = DEFAULT_BUDGET) -> tuple[float, float, float]:
    """Point-based update of both bounds at ``o``; returns (U(o), L(o), width)."""
    su = solve_maximin(LocalGame(m, o, U), local_tol, budget)
    sl = solve_minimax(LocalGame(m, o, L), local_tol, budget)
    U.add_cone(o, su.value_hi, schedule[o.depth])
    L.add_cone(o, sl.value_lo, schedule[o.depth])
    u, l = U.evaluate(o), L.evaluate(o)
    return u, l, u - l


# ---------------------------------------------------------------------------
# strategy extraction

def _all_histories(m: PosgModel, player: int, depth: int) -> list[int] | None:
    n, nz = m.n_actions(player), m.n_observations(player)
    if (n * nz) ** depth > MAX_FILL_HISTORIES:
        return None
    frontier = [0]
    for _ in range(depth):
        frontier = [HISTORIES.extend(h, a, z) for h in frontier for a in range(n) for z in range(nz)]
    return frontier


def _filled(m: PosgModel, rule: DecisionRule, depth: int) -> DecisionRule:
    hs = _all_histories(m, rule.player, depth)
    if hs is None:
        return rule
    n = m.n_actions(rule.player)
    rows = {h: np.full(n, 1.0 / n) for h in hs}
    rows.update(rule.table)
    return DecisionRule.from_rows(rule.player, depth, rows)


def extract_strategies(result: SolveResult, tol: float | None = None,
                       budget: int = DEFAULT_BUDGET) -> tuple[BehavioralStrategy, BehavioralStrategy]:
    """Pessimistic play: player 1 follows the lower bound, player 2 the upper bound.

    Histories off the forward path get uniform rows.
    """
    m = result.model
    tol = result.config.local_tol if tol is None else tol
    H = m.horizon if m.horizon is not None else result.depth_cap
    U, L = result.upper_bound, result.lower_bound
    o = initial_occupancy(m)
    rules1, rules2 = {}, {}
    for t in range(H):
        if t <= U.h_max - 1:
            s1 = solve_maximin(LocalGame(m, o, L), tol, budget)
            s2 = solve_minimax(LocalGame(m, o, U), tol, budget)
            b1, b2 = s1.beta1, s2.beta2
        else:
            s = solve_maximin(LocalGame(m, o, None), tol, budget)
            b1, b2 = s.beta1, s.beta2
        rules1[t] = _filled(m, b1, t)
        rules2[t] = _filled(m, b2, t)
        if t + 1 < H:
            o = transition(m, o, DecisionRuleProfile(b1, b2))
    return BehavioralStrategy(1, rules1), BehavioralStrategy(2, rules2)
