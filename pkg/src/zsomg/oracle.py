"""Ground truth by brute force: normal-form enumeration plus a small simplex.

Nothing here touches scipy or the local-game machinery, so the values it
produces can be used to check the solver.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import PosgModel, to_dict
from .occupancy import OccupancyState, initial_occupancy
from .strategy import (BehavioralStrategy, ExplosionError, PureStrategy, enumerate_pure,
                       evaluate_profile, pure_to_behavioral, _horizon)

PIVOT_TOL = 1e-12
MAX_CELLS = 2_000_000


@dataclass
class MatrixGame:
    """Payoffs to the row player; rows are player-1 pure strategies."""
    payoff: np.ndarray
    rows: list | None = None
    cols: list | None = None

    def __post_init__(self):
        self.payoff = np.atleast_2d(np.asarray(self.payoff, dtype=float))
        if self.payoff.size == 0:
            raise ValueError("empty matrix game")
        if not np.all(np.isfinite(self.payoff)):
            raise ValueError("matrix game has non-finite entries")

    @property
    def shape(self) -> tuple[int, int]:
        return self.payoff.shape


@dataclass
class OracleSolution:
    value: float
    row_mix: np.ndarray
    col_mix: np.ndarray
    row_value: float   # guaranteed by row_mix
    col_value: float   # guaranteed by col_mix

    @property
    def duality_gap(self) -> float:
        return abs(self.row_value - self.col_value)


# ---------------------------------------------------------------------------
# simplex

def _simplex_max(A: np.ndarray, max_iter: int = 100_000) -> np.ndarray:
    """Maximise 1'y subject to A y <= 1, y >= 0, for A with positive entries.

    Tableau simplex started from the slack basis; Bland's rule picks both
    the entering and the leaving variable, which rules out cycling.
    """
    m, n = A.shape
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = 1.0
    T[m, :n] = -1.0
    basis = list(range(n, n + m))
    for _ in range(max_iter):
        entering = next((j for j in range(n + m) if T[m, j] < -PIVOT_TOL), None)
        if entering is None:
            break
        col = T[:m, entering]
        ratios = [(T[i, -1] / col[i], basis[i], i) for i in range(m) if col[i] > PIVOT_TOL]
        if not ratios:
            raise RuntimeError("unbounded program; the payoff shift failed")
        best = min(r for r, _, _ in ratios)
        # Bland: among the tied minimum ratios, the lowest-index basic variable leaves
        _, leave = min((b, i) for r, b, i in ratios if r <= best + PIVOT_TOL * max(1.0, best))
        T[leave] /= T[leave, entering]
        for i in range(m + 1):
            if i != leave and T[i, entering] != 0.0:
                T[i] -= T[i, entering] * T[leave]
        basis[leave] = entering
    else:
        raise RuntimeError("simplex iteration limit reached")
    y = np.zeros(n + m)
    y[basis] = T[:m, -1]
    return np.clip(y[:n], 0.0, None)


def _column_lp(M: np.ndarray) -> tuple[np.ndarray, float]:
    """Minimising column mix and the value it guarantees for payoff matrix M."""
    shift = 1.0 - M.min()
    y = _simplex_max(M + shift)
    total = y.sum()
    mix = y / total
    return mix, float((M @ mix).max())


def solve_matrix_game(g: MatrixGame) -> OracleSolution:
    """Value and optimal mixes from one linear program per player."""
    M = g.payoff
    col_mix, col_value = _column_lp(M)
    # the row player's problem is the column problem of the negated transpose
    row_mix, _ = _column_lp(-M.T)
    row_value = float((row_mix @ M).min())
    value = 0.5 * (row_value + col_value)
    return OracleSolution(value, row_mix, col_mix, row_value, col_value)


# ---------------------------------------------------------------------------
# normal form of a subgame

def normal_form(m: PosgModel, o: OccupancyState | None = None, horizon: int | None = None) -> MatrixGame:
    H = _horizon(m, horizon)
    o = initial_occupancy(m) if o is None else o
    rows = enumerate_pure(m, 1, H, o if o.depth else None)
    cols = enumerate_pure(m, 2, H, o if o.depth else None)
    if len(rows) * len(cols) > MAX_CELLS:
        raise ExplosionError(f"normal form would have {len(rows)} x {len(cols)} entries")
    b1 = [pure_to_behavioral(p, m.n_actions(1)) for p in rows]
    b2 = [pure_to_behavioral(p, m.n_actions(2)) for p in cols]
    payoff = np.array([[evaluate_profile(m, o, s1, s2, H) for s2 in b2] for s1 in b1])
    return MatrixGame(payoff, rows, cols)


def oracle_solution(m: PosgModel, o: OccupancyState | None = None,
                    horizon: int | None = None) -> tuple[MatrixGame, OracleSolution]:
    g = normal_form(m, o, horizon)
    return g, solve_matrix_game(g)


def oracle_value(m: PosgModel, o: OccupancyState | None = None, horizon: int | None = None) -> float:
    return oracle_solution(m, o, horizon)[1].value


# ---------------------------------------------------------------------------
# best responses

def best_response_value(m: PosgModel, o: OccupancyState | None, opponent: BehavioralStrategy,
                        responder: int, horizon: int | None = None) -> tuple[float, PureStrategy]:
    """Best pure reply of ``responder`` (1 maximises, 2 minimises) to a fixed opponent."""
    if responder not in (1, 2) or opponent.player != 3 - responder:
        raise ValueError("responder must be 1 or 2 and the opponent the other player")
    H = _horizon(m, horizon)
    o = initial_occupancy(m) if o is None else o
    pures = enumerate_pure(m, responder, H, o if o.depth else None)
    best, arg = None, None
    for p in pures:
        mine = pure_to_behavioral(p, m.n_actions(responder))
        v = (evaluate_profile(m, o, mine, opponent, H) if responder == 1
             else evaluate_profile(m, o, opponent, mine, H))
        if best is None or (v > best if responder == 1 else v < best):
            best, arg = v, p
    return float(best), arg


def exploitability(m: PosgModel, s1: BehavioralStrategy, s2: BehavioralStrategy,
                   o: OccupancyState | None = None, horizon: int | None = None) -> float:
    """BR1(s2) - BR2(s1): zero exactly at an equilibrium."""
    up, _ = best_response_value(m, o, s2, 1, horizon)
    down, _ = best_response_value(m, o, s1, 2, horizon)
    return up - down


# ---------------------------------------------------------------------------
# golden files

def golden_dict(m: PosgModel, horizon: int, sol: OracleSolution) -> dict:
    return {"model": to_dict(m), "horizon": horizon, "value": sol.value,
            "row_mix": [float(v) for v in sol.row_mix], "col_mix": [float(v) for v in sol.col_mix]}


def write_golden(path, m: PosgModel, horizon: int, sol: OracleSolution) -> None:
    Path(path).write_text(json.dumps(golden_dict(m, horizon, sol), indent=1) + "\n")


def read_golden(path) -> dict:
    return json.loads(Path(path).read_text())
