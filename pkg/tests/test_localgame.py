import csv
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from zsomg.hsvi import SolverConfig, _Solver
from zsomg.localgame import (LocalGame, grid_solve, nested_doo, solve_maximin, solve_minimax,
                             solve_terminal_lp, write_trace)
from zsomg.model import builtin
from zsomg.occupancy import OccupancyState, initial_occupancy, transition
from zsomg.oracle import MatrixGame, solve_matrix_game
from zsomg.strategy import DecisionRule, DecisionRuleProfile

from conftest import matrix_model, random_model, random_occupancy, random_rule


def trained(name, trials=3, eps=0.05):
    """A solver whose bounds carry cones after a few trials."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        s = _Solver(builtin(name), SolverConfig(epsilon=eps, local_budget=2000))
        for t in range(trials):
            s.explore(s.o0, 0, t)
    return s


@pytest.fixture(scope="module")
def mp2():
    return trained("matching-pennies-2step")


@pytest.fixture(scope="module")
def tiger():
    return trained("adversarial-tiger", trials=2, eps=0.1)


def test_matching_pennies_terminal():
    m = builtin("matching-pennies")
    g = LocalGame(m, initial_occupancy(m))
    lo = solve_maximin(g, 0.01)
    hi = solve_minimax(g, 0.01)
    assert lo.solver_tag == "terminal-lp"
    for sol in (lo, hi):
        assert sol.value_lo == pytest.approx(0.0, abs=1e-9)
        assert sol.value_hi == pytest.approx(0.0, abs=1e-9)
    np.testing.assert_allclose(lo.beta1.table[0], [0.5, 0.5], atol=1e-9)
    np.testing.assert_allclose(hi.beta2.table[0], [0.5, 0.5], atol=1e-9)


def test_two_by_two_closed_form():
    m = matrix_model([[2, 0], [0, 1]])
    o = initial_occupancy(m)
    sol = solve_terminal_lp(o, m)
    assert sol.value_lo == pytest.approx(2 / 3, abs=1e-9)
    assert sol.gap <= 1e-9
    np.testing.assert_allclose(sol.beta1.table[0], [1 / 3, 2 / 3], atol=1e-9)
    # the column player's equilibrium mix equalises the rows: 2 y = 1 - y
    np.testing.assert_allclose(sol.beta2.table[0], [1 / 3, 2 / 3], atol=1e-9)


def test_terminal_lp_rejects_cone_games(mp2):
    with pytest.raises(ValueError):
        solve_terminal_lp(mp2.o0, mp2.m, mp2.U)
    with pytest.raises(ValueError):
        solve_maximin(LocalGame(mp2.m, mp2.o0, mp2.U), 0.01, method="lp")


def test_bad_arguments():
    m = builtin("matching-pennies")
    g = LocalGame(m, initial_occupancy(m))
    for fn in (solve_maximin, solve_minimax, nested_doo):
        with pytest.raises(ValueError):
            fn(g, 0.0)
    with pytest.raises(ValueError):
        solve_maximin(g, 0.1, method="simplex")
    with pytest.raises(ValueError):
        grid_solve(g, 0)


@pytest.mark.parametrize("k,value", [(1, -1.0), (2, 0.0)])
def test_grid_examples(k, value):
    m = builtin("matching-pennies")
    sol = grid_solve(LocalGame(m, initial_occupancy(m)), k)
    assert sol.solver_tag == "grid"
    assert sol.value_lo == pytest.approx(value)
    assert sol.value_hi >= 0.0 - 1e-12


def test_grid_explosion_guard():
    m = builtin("adversarial-tiger")
    o = random_occupancy(np.random.default_rng(0), m, 2)
    with pytest.raises(ValueError):
        grid_solve(LocalGame(m, o), 200)


def test_grid_brackets_doo_midpoint(mp2):
    g = LocalGame(mp2.m, mp2.o0, mp2.U)
    grid = grid_solve(g, 8)
    doo = solve_maximin(g, 0.01)
    mid = 0.5 * (doo.value_lo + doo.value_hi)
    assert grid.value_lo - 1e-9 <= mid <= grid.value_hi + 1e-9


def test_payoff_matches_compiled_form(mp2, tiger):
    rng = np.random.default_rng(5)
    for s in (mp2, tiger):
        for bound in (s.U, s.L):
            g = LocalGame(s.m, s.o0, bound)
            assert not g.bilinear
            for _ in range(20):
                b1, b2 = random_rule(rng, s.m, s.o0, 1), random_rule(rng, s.m, s.o0, 2)
                assert g.q_value(g.vector(b1), g.vector(b2)) == pytest.approx(g.payoff(b1, b2), abs=1e-9)


def test_payoff_within_bound_range(tiger):
    rng = np.random.default_rng(8)
    g = LocalGame(tiger.m, tiger.o0, tiger.U)
    hi = tiger.U.init[0].max()
    lo = tiger.L.init[0].min()
    for _ in range(30):
        v = g.payoff(random_rule(rng, tiger.m, tiger.o0, 1), random_rule(rng, tiger.m, tiger.o0, 2))
        assert lo - 1e-9 <= v <= hi + 1e-9


def test_payoff_lipschitz(mp2, tiger):
    rng = np.random.default_rng(6)
    for s in (mp2, tiger):
        o = s.o0
        for bound in (s.U, s.L):
            g = LocalGame(s.m, o, bound)
            assert g.lipschitz_q >= 0
            for _ in range(40):
                a1, b1 = random_rule(rng, s.m, o, 1), random_rule(rng, s.m, o, 1)
                a2, b2 = random_rule(rng, s.m, o, 2), random_rule(rng, s.m, o, 2)
                d = (g.metric(1, g.vector(a1), g.vector(b1)) + g.metric(2, g.vector(a2), g.vector(b2)))
                assert abs(g.payoff(a1, a2) - g.payoff(b1, b2)) <= g.lipschitz_q * d + 1e-9


def test_metric_ignores_unweighted_histories():
    m = builtin("adversarial-tiger")
    rng = np.random.default_rng(0)
    o = random_occupancy(rng, m, 1)
    g = LocalGame(m, o)
    x = g.vector(random_rule(rng, m, o, 1))
    assert g.metric(1, x, x) == 0.0
    y = np.roll(x.reshape(-1, m.n_actions(1)), 1, axis=1).reshape(-1)
    w = g.layout.m1
    assert g.metric(1, x, y) == pytest.approx(float(w @ np.abs(x - y).reshape(len(w), -1).sum(axis=1)))


def test_doo_agrees_with_lp_on_bilinear():
    m = builtin("matching-pennies")
    g = LocalGame(m, initial_occupancy(m))
    tol = 0.02
    doo = solve_maximin(g, tol, method="doo")
    assert doo.solver_tag == "nested-doo"
    assert doo.gap <= tol
    assert doo.value_lo - 1e-9 <= 0.0 <= doo.value_hi + 1e-9
    dmin = solve_minimax(g, tol, method="doo")
    assert dmin.value_lo - 1e-9 <= 0.0 <= dmin.value_hi + 1e-9


def test_doo_random_matrices():
    rng = np.random.default_rng(3)
    for _ in range(6):
        M = rng.uniform(-1, 1, (2, 3))
        m = matrix_model(M)
        g = LocalGame(m, initial_occupancy(m))
        v = solve_matrix_game(MatrixGame(M)).value
        for fn in (solve_maximin, solve_minimax):
            s = fn(g, 0.02, method="doo")
            assert s.value_lo - 1e-9 <= v <= s.value_hi + 1e-9


def test_constant_payoff_single_node():
    m = matrix_model(np.full((3, 2), 0.4))
    g = LocalGame(m, initial_occupancy(m))
    s = nested_doo(g, 0.01)
    assert s.nodes == 1
    assert s.value_lo == pytest.approx(0.4) and s.value_hi == pytest.approx(0.4)


@pytest.mark.parametrize("side", ["U", "L"])
def test_near_duality_with_cones(mp2, tiger, side):
    tol = 0.05
    for s in (mp2, tiger):
        g = LocalGame(s.m, s.o0, getattr(s, side))
        a = solve_maximin(g, tol)
        b = solve_minimax(g, tol)
        assert a.gap <= tol + 1e-12 and b.gap <= tol + 1e-12
        # weak duality always holds; the brackets never cross the wrong way
        assert b.value_hi >= a.value_lo - 1e-9


def test_fresh_bound_depth0_bracket():
    m = builtin("matching-pennies-2step")
    s = _Solver(m, SolverConfig(epsilon=0.05))
    g = LocalGame(m, s.o0, s.U)
    assert g.bilinear
    sol = solve_maximin(g, 0.05, method="doo")
    assert sol.gap <= 0.05
    lp = solve_maximin(g, 0.05)
    assert sol.value_lo - 1e-9 <= lp.value_lo <= sol.value_hi + 1e-9


def test_guarantee_realization(mp2, tiger):
    tol = 0.02
    for s in (mp2, tiger):
        g = LocalGame(s.m, s.o0, s.U)
        sol = solve_maximin(g, tol)
        F = g.cvx()
        v, _ = F.best_response_y(g.vector(sol.beta1))
        assert v >= sol.value_lo - tol / 2
        # lower side: player 2's rule from the minimax concedes at most value_hi
        gl = LocalGame(s.m, s.o0, s.L)
        solm = solve_minimax(gl, tol)
        # on this side F(x, y) = -Q(y, x), so the exact inner minimum is player 1's best reply
        v, _ = gl.cvx().best_response_y(gl.vector(solm.beta2))
        assert -v <= solm.value_hi + tol / 2


def test_identical_history_blocks_share_strategy():
    """Two player-1 histories with the same payoff matrix get the 1-history strategy."""
    M = np.array([[2.0, 0.0], [0.0, 1.0]])
    m = matrix_model(M)
    o1 = initial_occupancy(m)
    single = solve_terminal_lp(o1, m)
    from zsomg.occupancy import HISTORIES
    h_a, h_b = HISTORIES.extend(0, 0, 0), HISTORIES.extend(0, 1, 0)
    # player 2 also tells the branches apart, so the stage game splits into two copies of M
    g_a, g_b = HISTORIES.extend(0, 0, 0), HISTORIES.extend(0, 1, 0)
    o = OccupancyState(1, {(0, h_a, g_a): 0.5, (0, h_b, g_b): 0.5})
    double = solve_terminal_lp(o, m.with_horizon(2))
    assert double.value_lo == pytest.approx(single.value_lo, abs=1e-9)
    for h in (h_a, h_b):
        np.testing.assert_allclose(double.beta1.table[h], single.beta1.table[0], atol=1e-9)


def test_terminal_lp_against_oracle_on_random_models():
    rng = np.random.default_rng(12)
    for _ in range(10):
        m = random_model(rng, horizon=1)
        o = initial_occupancy(m)
        lp = solve_terminal_lp(o, m)
        # occupancy at depth 0 has one history per player, so the stage game is the expected matrix
        M = np.einsum("s,sab->ab", m.b0, m.reward)
        assert lp.value_lo == pytest.approx(solve_matrix_game(MatrixGame(M)).value, abs=1e-6)


def test_trace_csv(tmp_path, mp2):
    g = LocalGame(mp2.m, mp2.o0, mp2.U)
    rows = []
    solve_maximin(g, 0.02, trace=rows)
    assert rows and all(r[4] >= r[3] - 1e-12 for r in rows)
    write_trace(rows, tmp_path / "t.csv")
    with open(tmp_path / "t.csv") as fh:
        got = list(csv.reader(fh))
    assert got[0] == ["node_id", "depth", "radius", "lo", "hi"]
    assert len(got) == len(rows) + 1


def test_budget_exhaustion_is_reported(tiger):
    g = LocalGame(tiger.m, tiger.o0, tiger.U)
    s = solve_maximin(g, 1e-6, budget=3)
    assert s.budget_exceeded
    assert s.value_lo <= s.value_hi


@given(st.integers(0, 10_000))
def test_rules_round_trip(seed):
    rng = np.random.default_rng(seed)
    m = builtin("adversarial-tiger")
    o = random_occupancy(rng, m, 1)
    g = LocalGame(m, o)
    r = random_rule(rng, m, o, 2)
    back = g.rule(2, g.vector(r))
    for h, row in r.table.items():
        np.testing.assert_allclose(back.table[h], row)
