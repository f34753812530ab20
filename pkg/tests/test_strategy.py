import numpy as np
import pytest
from hypothesis import given, strategies as st

from zsomg.model import builtin, static_horizon_bounds
from zsomg.occupancy import EMPTY, HISTORIES, initial_occupancy, mix, transition
from zsomg.strategy import (BehavioralStrategy, CoverageError, DecisionRule, DecisionRuleProfile,
                            ExplosionError, count_pure, enumerate_pure, evaluate_profile,
                            mix_rules, mixed_to_behavioral, pure_to_behavioral, uniform_rule,
                            uniform_strategy)

from conftest import BUILTIN_NAMES, matrix_model, random_model, random_occupancy, random_rule


def rollout(m, p1, p2, horizon):
    """Expected return of two pure strategies by explicit trajectory expansion."""
    total = 0.0
    frontier = [(s, EMPTY, EMPTY, float(b), 1.0) for s, b in enumerate(m.b0) if b > 0]
    for t in range(horizon):
        nxt = []
        for s, h1, h2, p, disc in frontier:
            a1, a2 = p1.table[h1], p2.table[h2]
            total += p * disc * m.reward[s, a1, a2]
            for s2 in range(m.n_states):
                for z1 in range(m.n_observations(1)):
                    for z2 in range(m.n_observations(2)):
                        q = m.transition[s, a1, a2, s2, z1, z2]
                        if q > 0:
                            nxt.append((s2, HISTORIES.extend(h1, a1, z1),
                                        HISTORIES.extend(h2, a2, z2), p * q, disc * m.gamma))
        frontier = nxt
    return total


def always(m, player, a, horizon):
    o = initial_occupancy(m)
    s = uniform_strategy(m, o, player, horizon)
    n = m.n_actions(player)
    rules = {t: DecisionRule.from_rows(player, t, {h: np.eye(n)[a] for h in r.table})
             for t, r in s.rules.items()}
    return BehavioralStrategy(player, rules)


def test_uniform_rule():
    m = builtin("matching-pennies")
    r = uniform_rule(m, initial_occupancy(m), 1)
    np.testing.assert_allclose(r[EMPTY], [0.5, 0.5])
    one = matrix_model([[1.0, 2.0]])
    np.testing.assert_allclose(uniform_rule(one, initial_occupancy(one), 1)[EMPTY], [1.0])
    m2 = builtin("matching-pennies-2step")
    o1 = transition(m2, initial_occupancy(m2),
                    DecisionRuleProfile(DecisionRule.from_rows(1, 0, {EMPTY: [1, 0]}),
                                        DecisionRule.from_rows(2, 0, {EMPTY: [1, 0]})))
    assert len(uniform_rule(m2, o1, 1).table) == 2


def test_rule_invariants():
    with pytest.raises(ValueError):
        DecisionRule(1, 0, {EMPTY: np.array([0.5, 0.6])})
    with pytest.raises(ValueError):
        DecisionRule(1, 0, {EMPTY: np.array([1.5, -0.5])})
    with pytest.raises(ValueError):
        DecisionRuleProfile(DecisionRule(1, 0, {}), DecisionRule(2, 1, {}))


def test_evaluate_examples():
    m = builtin("matching-pennies")
    o = initial_occupancy(m)
    u1, u2 = uniform_strategy(m, o, 1, 1), uniform_strategy(m, o, 2, 1)
    assert evaluate_profile(m, o, u1, u2) == 0.0
    assert evaluate_profile(m, o, always(m, 1, 0, 1), always(m, 2, 0, 1)) == 1.0
    m2 = builtin("matching-pennies-2step")
    o = initial_occupancy(m2)
    assert evaluate_profile(m2, o, uniform_strategy(m2, o, 1, 2),
                            uniform_strategy(m2, o, 2, 2)) == pytest.approx(0.0, abs=1e-15)


def test_coverage_gap():
    m = builtin("matching-pennies-2step")
    o = initial_occupancy(m)
    short = BehavioralStrategy(1, {0: uniform_rule(m, o, 1)})
    with pytest.raises(CoverageError):
        evaluate_profile(m, o, short, uniform_strategy(m, o, 2, 2))


@pytest.mark.parametrize("H,nz,count", [(1, 1, 2), (2, 1, 4), (2, 2, 8)])
def test_enumeration_counts(H, nz, count):
    m = random_model(np.random.default_rng(0), n_states=1, n_obs=(nz, nz), horizon=H)
    pures = enumerate_pure(m, 1)
    assert len(pures) == count == count_pure(m, 1, 1, 0, H)
    assert len({tuple(sorted(p.table.items())) for p in pures}) == count


def test_enumeration_guard():
    m = random_model(np.random.default_rng(0), n_actions=(3, 3), n_obs=(3, 3), horizon=5)
    with pytest.raises(ExplosionError):
        enumerate_pure(m, 1)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_pure_evaluation_matches_rollout(name):
    m = builtin(name).with_horizon(min(2, builtin(name).horizon))
    H = m.horizon
    o = initial_occupancy(m)
    rng = np.random.default_rng(1)
    P1, P2 = enumerate_pure(m, 1), enumerate_pure(m, 2)
    for _ in range(20):
        p1, p2 = P1[rng.integers(len(P1))], P2[rng.integers(len(P2))]
        v = evaluate_profile(m, o, pure_to_behavioral(p1, m.n_actions(1)),
                             pure_to_behavioral(p2, m.n_actions(2)))
        assert v == pytest.approx(rollout(m, p1, p2, H), abs=1e-12)


def test_always_heads_rows():
    m = builtin("matching-pennies")
    heads = [p for p in enumerate_pure(m, 1) if p.table[EMPTY] == 0][0]
    b = pure_to_behavioral(heads, 2)
    np.testing.assert_array_equal(b.rule(0)[EMPTY], [1.0, 0.0])


def test_mixture_of_two_pures_evaluates_to_mean():
    m = builtin("matching-pennies")
    o = initial_occupancy(m)
    heads, tails = enumerate_pure(m, 1)
    mixed = mixed_to_behavioral([heads, tails], [0.5, 0.5], 2)
    opp = always(m, 2, 0, 1)
    vals = [evaluate_profile(m, o, pure_to_behavioral(p, 2), opp) for p in (heads, tails)]
    assert evaluate_profile(m, o, mixed, opp) == pytest.approx(np.mean(vals))


@pytest.mark.parametrize("name", ["matching-pennies-2step", "adversarial-tiger"])
def test_kuhn_equivalence(name):
    """A random mixture over pure strategies and its behavioral form agree."""
    m = builtin(name).with_horizon(2)
    o = initial_occupancy(m)
    rng = np.random.default_rng(7)
    pures = enumerate_pure(m, 1)
    w = rng.dirichlet(np.ones(len(pures)))
    beh = mixed_to_behavioral(pures, w, m.n_actions(1))
    for _ in range(5):
        opp = BehavioralStrategy(2, {0: random_rule(rng, m, o, 2)})
        o1 = transition(m, o, DecisionRuleProfile(uniform_rule(m, o, 1), opp.rule(0)))
        opp = opp.replace(random_rule(rng, m, o1, 2))
        direct = sum(wi * evaluate_profile(m, o, pure_to_behavioral(p, m.n_actions(1)), opp)
                     for p, wi in zip(pures, w))
        assert evaluate_profile(m, o, beh, opp) == pytest.approx(direct, abs=1e-9)


def test_json_round_trip(tmp_path):
    m = builtin("matching-pennies-2step")
    s = uniform_strategy(m, initial_occupancy(m), 1, 2)
    s.save(tmp_path / "s.json")
    back = BehavioralStrategy.load(tmp_path / "s.json")
    assert back.to_json() == s.to_json()


def test_mix_rules_domain_check():
    a = DecisionRule.from_rows(1, 0, {EMPTY: [1, 0]})
    b = DecisionRule.from_rows(1, 0, {EMPTY: [0, 1]})
    np.testing.assert_allclose(mix_rules(a, b, 0.25)[EMPTY], [0.25, 0.75])
    with pytest.raises(ValueError):
        mix_rules(a, DecisionRule.from_rows(2, 0, {EMPTY: [0, 1]}), 0.5)


def _random_strategy(rng, m, o, player):
    rules = {}
    n, nz = m.n_actions(player), m.n_observations(player)
    frontier = list({k[player] for k, _ in o})
    for t in range(o.depth, m.horizon):
        rules[t] = DecisionRule.from_rows(player, t, {h: rng.dirichlet(np.ones(n)) for h in frontier})
        frontier = [HISTORIES.extend(h, a, z) for h in frontier for a in range(n) for z in range(nz)]
    return BehavioralStrategy(player, rules)


@given(st.sampled_from(BUILTIN_NAMES), st.integers(0, 2**32 - 1), st.floats(0, 1))
def test_value_linear_in_rule_and_occupancy(name, seed, alpha):
    m = builtin(name)
    rng = np.random.default_rng(seed)
    depth = int(rng.integers(0, m.horizon))
    a, b = random_occupancy(rng, m, depth), random_occupancy(rng, m, depth)
    o = mix(a, b, alpha)
    s1, s2 = _random_strategy(rng, m, o, 1), _random_strategy(rng, m, o, 2)
    v = evaluate_profile(m, o, s1, s2)
    assert v == pytest.approx(alpha * evaluate_profile(m, a, s1, s2)
                              + (1 - alpha) * evaluate_profile(m, b, s1, s2), abs=1e-9)
    lo, hi = static_horizon_bounds(m, depth)
    assert lo - 1e-9 <= v <= hi + 1e-9
    # mixing one depth's rule mixes the value
    t = int(rng.integers(depth, m.horizon))
    other = _random_strategy(rng, m, o, 1)
    mixed = s1.replace(mix_rules(s1.rule(t), other.rule(t), alpha))
    va = evaluate_profile(m, o, s1, s2)
    vb = evaluate_profile(m, o, s1.replace(other.rule(t)), s2)
    assert evaluate_profile(m, o, mixed, s2) == pytest.approx(alpha * va + (1 - alpha) * vb, abs=1e-9)
