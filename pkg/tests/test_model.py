import json

import numpy as np
import pytest

from zsomg.model import (ModelError, builtin, dumps, from_dict, load_model, reward_bounds,
                         save_model, static_horizon_bounds, to_dict)

from conftest import matrix_model


def test_matching_pennies_fixture(fixtures):
    m = load_model(fixtures / "matching_pennies.json")
    assert m.n_states == 1
    assert m.n_actions(1) == m.n_actions(2) == 2
    assert m.n_observations(1) == m.n_observations(2) == 1
    assert m.horizon == 1


def test_tiger_fixture(fixtures):
    m = load_model(fixtures / "adversarial_tiger.json")
    assert m.n_states == 2 and m.horizon == 3
    assert m.gamma == 0.9


def test_bad_row_names_the_violation(fixtures):
    with pytest.raises(ModelError, match=r"transition\(0,0,1\) sums to 0.9"):
        load_model(fixtures / "bad_transition.json")


def test_parse_errors(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    with pytest.raises(ModelError, match="parse"):
        load_model(p)
    with pytest.raises(ModelError):
        load_model(tmp_path / "missing.json")


def test_unlisted_transition_is_an_error():
    d = to_dict(builtin("matching-pennies"))
    d["transition"].pop()
    with pytest.raises(ModelError):
        from_dict(d)


def test_unlisted_reward_defaults_to_zero():
    d = to_dict(builtin("matching-pennies"))
    d["reward"] = [r for r in d["reward"] if (r["a1"], r["a2"]) != (0, 1)]
    assert from_dict(d).reward[0, 0, 1] == 0.0


def test_infinite_horizon_accepted():
    d = to_dict(builtin("matching-pennies"))
    d["horizon"] = "infinite"
    m = from_dict(d)
    assert m.horizon is None
    assert json.loads(dumps(m))["horizon"] == "infinite"


@pytest.mark.parametrize("field,value", [("gamma", 1.0), ("gamma", -0.1), ("horizon", 0),
                                         ("b0", [0.5, 0.6])])
def test_invalid_scalars(field, value):
    d = to_dict(builtin("matching-pennies"))
    d[field] = value
    with pytest.raises(ModelError):
        from_dict(d)


def test_out_of_range_index():
    d = to_dict(builtin("matching-pennies"))
    d["reward"][0]["a1"] = 5
    with pytest.raises(ModelError):
        from_dict(d)


def test_builtins_and_unknown(any_builtin):
    # construction runs full validation
    assert any_builtin.content_hash() == builtin(any_builtin.name).content_hash()
    with pytest.raises(ModelError, match="unknown builtin"):
        builtin("bogus")


def test_matching_pennies_definition():
    m = builtin("matching-pennies")
    for a1 in range(2):
        for a2 in range(2):
            assert m.reward[0, a1, a2] == (1.0 if a1 == a2 else -1.0)
    m2 = builtin("matching-pennies-2step")
    assert m2.horizon == 2 and m2.gamma == 0.5
    np.testing.assert_array_equal(m2.reward, m.reward)
    # player 1 hears player 2's action right with probability 0.8
    assert m2.transition[0, 0, 1, 0, 1, :].sum() == pytest.approx(0.8)


def test_tiger_dynamics():
    m = builtin("adversarial-tiger")
    # listening while player 2 is quiet: 0.85 accurate; screaming drops that to 0.5
    assert m.transition[0, 0, 0, 0, 0, 0] == pytest.approx(0.85)
    assert m.transition[0, 0, 1, 0, 0, 0] == pytest.approx(0.5)
    # screaming hands player 1 half a point
    assert m.reward[0, 0, 1] - m.reward[0, 0, 0] == pytest.approx(0.5)


def test_reward_bounds():
    rb = reward_bounds(builtin("matching-pennies"))
    assert (rb.r_min, rb.r_max, rb.lambda_r) == (-1.0, 1.0, 1.0)
    rb = reward_bounds(matrix_model(np.full((2, 2), 3.0)))
    assert (rb.r_min, rb.r_max, rb.lambda_r) == (3.0, 3.0, 0.0)
    m = builtin("adversarial-tiger")
    R = m.reward
    scan = [R[s, a, b] for s in range(2) for a in range(3) for b in range(2)]
    rb = reward_bounds(m)
    assert (rb.r_min, rb.r_max) == (min(scan), max(scan)) == (-1.0, 1.5)


def test_static_horizon_bounds():
    m = builtin("adversarial-tiger")
    lo, hi = static_horizon_bounds(m, 0)
    assert hi == pytest.approx(1.5 * (1 + 0.9 + 0.81))
    assert lo == pytest.approx(-(1 + 0.9 + 0.81))
    assert static_horizon_bounds(m, 3) == (0.0, 0.0)


@pytest.mark.parametrize("name", ["matching_pennies", "matching_pennies_2step", "adversarial_tiger"])
def test_round_trip_is_bit_identical(fixtures, tmp_path, name):
    src = fixtures / f"{name}.json"
    m = load_model(src)
    out = tmp_path / "again.json"
    save_model(m, out)
    assert out.read_bytes() == src.read_bytes()
    assert load_model(out).content_hash() == m.content_hash()


def test_with_horizon_keeps_tables():
    m = builtin("adversarial-tiger").with_horizon(2)
    assert m.horizon == 2
    np.testing.assert_array_equal(m.reward, builtin("adversarial-tiger").reward)
