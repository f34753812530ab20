import warnings
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from zsomg.hsvi import BudgetWarning
from zsomg.model import PosgModel, builtin

FIXTURES = Path(__file__).parent / "fixtures"
BUILTIN_NAMES = ("matching-pennies", "matching-pennies-2step", "adversarial-tiger")

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


@pytest.fixture(params=BUILTIN_NAMES)
def any_builtin(request) -> PosgModel:
    return builtin(request.param)


@pytest.fixture
def quiet_budget():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BudgetWarning)
        yield


def matrix_model(M, horizon=1, gamma=0.5) -> PosgModel:
    """One-state game whose stage payoff is the matrix M."""
    M = np.asarray(M, dtype=float)
    n1, n2 = M.shape
    return PosgModel(("s0",), (tuple(f"r{i}" for i in range(n1)), tuple(f"c{j}" for j in range(n2))),
                     (("z",), ("z",)), np.ones((1, n1, n2, 1, 1, 1)), M[None].copy(), horizon, gamma,
                     np.array([1.0]), name="matrix")


def random_model(rng, n_states=2, n_actions=(2, 2), n_obs=(2, 2), horizon=2, gamma=0.7) -> PosgModel:
    """Small random model with dense transitions and rewards in [-1, 1]."""
    A1, A2 = n_actions
    Z1, Z2 = n_obs
    P = rng.uniform(0.05, 1.0, (n_states, A1, A2, n_states, Z1, Z2))
    P /= P.sum(axis=(3, 4, 5), keepdims=True)
    R = rng.uniform(-1.0, 1.0, (n_states, A1, A2))
    b0 = rng.dirichlet(np.ones(n_states))
    return PosgModel(tuple(f"s{i}" for i in range(n_states)),
                     (tuple(f"a{i}" for i in range(A1)), tuple(f"b{i}" for i in range(A2))),
                     (tuple(f"y{i}" for i in range(Z1)), tuple(f"w{i}" for i in range(Z2))),
                     P, R, horizon, gamma, b0, name="random")


def random_rule(rng, m, o, player, deterministic=False):
    from zsomg.occupancy import marginal_private_histories
    from zsomg.strategy import DecisionRule

    n = m.n_actions(player)
    rows = {}
    for h in marginal_private_histories(o, player):
        if deterministic:
            rows[h] = np.eye(n)[rng.integers(n)]
        else:
            rows[h] = rng.dirichlet(np.full(n, 0.7))
    return DecisionRule.from_rows(player, o.depth, rows)


def random_profile(rng, m, o, deterministic=False):
    from zsomg.strategy import DecisionRuleProfile

    return DecisionRuleProfile(random_rule(rng, m, o, 1, deterministic),
                               random_rule(rng, m, o, 2, deterministic))


def random_occupancy(rng, m, depth):
    """Reached by random rules, then reweighted so the support is kept but the mass moves."""
    from zsomg.occupancy import OccupancyState, initial_occupancy, transition

    o = initial_occupancy(m)
    for _ in range(depth):
        o = transition(m, o, random_profile(rng, m, o))
    w = rng.uniform(0.2, 1.0, len(o))
    return OccupancyState(depth, {k: p * wi for (k, p), wi in zip(o, w)}, normalize=True)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
