"""Two-player zero-sum POSG models: validation, JSON I/O and builtin games."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

PROB_TOL = 1e-9
INFINITE = "infinite"


class ModelError(ValueError):
    """Raised when a model file cannot be parsed or violates an invariant."""


@dataclass(frozen=True)
class RewardBounds:
    r_min: float
    r_max: float

    @property
    def lambda_r(self) -> float:
        return (self.r_max - self.r_min) / 2.0


@dataclass(frozen=True, eq=False)
class PosgModel:
    """The tuple <S, A1, A2, Z1, Z2, P, r, H, gamma, b0>.

    ``transition[s, a1, a2, s2, z1, z2]`` is the joint probability of moving
    to ``s2`` and emitting ``(z1, z2)``; ``reward[s, a1, a2]`` is paid to
    player 1.  ``horizon`` is a positive int or ``None`` for infinite.
    """

    states: tuple[str, ...]
    actions: tuple[tuple[str, ...], tuple[str, ...]]
    observations: tuple[tuple[str, ...], tuple[str, ...]]
    transition: np.ndarray
    reward: np.ndarray
    horizon: int | None
    gamma: float
    b0: np.ndarray
    name: str = "model"
    successors: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.transition.setflags(write=False)
        self.reward.setflags(write=False)
        self.b0.setflags(write=False)
        validate(self)
        # sparse successor lists: successors[s][a1][a2] -> ((s2, z1, z2, p), ...)
        succ = []
        for s in range(self.n_states):
            rows = []
            for a1 in range(self.n_actions(1)):
                cols = []
                for a2 in range(self.n_actions(2)):
                    nz = np.argwhere(self.transition[s, a1, a2] > 0)
                    cols.append(tuple(
                        (int(s2), int(z1), int(z2), float(self.transition[s, a1, a2, s2, z1, z2]))
                        for s2, z1, z2 in nz))
                rows.append(tuple(cols))
            succ.append(tuple(rows))
        object.__setattr__(self, "successors", tuple(succ))

    @property
    def n_states(self) -> int:
        return len(self.states)

    def n_actions(self, player: int) -> int:
        return len(self.actions[player - 1])

    def n_observations(self, player: int) -> int:
        return len(self.observations[player - 1])

    @property
    def is_finite(self) -> bool:
        return self.horizon is not None

    def with_horizon(self, horizon: int | None) -> "PosgModel":
        return PosgModel(self.states, self.actions, self.observations,
                         self.transition.copy(), self.reward.copy(), horizon,
                         self.gamma, self.b0.copy(), name=self.name)

    def content_hash(self) -> str:
        return hashlib.sha1(dumps(self).encode()).hexdigest()


def validate(m: PosgModel) -> None:
    """Check every model invariant; raise ModelError naming the first violation."""
    S = m.n_states
    A1, A2 = m.n_actions(1), m.n_actions(2)
    Z1, Z2 = m.n_observations(1), m.n_observations(2)
    if S == 0 or A1 == 0 or A2 == 0 or Z1 == 0 or Z2 == 0:
        raise ModelError("states, actions and observations must be nonempty")
    if m.transition.shape != (S, A1, A2, S, Z1, Z2):
        raise ModelError(f"transition has shape {m.transition.shape}, "
                         f"expected {(S, A1, A2, S, Z1, Z2)}")
    if m.reward.shape != (S, A1, A2):
        raise ModelError(f"reward has shape {m.reward.shape}, expected {(S, A1, A2)}")
    if not np.all(np.isfinite(m.reward)):
        raise ModelError("reward contains non-finite entries")
    if np.any(m.transition < 0) or np.any(m.transition > 1):
        raise ModelError("transition probabilities must lie in [0, 1]")
    sums = m.transition.reshape(S, A1, A2, -1).sum(axis=-1)
    for s in range(S):
        for a1 in range(A1):
            for a2 in range(A2):
                if abs(sums[s, a1, a2] - 1.0) > PROB_TOL:
                    raise ModelError(
                        f"transition({s},{a1},{a2}) sums to {sums[s, a1, a2]:.12g}")
    if m.b0.shape != (S,):
        raise ModelError(f"b0 has length {m.b0.shape[0]}, expected {S}")
    if np.any(m.b0 < 0):
        raise ModelError("b0 has negative entries")
    if abs(m.b0.sum() - 1.0) > PROB_TOL:
        raise ModelError(f"b0 sums to {m.b0.sum():.12g}")
    if m.horizon is not None and (not isinstance(m.horizon, int) or m.horizon < 1):
        raise ModelError(f"horizon must be a positive integer or '{INFINITE}'")
    if not 0.0 <= m.gamma < 1.0:
        raise ModelError(f"gamma must lie in [0, 1), got {m.gamma}")


def reward_bounds(m: PosgModel) -> RewardBounds:
    return RewardBounds(float(m.reward.min()), float(m.reward.max()))


# ---------------------------------------------------------------------------
# JSON schema

def to_dict(m: PosgModel) -> dict:
    transition = []
    S, A1, A2 = m.reward.shape
    for s in range(S):
        for a1 in range(A1):
            for a2 in range(A2):
                nxt = [{"s2": s2, "z1": z1, "z2": z2, "p": p}
                       for s2, z1, z2, p in m.successors[s][a1][a2]]
                transition.append({"s": s, "a1": a1, "a2": a2, "next": nxt})
    reward = [{"s": s, "a1": a1, "a2": a2, "r": float(m.reward[s, a1, a2])}
              for s in range(S) for a1 in range(A1) for a2 in range(A2)
              if m.reward[s, a1, a2] != 0.0]
    return {
        "name": m.name,
        "states": list(m.states),
        "actions": [list(m.actions[0]), list(m.actions[1])],
        "observations": [list(m.observations[0]), list(m.observations[1])],
        "transition": transition,
        "reward": reward,
        "horizon": INFINITE if m.horizon is None else m.horizon,
        "gamma": m.gamma,
        "b0": [float(p) for p in m.b0],
    }


def dumps(m: PosgModel) -> str:
    """Canonical JSON text (sorted keys, fixed separators)."""
    return json.dumps(to_dict(m), sort_keys=True, indent=1) + "\n"


def _index(names, value, what):
    if isinstance(value, bool):
        raise ModelError(f"{what} index must be an integer or name, got {value!r}")
    if isinstance(value, int):
        if not 0 <= value < len(names):
            raise ModelError(f"{what} index {value} out of range [0, {len(names)})")
        return value
    if isinstance(value, str) and value in names:
        return names.index(value)
    raise ModelError(f"unknown {what} {value!r}")


def from_dict(d: dict) -> PosgModel:
    try:
        states = tuple(str(s) for s in d["states"])
        actions = tuple(tuple(str(a) for a in acts) for acts in d["actions"])
        observations = tuple(tuple(str(z) for z in obs) for obs in d["observations"])
        if len(actions) != 2 or len(observations) != 2:
            raise ModelError("'actions' and 'observations' must each hold two lists")
        horizon = d["horizon"]
        gamma = float(d["gamma"])
        b0 = np.asarray(d["b0"], dtype=float)
        records = d["transition"]
        rewards = d.get("reward", [])
    except KeyError as exc:
        raise ModelError(f"missing key {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(f"malformed model: {exc}") from None
    if horizon == INFINITE:
        horizon = None
    elif isinstance(horizon, bool) or not isinstance(horizon, int):
        raise ModelError(f"horizon must be a positive integer or '{INFINITE}'")

    S = len(states)
    A1, A2 = len(actions[0]), len(actions[1])
    Z1, Z2 = len(observations[0]), len(observations[1])
    P = np.zeros((S, A1, A2, S, Z1, Z2))
    seen = np.zeros((S, A1, A2), dtype=bool)
    for rec in records:
        try:
            s = _index(states, rec["s"], "state")
            a1 = _index(actions[0], rec["a1"], "player-1 action")
            a2 = _index(actions[1], rec["a2"], "player-2 action")
            if seen[s, a1, a2]:
                raise ModelError(f"duplicate transition record ({s},{a1},{a2})")
            seen[s, a1, a2] = True
            for nx in rec["next"]:
                s2 = _index(states, nx["s2"], "state")
                z1 = _index(observations[0], nx["z1"], "player-1 observation")
                z2 = _index(observations[1], nx["z2"], "player-2 observation")
                P[s, a1, a2, s2, z1, z2] += float(nx["p"])
        except KeyError as exc:
            raise ModelError(f"transition record missing key {exc.args[0]!r}") from None
    missing = np.argwhere(~seen)
    if len(missing):
        s, a1, a2 = (int(v) for v in missing[0])
        raise ModelError(f"transition({s},{a1},{a2}) is not listed")
    R = np.zeros((S, A1, A2))
    for rec in rewards:
        try:
            s = _index(states, rec["s"], "state")
            a1 = _index(actions[0], rec["a1"], "player-1 action")
            a2 = _index(actions[1], rec["a2"], "player-2 action")
            R[s, a1, a2] = float(rec["r"])
        except KeyError as exc:
            raise ModelError(f"reward record missing key {exc.args[0]!r}") from None
    return PosgModel(states, actions, observations, P, R, horizon, gamma, b0,
                     name=str(d.get("name", "model")))


def load_model(path: Union[str, Path]) -> PosgModel:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ModelError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: JSON parse error: {exc}") from None
    if not isinstance(data, dict):
        raise ModelError(f"{path}: top level must be an object")
    return from_dict(data)


def save_model(m: PosgModel, path: Union[str, Path]) -> None:
    Path(path).write_text(dumps(m))


# ---------------------------------------------------------------------------
# builtins

def _matching_pennies(horizon: int, noisy: bool) -> PosgModel:
    if noisy:
        obs = ("saw-heads", "saw-tails")
        P = np.zeros((1, 2, 2, 1, 2, 2))
        for a1 in range(2):
            for a2 in range(2):
                for z1 in range(2):
                    for z2 in range(2):
                        # each player sees the opponent's last action w.p. 0.8
                        p1 = 0.8 if z1 == a2 else 0.2
                        p2 = 0.8 if z2 == a1 else 0.2
                        P[0, a1, a2, 0, z1, z2] = p1 * p2
    else:
        obs = ("none",)
        P = np.ones((1, 2, 2, 1, 1, 1))
    R = np.array([[[1.0, -1.0], [-1.0, 1.0]]])
    name = "matching-pennies-2step" if noisy else "matching-pennies"
    return PosgModel(("s0",), (("heads", "tails"), ("heads", "tails")), (obs, obs),
                     P, R, horizon, 0.5, np.array([1.0]), name=name)


def _adversarial_tiger() -> PosgModel:
    states = ("tiger-left", "tiger-right")
    a1s = ("listen", "open-left", "open-right")
    a2s = ("quiet", "scream")
    z1s = ("hear-left", "hear-right")
    z2s = ("none",)
    P = np.zeros((2, 3, 2, 2, 2, 1))
    R = np.zeros((2, 3, 2))
    for s in range(2):
        for a2 in range(2):
            acc = 0.85 if a2 == 0 else 0.5
            P[s, 0, a2, s, s, 0] = acc
            P[s, 0, a2, s, 1 - s, 0] = 1.0 - acc
            for a1 in (1, 2):
                # opening a door resets the tiger uniformly; uninformative signal
                P[s, a1, a2, :, :, 0] = 0.25
            R[s, 0, a2] = -0.1
            # open-left (a1=1) finds the tiger iff s == 0
            R[s, 1, a2] = -1.0 if s == 0 else 1.0
            R[s, 2, a2] = -1.0 if s == 1 else 1.0
            if a2 == 1:
                R[s, :, a2] += 0.5
    return PosgModel(states, (a1s, a2s), (z1s, z2s), P, R, 3, 0.9,
                     np.array([0.5, 0.5]), name="adversarial-tiger")


BUILTINS = {
    "matching-pennies": lambda: _matching_pennies(1, noisy=False),
    "matching-pennies-2step": lambda: _matching_pennies(2, noisy=True),
    "adversarial-tiger": _adversarial_tiger,
}


def builtin(name: str) -> PosgModel:
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise ModelError(f"unknown builtin {name!r}; choose from {sorted(BUILTINS)}") from None
    return factory()


def static_horizon_bounds(m: PosgModel, tau: int) -> tuple[float, float]:
    """(V_min, V_max) of any strategy profile from depth ``tau`` on."""
    rb = reward_bounds(m)
    if m.horizon is None:
        factor = 1.0 / (1.0 - m.gamma)
    else:
        steps = max(m.horizon - tau, 0)
        factor = (1.0 - m.gamma ** steps) / (1.0 - m.gamma)
    return factor * rb.r_min, factor * rb.r_max
