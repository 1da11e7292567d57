"""Hand-written preference tables, one expert per game.

Each scorer maps an outcome to one value per action; higher is preferred.
The experts read only the observation plus the game's published parameters.
"""
from __future__ import annotations

from functools import lru_cache

from prescience.agents.policies import MissingExpert, Policy, PreferenceOrder
from prescience.envs import make_env


def crossing_expert(env):
    top = env.lanes + 1

    def hit(row, phase):
        return 1 <= row <= env.lanes and env.car_column(row, phase) == env.agent_col

    def land(row, action):
        if action == 1:
            row += 1
        elif action == 2 and row > 0:
            row -= 1
        return 0 if row == top else row

    @lru_cache(maxsize=None)
    def survives(row, phase, depth):
        if depth == 0:
            return True
        nxt = phase + 1
        return any(
            not hit(land(row, a), nxt) and survives(land(row, a), nxt % env.cycle, depth - 1)
            for a in (0, 1, 2)
        )

    progress = (1.0, 2.0, 0.0)

    def score(outcome):
        s = outcome.observation.scalars
        row, phase = s["row"], s["phase"]
        values = []
        for a in (0, 1, 2):
            r = land(row, a)
            nxt = (phase + 1) % env.cycle
            if hit(r, nxt):
                values.append(progress[a])
            else:
                values.append(10.0 * (1 + survives(r, nxt, 3)) + progress[a])
        return values

    return score


def overheat_expert(env):
    def score(outcome):
        s = outcome.observation.scalars
        heat = 0 if s["heat"] >= env.overheat_threshold else s["heat"]
        after = max(0, heat - env.cooling_per_frame) + env.heat_per_shot
        can_fire = after < env.overheat_threshold
        col, enemy = s["col"], s["enemy"]
        values = [1.0, -10.0, 0.0, 0.0]  # noop, fire, left, right
        if can_fire:
            values[1] = 5.0 if col == enemy else -1.0
        if col < enemy:
            values[3] = 3.0
        elif col > enemy:
            values[2] = 3.0
        return values

    return score


def roll_expert(env):
    best = max(range(env.width), key=lambda c: (env.pins_hit(c), -abs(c - env.start_col)))

    def score(outcome):
        s = outcome.observation.scalars
        col = s["col"]
        if col < best:
            return [1.0, 0.0, 3.0, -1.0]
        if col > best:
            return [1.0, 3.0, 0.0, -1.0]
        return [1.0, 0.0, 0.0, 3.0]

    return score


def fuel_expert(env):
    lane = min(
        range(env.width),
        key=lambda c: (any((r, c) in env.hazard_cells for r in range(env.track_len)), abs(c - env.start[1])),
    )

    def score(outcome):
        s = outcome.observation.scalars
        col = s["col"]
        if col < lane:
            return [1.0, 0.0, 3.0, -1.0]
        if col > lane:
            return [1.0, 3.0, 0.0, -1.0]
        return [1.0, 0.0, 0.0, 3.0]

    return score


def fuel_kamikaze(env):
    """Drives into the nearest hazard: safe forever by ending the episode."""
    target = min(env.hazard_cells, key=lambda rc: (abs(rc[1] - env.start[1]) + rc[0], rc))

    def score(outcome):
        col = outcome.observation.scalars["col"]
        if col > target[1]:
            return [0.0, 3.0, -1.0, 1.0]
        if col < target[1]:
            return [0.0, -1.0, 3.0, 1.0]
        return [0.0, 1.0, -1.0, 3.0]

    return score


SCRIPTS = {
    ("crossing", "expert"): crossing_expert,
    ("overheat", "expert"): overheat_expert,
    ("roll", "expert"): roll_expert,
    ("fuel", "expert"): fuel_expert,
    ("fuel", "kamikaze"): fuel_kamikaze,
}


class ScriptedPolicy(Policy):
    """Fixed preference table authored for one game."""

    kind = "scripted"

    def __init__(self, env_kind: str, name: str, params=None):
        try:
            build = SCRIPTS[(env_kind, name)]
        except KeyError:
            if name == "expert":
                raise MissingExpert(f"no scripted expert for {env_kind!r}") from None
            raise KeyError(f"no scripted policy {name!r} for {env_kind!r}") from None
        env = make_env(env_kind, params)
        self.env_kind = env_kind
        self.name = name
        self.params = dict(params or {})
        self.n_actions = env.n_actions
        self.scorer = build(env)

    def __reduce__(self):
        return (ScriptedPolicy, (self.env_kind, self.name, self.params))

    def act(self, outcome):
        self._check(outcome)
        return PreferenceOrder.from_values(self.scorer(outcome))


def make_scripted(env_kind: str, name: str, params=None) -> ScriptedPolicy:
    return ScriptedPolicy(env_kind, name, params)
