import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prescience.envs import InvalidParams, make_env
from prescience.oracle import RefGame

GAMES = {"crossing": {}, "overheat": {"overheat_threshold": 4}, "roll": {}, "fuel": {"fuel_init": 7}, "stress": {}}


@settings(max_examples=60, deadline=None)
@given(kind=st.sampled_from(sorted(GAMES)), actions=st.lists(st.integers(0, 3), max_size=120))
def test_env_matches_reference_simulator(kind, actions):
    env = make_env(kind, GAMES[kind])
    ref = RefGame(kind, GAMES[kind])
    s = ref.initial()
    assert env.save().payload == ref.payload(s)
    for a in actions:
        if env.terminal:
            break
        a %= env.n_actions
        out = env.step(a)
        s, r = ref.step(s, a)
        assert env.save().payload == ref.payload(s)
        assert out.reward == r
        scalars, lives, terminal = ref.view(s)
        assert out.observation.scalars == scalars
        assert (out.lives, out.terminal) == (lives, terminal)


def test_crossing_collision_costs_a_life_and_game_over_precedes_terminal():
    env = make_env("crossing", {"lives": 1})
    frames = 0
    while True:
        out = env.step(1)
        frames += 1
        if out.lives == 0:
            break
    assert not out.terminal
    assert env.step(0).terminal


def test_crossing_reward_on_far_side():
    env = make_env("crossing", {"lanes": 1, "width": 9, "car_periods": (1,), "car_offsets": (0,)})
    env.step(1)
    out = env.step(1)
    assert out.reward == 1
    assert out.observation.scalars["row"] == 0


def test_overheat_shot_over_threshold_loses_life():
    env = make_env("overheat", {"overheat_threshold": 4})
    env.step(1)  # heat 2
    out = env.step(1)  # 2 - 1 + 2 = 3, still fine
    assert out.observation.scalars["heat"] == 3
    out = env.step(1)  # 3 - 1 + 2 = 4 >= threshold
    assert out.observation.scalars["overheated"] == 1
    assert out.lives == 2


def test_roll_setup_then_aim_then_result():
    env = make_env("roll")
    for _ in range(30):
        out = env.step(0)
    assert out.observation.scalars["mode"] == 1
    env.step(1)  # col 0
    out = env.step(3)  # release
    assert out.observation.scalars["mode"] == 2
    for _ in range(40):
        out = env.step(0)
    assert not out.terminal
    assert out.observation.scalars["miss"] == 1
    assert out.reward == 0
    assert env.step(0).terminal


def test_roll_centre_knocks_three_pins():
    env = make_env("roll")
    for _ in range(30):
        env.step(0)
    env.step(2)
    env.step(2)
    env.step(2)  # col 4
    env.step(3)
    total = sum(env.step(0).reward for _ in range(40))
    assert total == 2  # pins at 2..4; window 3..5 covers 3 and 4


def test_fuel_depot_refills_and_empty_tank_stalls():
    env = make_env("fuel", {"fuel_init": 3})
    env.step(3)  # (1, 2) fuel 2
    env.step(3)  # (2, 2) fuel 1
    env.step(3)  # (3, 2) fuel 0
    out = env.step(3)
    assert out.observation.scalars == {"row": 3, "col": 2, "fuel": 0}
    env = make_env("fuel", {"fuel_init": 7})
    for _ in range(5):
        out = env.step(3)
    assert out.observation.scalars["fuel"] == 7  # depot at (5, 2)


@pytest.mark.parametrize("kind,params", [
    ("crossing", {"lanes": 2, "car_periods": (1,), "car_offsets": (0, 0)}),
    ("crossing", {"knockback": 0}),
    ("overheat", {"overheat_threshold": 0}),
    ("roll", {"width": 0}),
    ("fuel", {"fuel_init": -1}),
    ("stress", {"countdown": 0}),
])
def test_invalid_params(kind, params):
    with pytest.raises(InvalidParams):
        make_env(kind, params)


def test_stress_alarm_after_countdown():
    env = make_env("stress", {"countdown": 3, "period": 3})
    alarms = [env.step(0).observation.scalars["alarm"] for _ in range(6)]
    assert alarms == [0, 0, 1, 0, 0, 1]
