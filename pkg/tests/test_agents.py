import itertools
import pickle
import struct

import pytest
from hypothesis import given
from hypothesis import strategies as st

from prescience.agents import (
    EpsilonSchedule,
    GreedyQPolicy,
    MissingExpert,
    PreferenceOrder,
    QTable,
    RandomPolicy,
    WrongEnvKind,
    make_scripted,
    nth_permutation,
    q_update,
    reference_scores,
    train_q,
)
from prescience.envs import EnvFactory, make_env


def test_qtable_file_format_golden():
    t = QTable(2, 0.5, 0.25, "roll", 7, {9: [1.0, -2.0]})
    expected = (
        b"PQT1" + struct.pack("<I", 4) + b"roll"
        + struct.pack("<HddQI", 2, 0.5, 0.25, 7, 2)
        + struct.pack("<QHd", 9, 0, 1.0) + struct.pack("<QHd", 9, 1, -2.0)
    )
    assert t.to_bytes() == expected
    back = QTable.from_bytes(expected)
    assert back.entries == t.entries and back.env_id == "roll" and back.seed == 7


def test_qtable_rejects_corrupt_bytes():
    with pytest.raises(ValueError):
        QTable.from_bytes(b"NOPE")
    good = QTable(2, entries={1: [0.0, 1.0]}).to_bytes()
    with pytest.raises(ValueError):
        QTable.from_bytes(good + b"x")
    with pytest.raises(ValueError):
        QTable(2, gamma=0.0)


def test_q_update_matches_bellman_by_hand():
    t = QTable(2, gamma=0.9, alpha=0.5, entries={2: [3.0, 1.0]})
    q_update(t, 1, 0, 1.0, 2)
    assert t.entries[1] == [0.5 * (1.0 + 0.9 * 3.0), 0.0]
    q_update(t, 1, 0, 0.0, 99)  # unseen successor counts as zero
    assert t.entries[1][0] == 0.5 * 1.85


def test_zero_episode_training_gives_empty_table(tmp_path):
    t = train_q(EnvFactory("roll"), 0)
    assert len(t) == 0
    t.save(tmp_path / "q.bin")
    assert QTable.load(tmp_path / "q.bin").entries == {}


def test_training_is_seed_deterministic():
    f = EnvFactory("fuel", {"fuel_init": 7})
    a = train_q(f, 50, seed=3)
    b = train_q(f, 50, seed=3)
    c = train_q(f, 50, seed=4)
    assert a.to_bytes() == b.to_bytes()
    assert a.to_bytes() != c.to_bytes()


def test_epsilon_schedule():
    e = EpsilonSchedule(1.0, 0.1, 0.5)
    assert e(0, 100) == 1.0
    assert e(25, 100) == pytest.approx(0.55)
    assert e(50, 100) == e(99, 100) == 0.1


@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=6))
def test_preference_order_is_strict_and_total(values):
    p = PreferenceOrder.from_values(values)
    assert sorted(p.ranked) == list(range(len(values)))
    assert all(a > b for a, b in zip(p.scores, p.scores[1:]))
    assert values[p.top] == max(values)


def test_nth_permutation_enumerates_all():
    perms = [nth_permutation(4, k) for k in range(24)]
    assert sorted(perms) == sorted(itertools.permutations(range(4)))


def test_random_policy_reproducible_per_trace():
    env = make_env("roll")
    p = RandomPolicy("roll", 4, seed=1)
    p.begin_trace(5)
    a = [p.act(env.peek()).ranked for _ in range(10)]
    q = pickle.loads(pickle.dumps(RandomPolicy("roll", 4, seed=1)))
    q.begin_trace(5)
    assert a == [q.act(env.peek()).ranked for _ in range(10)]


def test_policies_reject_other_games():
    with pytest.raises(WrongEnvKind):
        RandomPolicy("roll", 4).act(make_env("fuel").peek())
    with pytest.raises(WrongEnvKind):
        GreedyQPolicy("roll", QTable(4)).act(make_env("fuel").peek())


def test_scripted_expert_and_missing_expert():
    p = make_scripted("crossing", "expert")
    assert pickle.loads(pickle.dumps(p)).act(make_env("crossing").peek()).ranked
    with pytest.raises(MissingExpert):
        make_scripted("stress", "expert")
    with pytest.raises(KeyError):
        make_scripted("roll", "kamikaze")


def test_reference_scores_roll():
    rs = reference_scores(EnvFactory("roll"))
    assert rs.r_reference == 3.0
    assert not rs.degenerate
