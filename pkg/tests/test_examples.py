"""Worked examples on default and demo parameters (longer-running)."""
import csv

import pytest

from prescience import cli
from prescience.agents import GreedyQPolicy, RandomPolicy, mean_reward, reference_scores, train_q
from prescience.envs import EnvFactory, make_env
from prescience.properties import default_suite_path, load_property_suite
from prescience.shield import ShieldConfig, shield_many
from prescience.verifier import AnalysisConfig

SUITE = load_property_suite(default_suite_path())


def test_overheat_fire_every_frame_overheats_at_frame_9():
    env = make_env("overheat")
    heats = []
    for frame in range(1, 10):
        out = env.step(1)
        heats.append(out.observation.scalars["heat"])
        if out.lives < 3:
            break
    assert frame == 9 and heats[:8] == list(range(2, 10))


def test_crossing_idle_walker_never_collides():
    env = make_env("crossing")
    outs = [env.step(0) for _ in range(2000)]
    assert all(o.lives == 3 and o.reward == 0 for o in outs)


def test_crossing_references_ordered():
    rs = reference_scores(EnvFactory("crossing"))
    assert rs.r_reference > rs.r_random > 0


@pytest.mark.slow
def test_crossing_q_beats_random_fivefold():
    f = EnvFactory("crossing")
    q = GreedyQPolicy("crossing", train_q(f, 5000))
    assert mean_reward(f, q, AnalysisConfig()) >= 5 * mean_reward(f, RandomPolicy("crossing", 3, 0), AnalysisConfig())


@pytest.mark.slow
def test_overheat_default_q_is_safe_at_h5():
    f = EnvFactory("overheat")
    q = GreedyQPolicy("overheat", train_q(f, 2000))
    for pid in ("overheat:no-death", "overheat:no-overheat"):
        assert shield_many(f, q, [SUITE[pid]], AnalysisConfig(), ShieldConfig(5))[0].safe_count == 30


@pytest.mark.slow
def test_demo_analyse_report(tmp_path, demo):
    bundle = cli.cmd_analyse(demo, 1, tmp_path)
    agg = list(csv.DictReader(open(bundle.files["aggregate.csv"])))
    assert len(agg) == 27
    hist = [r for r in csv.DictReader(open(bundle.files["histogram.csv"])) if r["histogram"] == "safe_traces"]
    counts = {int(r["bin"]): int(r["count"]) for r in hist}
    assert counts[0] + counts[30] > sum(counts[b] for b in range(1, 30))
    q_crossing = next(r for r in agg if r["env"] == "crossing" and r["policy_id"] == "greedy_q")
    assert float(q_crossing["normalised_reward"]) >= 50
