import csv
from fractions import Fraction

import pytest

from prescience.agents import RandomPolicy, make_scripted
from prescience.envs import EnvFactory
from prescience.nondet import BranchSpec
from prescience.oracle import RefGame, replay
from prescience.properties import Property, load_property_suite, default_suite_path
from prescience.verifier import (
    AnalysisConfig,
    AnalysisResult,
    DegenerateReference,
    DegenerateVariance,
    PrefixViolation,
    TraceRecord,
    analyse,
    analyse_many,
    degree_of_safety,
    distributions,
    normalised_reward,
    pearson_correlation,
    write_analysis_csv,
)

SUITE = load_property_suite(default_suite_path())


def rec(i, safe):
    return TraceRecord(i, 10, None if safe else 3, 0, safe, "frame_cap")


def result(n_safe, n=30, pid="g:x", pol="p"):
    return AnalysisResult(pid, pol, [rec(i, i < n_safe) for i in range(n)])


def test_degree_of_safety_is_exact():
    assert degree_of_safety(result(30)) == 1
    assert degree_of_safety(result(0)) == 0
    assert degree_of_safety(result(21)) == Fraction(7, 10)


def test_normalised_reward():
    assert normalised_reward(110, 10, 110) == 100
    assert normalised_reward(10, 10, 110) == 0
    assert normalised_reward(60, 10, 110) == 50
    with pytest.raises(DegenerateReference):
        normalised_reward(1, 5, 5)


def test_pearson_fixtures():
    assert abs(pearson_correlation([(0, 1), (1, 3), (2, 5), (3, 7)]) - 1.0) <= 1e-12
    assert abs(pearson_correlation([(0, 3), (1, 2), (2, 1)]) + 1.0) <= 1e-12
    assert abs(pearson_correlation([(0, 0), (1, 0), (0, 1), (1, 1)])) <= 1e-12
    with pytest.raises(DegenerateVariance):
        pearson_correlation([(1, 1), (1, 2)])
    with pytest.raises(DegenerateVariance):
        pearson_correlation([(1, 1)])


def test_distributions():
    safety, sat = distributions([result(30)])
    assert safety[30] == 1 and sum(safety) == 1
    assert sat == [0, 1]
    safety, sat = distributions([])
    assert not any(safety) and not any(sat)


def test_random_crossing_collides_expert_does_not():
    f = EnvFactory("crossing")
    prop = SUITE["crossing:no-collision"]
    rnd = analyse(f, RandomPolicy("crossing", 3, 0), prop, AnalysisConfig())
    exp = analyse(f, make_scripted("crossing", "expert"), prop, AnalysisConfig())
    assert len(rnd.traces) == 30
    assert rnd.degree_of_safety < 1
    assert exp.degree_of_safety == 1


@pytest.mark.parametrize("kind,params", [("overheat", {"overheat_threshold": 4}), ("fuel", {"fuel_init": 7}), ("roll", {})])
def test_verdicts_match_reference_replay(kind, params):
    f = EnvFactory(kind, params)
    props = SUITE.for_game(kind)
    pol = RandomPolicy(kind, f().n_actions, 2)
    cfg = AnalysisConfig(nu=10, frame_cap=300)
    got = analyse_many(f, pol, props, cfg)
    want = replay(RefGame(kind, params), pol, props, 10, 300)
    for r, w in zip(got, want):
        assert [(t.steps, t.first_violation_step, t.total_reward, t.terminal_reason) for t in r.traces] == \
               [(t.steps, t.first_violation_step, t.total_reward, t.reason) for t in w]


def test_results_do_not_depend_on_worker_count():
    f = EnvFactory("roll")
    pol = RandomPolicy("roll", 4, 0)
    cfg = AnalysisConfig(nu=6)
    assert analyse_many(f, pol, SUITE.for_game("roll"), cfg, workers=1) == \
           analyse_many(f, pol, SUITE.for_game("roll"), cfg, workers=2)


def test_frame_cap_and_branch_modes_are_reproducible():
    f = EnvFactory("crossing")
    pol = RandomPolicy("crossing", 3, 0)
    prop = SUITE["crossing:no-collision"]
    for spec in (BranchSpec("sticky", p=0.25, seed=4), BranchSpec("frameskip", seed=4)):
        cfg = AnalysisConfig(nu=4, frame_cap=50, branch=spec)
        a = analyse(f, pol, prop, cfg)
        assert a == analyse(f, pol, prop, cfg)
        assert all(t.steps <= 50 for t in a.traces)
        assert all(t.terminal_reason == "frame_cap" for t in a.traces if not t.steps < 50)


def test_prefix_violation_is_reported():
    # starting inside the road, no-ops alone walk the walker into traffic
    f = EnvFactory("crossing", {"start_row": 1, "lives": 3})
    prop = Property("crossing:x", "shallow", "life_count")
    with pytest.raises(PrefixViolation):
        analyse(f, RandomPolicy("crossing", 3), prop, AnalysisConfig(nu=30))


def test_analysis_csv(tmp_path):
    p = tmp_path / "a.csv"
    write_analysis_csv(p, [result(1, n=2)])
    rows = list(csv.reader(open(p)))
    assert rows == [
        ["property_id", "policy_id", "initial_index", "steps", "first_violation_step", "total_reward", "safe"],
        ["g:x", "p", "0", "10", "", "0", "1"],
        ["g:x", "p", "1", "10", "3", "0", "0"],
    ]
