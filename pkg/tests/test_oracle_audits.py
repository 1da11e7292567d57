import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prescience.agents import RandomPolicy, make_scripted
from prescience.audits import (
    certified_bound,
    desiderata_audit,
    minimal_certificate,
    prefix_audit,
    shallow_certificate,
)
from prescience.envs import EnvFactory, make_env
from prescience.oracle import (
    OracleBudgetExceeded,
    OracleUnsupported,
    RefGame,
    RefLabel,
    product_graph,
    ref_acc,
    ref_bounded_safe,
    state_of,
)
from prescience.properties import Property, default_suite_path, init_labeller, label, load_property_suite
from prescience.shield import bounded_safe
from prescience.verifier import AnalysisConfig, AnalysisResult, TraceRecord

SUITE = load_property_suite(default_suite_path())
DEMO = {"crossing": {}, "overheat": {"overheat_threshold": 4}, "roll": {}, "fuel": {"fuel_init": 7}}


@settings(max_examples=40, deadline=None)
@given(pid=st.sampled_from(sorted(SUITE)), actions=st.lists(st.integers(0, 3), max_size=50), depth=st.integers(0, 5))
def test_shield_search_agrees_with_reference_dfs(pid, actions, depth):
    prop = SUITE[pid]
    kind = prop.game
    env = make_env(kind, DEMO[kind])
    lab = init_labeller(prop)
    _, lab = label(lab, env.peek())
    for a in actions:
        if env.terminal:
            return
        _, lab = label(lab, env.step(a % env.n_actions))
    if env.terminal:
        return
    game, rl = RefGame(kind, DEMO[kind]), RefLabel(prop)
    s = state_of(game, env.save().payload)
    assert bounded_safe(env, lab, depth) == ref_bounded_safe(game, rl, s, ref_acc(rl, lab.acc), depth)


def test_shallow_certificates():
    assert shallow_certificate("overheat", {}, SUITE["overheat:no-overheat"], 10).holds
    miss = shallow_certificate("roll", {}, SUITE["roll:no-miss"], 10)
    assert miss.holds is False and miss.counterexample is not None
    assert shallow_certificate("roll", {}, SUITE["roll:no-miss"], 41).holds
    assert shallow_certificate("crossing", {}, SUITE["crossing:no-collision"], 3).holds


def test_certified_bounds():
    assert certified_bound("roll", {}, SUITE["roll:no-miss"]) == 41
    assert certified_bound("crossing", {}, SUITE["crossing:no-collision"]) == 3
    assert certified_bound("overheat", DEMO["overheat"], SUITE["overheat:no-death"]) == 1


def test_budget_and_unsupported():
    with pytest.raises(OracleBudgetExceeded):
        product_graph("overheat", {}, SUITE["overheat:no-breach"], max_nodes=100)
    assert shallow_certificate("overheat", {}, SUITE["overheat:no-breach"], max_nodes=100).holds is None
    cell = Property("roll:cell", "general", "observation_predicate", {"cell": [0, 0], "op": "==", "value": 1})
    with pytest.raises(OracleUnsupported):
        RefLabel(cell)


def test_minimal_certificate_fixtures():
    def res(rewards_safe):
        return AnalysisResult("g:x", "p", [TraceRecord(i, 1, None if s else 1, r, s, "frame_cap") for i, (r, s) in enumerate(rewards_safe)])

    assert minimal_certificate(res([(5, False), (100, True)]), 0, 100).holds
    bad = minimal_certificate(res([(55, False), (5, False)]), 0, 100)
    assert not bad.holds and bad.violating_high_scorers == ((0, 55.0),)


def test_desiderata():
    f = EnvFactory("crossing")
    rnd, exp = RandomPolicy("crossing", 3, 0), make_scripted("crossing", "expert")
    rep = desiderata_audit(f, SUITE["crossing:no-collision"], rnd, exp)
    assert rep.passed
    impossible = Property("crossing:lives-4", "general", "observation_predicate", {"scalar": "lives", "op": "<", "value": 4})
    rep = desiderata_audit(f, impossible, rnd, exp)
    assert not rep.satisfiable and not rep.passed


def test_fuel_satisfiable_by_dying():
    f = EnvFactory("fuel", DEMO["fuel"])
    rep = desiderata_audit(f, SUITE["fuel:no-empty"], RandomPolicy("fuel", 4, 0), make_scripted("fuel", "expert"),
                           AnalysisConfig(), make_scripted("fuel", "kamikaze"))
    assert rep.passed and rep.satisfiable_by_dying


def test_prefix_audit_clean_on_demo_envs():
    for pid, prop in SUITE.items():
        assert prefix_audit(prop.game, DEMO[prop.game], prop).clean, pid
    dirty = prefix_audit("crossing", {"start_row": 1}, SUITE["crossing:no-collision"])
    assert not dirty.clean
