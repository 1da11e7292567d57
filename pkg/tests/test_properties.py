import json

import pytest

from prescience.core import Observation, StepOutcome
from prescience.properties import (
    DuplicateId,
    ParseError,
    Property,
    UnknownLabellerKind,
    Verdict,
    default_suite_path,
    init_labeller,
    label,
    load_property_suite,
    parse_property_suite,
)


def out(reward=0, lives=3, terminal=False, **scalars):
    return StepOutcome(Observation(scalars, grid=((0,),)), reward, lives, terminal)


def test_default_suite_golden():
    reg = load_property_suite(default_suite_path())
    assert [(p.id, p.cls, p.labeller_kind) for p in reg.values()] == [
        ("crossing:no-collision", "shallow", "life_count"),
        ("crossing:no-game-over", "minimal", "observation_predicate"),
        ("fuel:low-reserve", "general", "observation_predicate"),
        ("fuel:no-empty", "minimal", "observation_predicate"),
        ("overheat:no-breach", "minimal", "reward_threshold"),
        ("overheat:no-death", "shallow", "life_count"),
        ("overheat:no-overheat", "shallow", "observation_predicate"),
        ("roll:no-gutter-line", "general", "observation_predicate"),
        ("roll:no-miss", "minimal", "observation_predicate"),
    ]
    raw = json.loads(default_suite_path().read_text())
    assert parse_property_suite([p.to_dict() for p in reg.values()]) == reg
    assert len(raw) == len(reg)


def test_life_count_fold():
    p = Property("g:x", "shallow", "life_count")
    s = init_labeller(p)
    v, s = label(s, out(lives=3))
    assert v is Verdict.SAFE
    v, s = label(s, out(lives=2))
    assert v is Verdict.UNSAFE
    v, s = label(s, out(lives=2))
    assert v is Verdict.SAFE
    v, _ = label(s, out(lives=0, terminal=True))
    assert v is Verdict.SAFE


def test_reward_threshold_accumulates_negative_reward_only():
    p = Property("g:x", "minimal", "reward_threshold", {"threshold": -2})
    s = init_labeller(p)
    verdicts = []
    for r in (-1, 5, -1, 0):
        v, s = label(s, out(reward=r))
        verdicts.append(v)
    assert verdicts == [Verdict.SAFE, Verdict.SAFE, Verdict.UNSAFE, Verdict.UNSAFE]


def test_predicate_hold_and_conjunction():
    p = Property("g:x", "general", "observation_predicate",
                 {"all": [{"scalar": "a", "op": ">=", "value": 1}, {"scalar": "b", "op": "in", "value": [0, 2]}], "hold": 2})
    s = init_labeller(p)
    seq = [dict(a=1, b=0), dict(a=1, b=2), dict(a=0, b=0), dict(a=2, b=2), dict(a=2, b=1)]
    got = []
    for sc in seq:
        v, s = label(s, out(**sc))
        got.append(v is Verdict.UNSAFE)
    assert got == [False, True, False, False, False]


def test_cell_predicate():
    p = Property("g:x", "general", "observation_predicate", {"cell": [0, 0], "op": "==", "value": 0})
    v, _ = label(init_labeller(p), out())
    assert v is Verdict.UNSAFE


@pytest.mark.parametrize("entry,err", [
    ({"id": "nogame", "class": "shallow", "labeller": {"kind": "life_count"}}, ParseError),
    ({"id": "g:x", "class": "deep", "labeller": {"kind": "life_count"}}, ParseError),
    ({"id": "g:x", "class": "shallow", "labeller": {"kind": "telepathy"}}, UnknownLabellerKind),
    ({"id": "g:x", "class": "shallow", "labeller": {"kind": "reward_threshold"}}, ParseError),
    ({"id": "g:x", "class": "shallow", "labeller": {"kind": "reward_threshold", "threshold": 3}}, ParseError),
    ({"id": "g:x", "class": "shallow", "labeller": {"kind": "observation_predicate", "op": "~", "scalar": "a"}}, ParseError),
    ({"id": "g:x", "class": "shallow"}, ParseError),
])
def test_parse_errors(entry, err):
    with pytest.raises(err):
        parse_property_suite([entry])


def test_duplicate_ids_and_empty_file(tmp_path):
    e = {"id": "g:x", "class": "shallow", "labeller": {"kind": "life_count"}}
    with pytest.raises(DuplicateId):
        parse_property_suite([e, e])
    f = tmp_path / "empty.json"
    f.write_text("")
    assert len(load_property_suite(f)) == 0
    f.write_text("[\n{bad")
    with pytest.raises(ParseError, match="line 2"):
        load_property_suite(f)
