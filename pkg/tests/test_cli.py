import json

import pytest

from prescience import cli
from prescience.agents import QTable
from prescience.config import ConfigError, demo_config_path, load_config, parse_config

SMALL = {
    "schema_version": 1,
    "seed": 0,
    "analysis": {"nu": 5, "frame_cap": 300},
    "envs": [{"kind": "roll", "policies": [{"kind": "random"}, {"kind": "scripted", "name": "expert"},
                                           {"kind": "greedy_q", "train": {"episodes": 50}}]}],
    "shield": {"bound_H": 2},
    "sweep": {"scenarios": [{"env": "roll", "policy": "random", "property": "roll:no-miss", "bounds": [1, 41]}],
              "stress_bounds": [1, 2, 3]},
    "oracle": {"window": 10},
}


def write(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data) if not isinstance(data, str) else data)
    return str(p)


def run(tmp_path, cmd, data, *extra):
    out = tmp_path / f"out-{cmd}-{len(list(tmp_path.iterdir()))}"
    code = cli.main([cmd, "--config", write(tmp_path, data), "--out", str(out), *extra])
    return code, out


def test_demo_config_parses():
    cfg = load_config(demo_config_path(), env={})
    assert [e.kind for e in cfg.envs] == ["crossing", "overheat", "roll", "fuel"]
    assert all([p.id for p in e.policies] == ["random", "scripted:expert", "greedy_q"] for e in cfg.envs)
    assert cfg.shield.bound_H == 3
    assert cfg.env("crossing").calibration["reward_delta"] == 148


@pytest.mark.parametrize("mutate,field", [
    (lambda d: d["envs"][0].update(kind="pong"), "envs[0].kind"),
    (lambda d: d.update(schema_version=9), "schema_version"),
    (lambda d: d["shield"].pop("bound_H"), "shield.bound_H"),
    (lambda d: d["analysis"].update(nu=0), "analysis.nu"),
    (lambda d: d["envs"][0]["policies"].append({"kind": "random"}), "envs[0].policies"),
    (lambda d: d["sweep"]["scenarios"][0].update(bounds=[3, 2]), "sweep.scenarios[0].bounds"),
    (lambda d: d["envs"][0].update(params={"bogus": 1}), "envs[0].params"),
])
def test_config_errors_exit_2(tmp_path, capsys, mutate, field):
    data = json.loads(json.dumps(SMALL))
    mutate(data)
    code, _ = run(tmp_path, "analyse", data)
    assert code == 2
    assert field in capsys.readouterr().err


def test_bad_json_names_line(tmp_path, capsys):
    code = cli.main(["analyse", "--config", write(tmp_path, '{\n"schema_version": 1,\n oops}')])
    assert code == 2
    assert "line 3" in capsys.readouterr().err


def test_shield_without_section_exits_2(tmp_path):
    data = dict(SMALL)
    data.pop("shield")
    assert run(tmp_path, "shield", data)[0] == 2


def test_runtime_failure_exits_1(tmp_path):
    (tmp_path / "bad.bin").write_bytes(b"garbage")
    data = json.loads(json.dumps(SMALL))
    data["envs"][0]["policies"][2] = {"kind": "greedy_q", "table": "bad.bin"}
    assert run(tmp_path, "analyse", data)[0] == 1


def test_analyse_outputs_and_determinism(tmp_path):
    c1, a = run(tmp_path, "analyse", SMALL)
    c2, b = run(tmp_path, "analyse", SMALL, "--jobs", "2")
    assert c1 == c2 == 0
    for name in ("analysis.csv", "aggregate.csv", "histogram.csv", "correlation.csv", "manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    rows = (a / "aggregate.csv").read_text().splitlines()
    assert len(rows) == 1 + 3 * 2
    m = json.loads((a / "manifest.json").read_text())
    assert m["nu"] == 5 and m["seed"] == 0 and not m["seed_override"]


def test_seed_override_is_recorded(tmp_path, monkeypatch):
    monkeypatch.setenv("PRESCIENCE_SEED", "11")
    code, out = run(tmp_path, "analyse", SMALL)
    assert code == 0
    m = json.loads((out / "manifest.json").read_text())
    assert m["seed"] == 11 and m["config_seed"] == 0 and m["policy_seeds"]["roll/random"] == 11


def test_shield_sweep_train_oracle(tmp_path):
    code, out = run(tmp_path, "shield", SMALL)
    assert code == 0
    summary = (out / "shield_summary.csv").read_text().splitlines()
    assert len(summary) == 1 + 3 * 2  # every policy is shielded when shield.policies is absent
    code, out = run(tmp_path, "sweep", SMALL)
    assert code == 0
    text = (out / "cost_by_bound.csv").read_text()
    assert "roll:no-miss/random,41" in text and "stress,3,39,39" in text
    code, out = run(tmp_path, "train", SMALL)
    assert code == 0
    assert QTable.load(out / "qtable_roll.bin").n_actions == 4
    code, out = run(tmp_path, "oracle", SMALL)
    assert code == 0
    assert "roll:no-miss,minimal,ok,378,1,41" in (out / "oracle.csv").read_text()


def test_train_zero_episodes(tmp_path):
    data = json.loads(json.dumps(SMALL))
    data["envs"][0]["policies"][2]["train"]["episodes"] = 0
    code, out = run(tmp_path, "train", data)
    assert code == 0
    t = QTable.load(out / "qtable_roll.bin")
    assert t.entries == {} and t.env_id == "roll"


def test_oracle_budget_exit_3(tmp_path):
    data = json.loads(json.dumps(SMALL))
    data["oracle"]["max_nodes"] = 10
    code, out = run(tmp_path, "oracle", data)
    assert code == 3
    assert ",unknown," in (out / "oracle.csv").read_text()


def test_parse_config_accepts_single_env():
    cfg = parse_config({"schema_version": 1, "env": {"kind": "fuel"}}, env={})
    assert cfg.envs[0].kind == "fuel" and [p.id for p in cfg.envs[0].policies] == ["random", "scripted:expert"]
    with pytest.raises(ConfigError):
        parse_config({"schema_version": 1}, env={})
