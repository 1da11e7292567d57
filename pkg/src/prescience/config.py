"""Experiment configuration: JSON with a ``schema_version`` field.

Layout::

    {
      "schema_version": 1,
      "seed": 0,
      "properties": "default" | "<suite path>" | [ ...inline properties... ],
      "analysis": {"nu": 30, "frame_cap": 2000, "branch": {"mode": "none"}},
      "envs": [
        {"kind": "crossing", "params": {...},
         "policies": [{"kind": "random"}, {"kind": "scripted", "name": "expert"},
                      {"kind": "greedy_q", "train": {"episodes": 15000}}],
         "calibration": {"reward_delta": ...}}
      ],
      "shield": {"bound_H": 3, "policies": ["greedy_q"]},
      "sweep": {"scenarios": [...], "stress_bounds": [1, 2, ...]},
      "oracle": {"window": 10, "max_nodes": 2000000},
      "output_dir": "out"
    }

A single ``"env": {...}`` object is accepted in place of ``"envs"``.
Policy and training seeds default to the top-level seed.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from prescience.agents import EpsilonSchedule
from prescience.core import InvalidParams
from prescience.envs import ENV_KINDS, EnvFactory
from prescience.nondet import BranchSpec
from prescience.properties import PropertyError, Registry, default_suite_path, load_property_suite, parse_property_suite
from prescience.shield import ShieldConfig
from prescience.verifier import AnalysisConfig

SCHEMA_VERSION = 1
SEED_ENV = "PRESCIENCE_SEED"


class ConfigError(Exception):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class TrainSpec:
    episodes: int = 5000
    seed: int = 0
    gamma: float = 0.95
    alpha: float = 0.2
    max_steps: int = 300
    noop_starts: int = 30
    epsilon: EpsilonSchedule = EpsilonSchedule()

    def to_dict(self) -> dict:
        return {
            "episodes": self.episodes, "seed": self.seed, "gamma": self.gamma, "alpha": self.alpha,
            "max_steps": self.max_steps, "noop_starts": self.noop_starts,
            "epsilon": {"start": self.epsilon.start, "end": self.epsilon.end, "fraction": self.epsilon.fraction},
        }


@dataclass(frozen=True)
class PolicySpec:
    kind: str  # random | scripted | greedy_q
    name: str = ""
    seed: int = 0
    train: TrainSpec | None = None
    table: str | None = None

    @property
    def id(self) -> str:
        if self.kind == "scripted":
            return f"scripted:{self.name}"
        return self.kind


@dataclass(frozen=True)
class EnvSpec:
    kind: str
    params: dict
    policies: tuple[PolicySpec, ...]
    calibration: dict = field(default_factory=dict)

    @property
    def factory(self) -> EnvFactory:
        return EnvFactory(self.kind, self.params)


@dataclass(frozen=True)
class SweepScenario:
    env: str
    policy: str
    property: str
    bounds: tuple[int, ...]
    memo_enabled: bool = True


@dataclass
class ExperimentConfig:
    seed: int
    config_seed: int
    envs: list[EnvSpec]
    properties: Registry
    analysis: AnalysisConfig
    shield: ShieldConfig | None
    shield_policies: tuple[str, ...] | None
    sweep: list[SweepScenario]
    stress_bounds: tuple[int, ...]
    oracle: dict
    output_dir: Path
    raw: dict
    digest: str

    def env(self, kind: str) -> EnvSpec:
        for e in self.envs:
            if e.kind == kind:
                return e
        raise KeyError(kind)

    def manifest(self) -> dict:
        from prescience import __version__

        seeds = {}
        for e in self.envs:
            for p in e.policies:
                if p.kind == "random":
                    seeds[f"{e.kind}/{p.id}"] = p.seed
                if p.train is not None:
                    seeds[f"{e.kind}/{p.id}/train"] = p.train.seed
        return {
            "tool": "prescience",
            "version": __version__,
            "schema_version": SCHEMA_VERSION,
            "config_sha256": self.digest,
            "config_seed": self.config_seed,
            "seed": self.seed,
            "seed_override": self.seed != self.config_seed,
            "policy_seeds": seeds,
            "branch": self.analysis.branch.to_dict(),
            "nu": self.analysis.nu,
            "frame_cap": self.analysis.frame_cap,
        }


def _need(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"{where}.{key}" if where else key, "missing required field")
    return d[key]


def _int(v, where: str, lo: int | None = None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(where, f"expected an integer, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(where, f"must be >= {lo}")
    return v


def _train(d: dict | None, seed: int, where: str) -> TrainSpec:
    d = dict(d or {})
    known = {"episodes", "seed", "gamma", "alpha", "max_steps", "noop_starts", "epsilon"}
    extra = set(d) - known
    if extra:
        raise ConfigError(where, f"unknown fields {sorted(extra)}")
    eps = d.get("epsilon") or {}
    try:
        schedule = EpsilonSchedule(float(eps.get("start", 1.0)), float(eps.get("end", 0.05)), float(eps.get("fraction", 0.5)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}.epsilon", str(exc)) from None
    return TrainSpec(
        episodes=_int(d.get("episodes", 5000), f"{where}.episodes", 0),
        seed=_int(d.get("seed", seed), f"{where}.seed"),
        gamma=float(d.get("gamma", 0.95)),
        alpha=float(d.get("alpha", 0.2)),
        max_steps=_int(d.get("max_steps", 300), f"{where}.max_steps", 1),
        noop_starts=_int(d.get("noop_starts", 30), f"{where}.noop_starts", 0),
        epsilon=schedule,
    )


def _policy(d: Any, seed: int, where: str, base: Path) -> PolicySpec:
    if not isinstance(d, dict):
        raise ConfigError(where, "expected an object")
    kind = _need(d, "kind", where)
    if kind == "random":
        return PolicySpec("random", seed=_int(d.get("seed", seed), f"{where}.seed"))
    if kind == "scripted":
        return PolicySpec("scripted", name=str(d.get("name", "expert")))
    if kind == "greedy_q":
        table = d.get("table")
        if table is not None:
            path = (base / table) if not Path(table).is_absolute() else Path(table)
            if not path.exists():
                raise ConfigError(f"{where}.table", f"file not found: {path}")
            table = str(path)
        return PolicySpec("greedy_q", train=_train(d.get("train"), seed, f"{where}.train"), table=table)
    raise ConfigError(f"{where}.kind", f"unknown policy kind {kind!r}")


def _properties(v, base: Path) -> Registry:
    try:
        if v is None or v == "default":
            return load_property_suite(default_suite_path())
        if isinstance(v, str):
            path = base / v if not Path(v).is_absolute() else Path(v)
            if not path.exists():
                raise ConfigError("properties", f"file not found: {path}")
            return load_property_suite(path)
        return parse_property_suite(v)
    except PropertyError as exc:
        raise ConfigError("properties", str(exc)) from None


def parse_config(data: Any, base: Path = Path("."), env: dict | None = None) -> ExperimentConfig:
    env = os.environ if env is None else env
    if not isinstance(data, dict):
        raise ConfigError("<root>", "expected a JSON object")
    version = _need(data, "schema_version", "")
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported version {version!r} (expected {SCHEMA_VERSION})")
    config_seed = _int(data.get("seed", 0), "seed")
    seed = config_seed
    if env.get(SEED_ENV):
        try:
            seed = int(env[SEED_ENV], 0)
        except ValueError:
            raise ConfigError(SEED_ENV, f"not an integer: {env[SEED_ENV]!r}") from None
    if "envs" in data:
        env_list = data["envs"]
        key = "envs"
    else:
        env_list = [_need(data, "env", "")]
        key = "env"
    if not isinstance(env_list, list) or not env_list:
        raise ConfigError(key, "expected a non-empty list of env objects")
    envs = []
    for i, e in enumerate(env_list):
        where = f"{key}[{i}]" if key == "envs" else key
        if not isinstance(e, dict):
            raise ConfigError(where, "expected an object")
        kind = _need(e, "kind", where)
        if kind not in ENV_KINDS:
            raise ConfigError(f"{where}.kind", f"unknown env kind {kind!r}")
        params = e.get("params") or {}
        try:
            EnvFactory(kind, params)
        except InvalidParams as exc:
            raise ConfigError(f"{where}.params", str(exc)) from None
        pols = e.get("policies", [{"kind": "random"}, {"kind": "scripted", "name": "expert"}])
        if not isinstance(pols, list):
            raise ConfigError(f"{where}.policies", "expected a list")
        policies = tuple(_policy(p, seed, f"{where}.policies[{j}]", base) for j, p in enumerate(pols))
        ids = [p.id for p in policies]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"{where}.policies", f"duplicate policy ids {ids}")
        envs.append(EnvSpec(kind, dict(params), policies, dict(e.get("calibration") or {})))
    props = _properties(data.get("properties", "default"), base)
    a = data.get("analysis") or {}
    try:
        branch = BranchSpec.from_dict(a.get("branch"))
        analysis = AnalysisConfig(
            nu=_int(a.get("nu", 30), "analysis.nu", 1),
            frame_cap=_int(a.get("frame_cap", 2000), "analysis.frame_cap", 1),
            branch=branch,
            prefix_audit=bool(a.get("prefix_audit", True)),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("analysis", str(exc)) from None
    shield = None
    shield_policies = None
    s = data.get("shield")
    if s is not None:
        if not isinstance(s, dict) or "bound_H" not in s:
            raise ConfigError("shield.bound_H", "missing required field")
        try:
            shield = ShieldConfig(
                _int(s["bound_H"], "shield.bound_H", 1),
                None if s.get("node_budget") is None else _int(s["node_budget"], "shield.node_budget", 1),
                bool(s.get("memo_enabled", True)),
                bool(s.get("robust", False)),
            )
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError("shield", str(exc)) from None
        if s.get("policies") is not None:
            shield_policies = tuple(s["policies"])
    sweep = []
    sw = data.get("sweep") or {}
    for i, sc in enumerate(sw.get("scenarios", [])):
        where = f"sweep.scenarios[{i}]"
        bounds = tuple(_int(b, f"{where}.bounds", 1) for b in _need(sc, "bounds", where))
        if not bounds or any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])):
            raise ConfigError(f"{where}.bounds", "must be a non-empty strictly increasing list")
        pid = _need(sc, "property", where)
        if pid not in props:
            raise ConfigError(f"{where}.property", f"unknown property {pid!r}")
        sweep.append(SweepScenario(_need(sc, "env", where), _need(sc, "policy", where), pid, bounds, bool(sc.get("memo_enabled", True))))
    stress = tuple(_int(b, "sweep.stress_bounds", 1) for b in sw.get("stress_bounds", []))
    if any(b2 <= b1 for b1, b2 in zip(stress, stress[1:])):
        raise ConfigError("sweep.stress_bounds", "must be strictly increasing")
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":")).encode()
    return ExperimentConfig(
        seed=seed,
        config_seed=config_seed,
        envs=envs,
        properties=props,
        analysis=analysis,
        shield=shield,
        shield_policies=shield_policies,
        sweep=sweep,
        stress_bounds=stress,
        oracle=dict(data.get("oracle") or {}),
        output_dir=Path(data.get("output_dir", "out")),
        raw=data,
        digest=hashlib.sha256(canonical).hexdigest(),
    )


def load_config(path: str | Path, env: dict | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}", f"invalid JSON: {exc.msg}") from None
    return parse_config(data, path.parent, env)


def demo_config_path() -> Path:
    return Path(__file__).parent / "data" / "demo_config.json"
