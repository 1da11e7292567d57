from __future__ import annotations

from typing import Any, Mapping

from prescience.core import Env, InvalidParams
from prescience.envs.crossing import Crossing
from prescience.envs.fuel import Fuel
from prescience.envs.overheat import Overheat
from prescience.envs.roll import Roll
from prescience.envs.stress import Stress

ENV_KINDS: dict[str, type[Env]] = {
    "crossing": Crossing,
    "overheat": Overheat,
    "roll": Roll,
    "fuel": Fuel,
    "stress": Stress,
}


def make_env(kind: str, params: Mapping[str, Any] | None = None) -> Env:
    try:
        cls = ENV_KINDS[kind]
    except KeyError:
        raise InvalidParams(f"unknown env kind {kind!r}") from None
    try:
        return cls(**dict(params or {}))
    except TypeError as exc:
        raise InvalidParams(f"{kind}: {exc}") from None


def make_crossing(params: Mapping[str, Any] | None = None) -> Crossing:
    return make_env("crossing", params)


def make_overheat(params: Mapping[str, Any] | None = None) -> Overheat:
    return make_env("overheat", params)


def make_roll(params: Mapping[str, Any] | None = None) -> Roll:
    return make_env("roll", params)


def make_fuel(params: Mapping[str, Any] | None = None) -> Fuel:
    return make_env("fuel", params)


class EnvFactory:
    """Picklable zero-argument constructor for one env configuration."""

    def __init__(self, kind: str, params: Mapping[str, Any] | None = None):
        self.kind = kind
        self.params = dict(params or {})
        make_env(kind, self.params)  # validate eagerly

    def __call__(self) -> Env:
        return make_env(self.kind, self.params)

    def __repr__(self) -> str:
        return f"EnvFactory({self.kind!r}, {self.params!r})"


__all__ = [
    "Crossing", "Env", "EnvFactory", "ENV_KINDS", "Fuel", "Overheat", "Roll", "Stress",
    "make_crossing", "make_env", "make_fuel", "make_overheat", "make_roll",
]
