"""Initial-state enumeration and seeded action perturbation.

Every random decision is a pure function of ``(seed, counter)``, and a
trace consumes exactly one counter tick per agent decision whatever the
mode.  A shield looking ``k`` decisions ahead therefore knows exactly which
draws reality will use.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from prescience.core import NOOP, Env, SimError, Snapshot, check_action

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

MODES = ("none", "sticky", "frameskip", "human_start")


class TerminalDuringPrefix(SimError):
    pass


def mix64(x: int) -> int:
    """splitmix64 finaliser."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


@dataclass(frozen=True)
class RngStream:
    seed: int
    counter: int = 0

    def __post_init__(self):
        object.__setattr__(self, "seed", self.seed & MASK64)
        object.__setattr__(self, "counter", self.counter & MASK64)

    def draw(self, counter: int | None = None) -> int:
        c = self.counter if counter is None else counter
        return mix64(mix64(self.seed ^ GOLDEN) + (c + 1) * GOLDEN)

    def uniform(self, counter: int | None = None) -> float:
        return (self.draw(counter) >> 11) * (1.0 / (1 << 53))

    def below(self, n: int, counter: int | None = None) -> int:
        return (self.draw(counter) * n) >> 64

    def advance(self, ticks: int = 1) -> "RngStream":
        return RngStream(self.seed, self.counter + ticks)

    def at(self, counter: int) -> "RngStream":
        return RngStream(self.seed, counter)

    def split(self, key: int) -> "RngStream":
        """Independent child stream, e.g. one per initial state."""
        return RngStream(mix64(self.seed + mix64(key + 1) * GOLDEN), 0)


@dataclass(frozen=True)
class BranchSpec:
    mode: str = "none"
    p: float = 0.25
    support: tuple[int, ...] = (3, 4, 5)
    prefix: tuple[int, ...] = ()
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(self.support))
        object.__setattr__(self, "prefix", tuple(self.prefix))
        if self.mode not in MODES:
            raise ValueError(f"unknown branch mode {self.mode!r}")
        if self.mode == "sticky" and not 0.0 <= self.p <= 1.0:
            raise ValueError("sticky probability must lie in [0, 1]")
        if self.mode == "frameskip":
            if not self.support or any(r < 1 for r in self.support):
                raise ValueError("frameskip support must be non-empty positive repeat counts")
            if len(set(self.support)) != len(self.support):
                raise ValueError("frameskip support entries must be distinct")
        if self.mode == "human_start" and not self.prefix:
            raise ValueError("human_start needs a non-empty action prefix")

    @property
    def finite_support(self) -> bool:
        return self.mode != "sticky"

    def outcomes(self, proposed: int, previous: int) -> list[tuple[int, int]]:
        """All (effective, repeats) pairs with non-zero probability."""
        if self.mode == "frameskip":
            return [(proposed, r) for r in self.support]
        if self.mode == "sticky":
            raise ValueError("sticky actions have unbounded repeat support")
        return [(proposed, 1)]

    def context(self, counter: int, previous: int) -> tuple:
        """The part of the wrapper state that influences future transitions."""
        if self.mode == "sticky":
            return (counter, previous)
        if self.mode == "frameskip":
            return (counter,)
        return ()

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"mode": self.mode, "seed": self.seed}
        if self.mode == "sticky":
            d["p"] = self.p
        elif self.mode == "frameskip":
            d["support"] = list(self.support)
        elif self.mode == "human_start":
            d["prefix"] = list(self.prefix)
        return d

    @classmethod
    def from_dict(cls, data: Mapping[str, Any] | None) -> "BranchSpec":
        if not data:
            return cls()
        known = {"mode", "p", "support", "prefix", "seed"}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown branch fields: {sorted(extra)}")
        return cls(
            mode=data.get("mode", "none"),
            p=float(data.get("p", 0.25)),
            support=tuple(data.get("support", (3, 4, 5))),
            prefix=tuple(data.get("prefix", ())),
            seed=int(data.get("seed", 0)),
        )


def transform_action(spec: BranchSpec, rng: RngStream, proposed: int, previous: int) -> tuple[int, int]:
    """Map the agent's action to (effective action, frames to hold it).

    Uses the single draw at ``rng.counter``; the caller advances the stream.
    """
    if spec.mode == "sticky":
        if rng.uniform() < spec.p:
            return previous, 1
        return proposed, 1
    if spec.mode == "frameskip":
        return proposed, spec.support[rng.below(len(spec.support))]
    return proposed, 1


@dataclass(frozen=True)
class InitSet:
    nu: int
    snapshots: tuple[Snapshot, ...]
    prefix: tuple[int, ...] = field(default=())

    def actions(self, i: int) -> tuple[int, ...]:
        """Action sequence from the reset state to ``snapshots[i]``."""
        return self.prefix + (NOOP,) * i


def _replay(env: Env, actions: Sequence[int], what: str):
    outcomes = []
    for k, a in enumerate(actions):
        if env.terminal:
            raise TerminalDuringPrefix(f"{env.env_id}: episode ended after {k} {what} actions")
        outcomes.append(env.step(a))
    return outcomes


def enumerate_initials(env: Env, nu: int, prefix: Sequence[int] = ()) -> InitSet:
    """Snapshots after 0..nu-1 no-ops (after an optional fixed prefix)."""
    if nu < 1:
        raise ValueError("nu must be >= 1")
    check_action(env, prefix)
    s0 = env.save()
    try:
        _replay(env, prefix, "prefix")
        snaps = [env.save()]
        for i in range(1, nu):
            if env.terminal:
                raise TerminalDuringPrefix(f"{env.env_id}: episode ended after {i - 1} no-ops (nu={nu})")
            env.step(NOOP)
            snaps.append(env.save())
    finally:
        env.restore(s0)
    return InitSet(nu, tuple(snaps), tuple(prefix))


@dataclass(frozen=True)
class HumanStart:
    snapshot: Snapshot
    total_reward: int
    lives_lost: int
    frames: int


def human_start(env: Env, prefix: Sequence[int]) -> HumanStart:
    """Replay a memorised action prefix; the env is returned to its entry state."""
    if not prefix:
        raise ValueError("human_start needs a non-empty prefix")
    check_action(env, prefix)
    s0 = env.save()
    lives0 = env.peek().lives
    try:
        outcomes = _replay(env, prefix, "prefix")
        snap = env.save()
    finally:
        env.restore(s0)
    lost, prev = 0, lives0
    for o in outcomes:
        if o.lives < prev:
            lost += prev - o.lives
        prev = o.lives
    return HumanStart(snap, sum(o.reward for o in outcomes), lost, len(outcomes))
