"""Deterministic, snapshot-capable environment contract.

Every toy game subclasses :class:`Env`.  A game keeps its whole state in a
flat tuple of small integers (``self._state``); the base class packs that
tuple into an opaque versioned :class:`Snapshot` payload, so analysis code
never needs to know what the fields mean.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import xxhash

NOOP = 0


class SimError(Exception):
    """Base class for environment contract violations."""


class ActionOutOfRange(SimError):
    pass


class SteppedAfterTerminal(SimError):
    pass


class SnapshotMismatch(SimError):
    pass


class SnapshotVersion(SimError):
    pass


class InvalidParams(SimError, ValueError):
    pass


@dataclass(frozen=True)
class Snapshot:
    env_id: str
    version: int
    payload: bytes

    def to_bytes(self) -> bytes:
        """Stable wire format: u32 len + utf-8 env_id, u32 version, u32 len + payload (all LE)."""
        name = self.env_id.encode("utf-8")
        return b"".join(
            (
                struct.pack("<I", len(name)),
                name,
                struct.pack("<I", self.version),
                struct.pack("<I", len(self.payload)),
                self.payload,
            )
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "Snapshot":
        try:
            (n,) = struct.unpack_from("<I", data, 0)
            env_id = data[4 : 4 + n].decode("utf-8")
            off = 4 + n
            version, plen = struct.unpack_from("<II", data, off)
            off += 8
            payload = bytes(data[off : off + plen])
        except (struct.error, UnicodeDecodeError) as exc:
            raise SimError(f"malformed snapshot bytes: {exc}") from exc
        if len(payload) != plen or off + plen != len(data):
            raise SimError("malformed snapshot bytes: length mismatch")
        return cls(env_id, version, payload)


def digest_bytes(data: bytes) -> int:
    return xxhash.xxh64_intdigest(data)


def state_digest(snapshot: Snapshot) -> int:
    """64-bit digest of the payload bytes.  Collisions are possible in principle."""
    return xxhash.xxh64_intdigest(snapshot.payload)


Grid = tuple[tuple[int, ...], ...]


class Observation:
    """Cell-code grid plus named scalar channels.

    The grid is rendered lazily from the state tuple; most consumers only
    read scalars.
    """

    __slots__ = ("scalars", "env_kind", "_grid", "_render", "_state")

    def __init__(
        self,
        scalars: Mapping[str, int],
        render: Callable[[tuple], Grid] | None = None,
        state: tuple | None = None,
        grid: Grid | None = None,
        env_kind: str = "",
    ):
        self.scalars = dict(scalars)
        self.env_kind = env_kind
        self._grid = grid
        self._render = render
        self._state = state

    @property
    def grid(self) -> Grid:
        if self._grid is None:
            self._grid = self._render(self._state)
        return self._grid

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Observation):
            return NotImplemented
        return self.scalars == other.scalars and self.grid == other.grid

    def __repr__(self) -> str:
        return f"Observation(scalars={self.scalars!r})"


@dataclass(eq=False)
class StepOutcome:
    observation: Observation
    reward: int
    lives: int
    terminal: bool
    # digest of the post-transition snapshot payload; tabular agents key on it
    digest: int = 0

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StepOutcome):
            return NotImplemented
        return (
            self.reward == other.reward
            and self.lives == other.lives
            and self.terminal == other.terminal
            and self.digest == other.digest
            and self.observation == other.observation
        )


class Env:
    """Base class for deterministic toy games.

    Subclasses are dataclasses of their parameters; they set ``env_id``, ``action_names``, ``_fmt`` (struct format of
    the state tuple), and implement ``_initial_state``, ``_transition``,
    ``_scalars`` and ``_render``.  State tuples always end with the two
    flags ``(game_over, terminal)``.
    """

    env_id = "env"
    kind = "env"
    version = 1
    action_names = ("noop",)
    _fmt = "<BB"

    def __post_init__(self) -> None:
        self._validate()
        self._struct = struct.Struct(self._fmt)
        self.reset()

    # -- subclass hooks -------------------------------------------------
    def _validate(self) -> None:
        pass

    def _initial_state(self) -> tuple:
        raise NotImplementedError

    def _transition(self, state: tuple, action: int) -> tuple[tuple, int]:
        """Return (next_state, reward) for a non-terminal, non-game-over state."""
        raise NotImplementedError

    def _lives(self, state: tuple) -> int:
        return 1

    def _scalars(self, state: tuple) -> dict[str, int]:
        return {}

    def _render(self, state: tuple) -> Grid:
        return ((0,),)

    # -- contract ---------------------------------------------------------
    @property
    def n_actions(self) -> int:
        return len(self.action_names)

    @property
    def terminal(self) -> bool:
        return bool(self._state[-1])

    def reset(self) -> StepOutcome:
        self._state = self._initial_state()
        return self.peek()

    def step(self, action: int) -> StepOutcome:
        if not 0 <= action < len(self.action_names):
            raise ActionOutOfRange(f"{self.env_id}: action {action} not in [0, {self.n_actions})")
        state = self._state
        if state[-1]:
            raise SteppedAfterTerminal(f"{self.env_id}: step after terminal")
        if state[-2]:
            # game over is followed by the absorbing terminating state
            self._state = state[:-1] + (1,)
            return self._outcome(0)
        self._state, reward = self._transition(state, action)
        return self._outcome(reward)

    def peek(self) -> StepOutcome:
        """Outcome describing the current state with zero reward."""
        return self._outcome(0)

    def _outcome(self, reward: int) -> StepOutcome:
        state = self._state
        return StepOutcome(
            Observation(self._scalars(state), self._render, state, env_kind=self.kind),
            reward,
            self._lives(state),
            bool(state[-1]),
            xxhash.xxh64_intdigest(self._struct.pack(*state)),
        )

    def save(self) -> Snapshot:
        return Snapshot(self.env_id, self.version, self._struct.pack(*self._state))

    def restore(self, snapshot: Snapshot) -> None:
        if snapshot.env_id != self.env_id:
            raise SnapshotMismatch(f"snapshot for {snapshot.env_id!r} restored into {self.env_id!r}")
        if snapshot.version != self.version:
            raise SnapshotVersion(f"{self.env_id}: unsupported snapshot version {snapshot.version}")
        self._state = self._struct.unpack(snapshot.payload)

    def digest(self) -> int:
        return xxhash.xxh64_intdigest(self._struct.pack(*self._state))

    def observe(self) -> Observation:
        return Observation(self._scalars(self._state), self._render, self._state, env_kind=self.kind)


def check_action(env: Env, actions: Sequence[int]) -> None:
    for a in actions:
        if not 0 <= a < env.n_actions:
            raise ActionOutOfRange(f"{env.env_id}: action {a} not in [0, {env.n_actions})")
