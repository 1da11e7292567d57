"""Tabular Q-learning on exact state digests.

Update rule, per transition ``(s, a, r, s')``::

    target   = r + gamma * max_a' Q(s', a')
    Q(s, a) <- (1 - alpha) * Q(s, a) + alpha * target
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

from prescience.core import NOOP
from prescience.nondet import RngStream

MAGIC = b"PQT1"


@dataclass
class QTable:
    n_actions: int
    gamma: float = 0.95
    alpha: float = 0.2
    env_id: str = ""
    seed: int = 0
    entries: dict[int, list[float]] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")

    def values(self, digest: int) -> list[float]:
        row = self.entries.get(digest)
        return list(row) if row is not None else [0.0] * self.n_actions

    def get(self, digest: int, action: int) -> float:
        row = self.entries.get(digest)
        return 0.0 if row is None else row[action]

    def __len__(self) -> int:
        return sum(len(r) for r in self.entries.values())

    def triples(self) -> list[tuple[int, int, float]]:
        return sorted((d, a, v) for d, row in self.entries.items() for a, v in enumerate(row))

    def to_bytes(self) -> bytes:
        """Header (magic, env_id, n_actions, gamma, alpha, seed, count) then sorted (u64, u16, f64) triples."""
        name = self.env_id.encode("utf-8")
        triples = self.triples()
        parts = [
            MAGIC,
            struct.pack("<I", len(name)),
            name,
            struct.pack("<HddQI", self.n_actions, self.gamma, self.alpha, self.seed & (2**64 - 1), len(triples)),
        ]
        parts.extend(struct.pack("<QHd", d, a, v) for d, a, v in triples)
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "QTable":
        if data[:4] != MAGIC:
            raise ValueError("not a Q-table file")
        (n,) = struct.unpack_from("<I", data, 4)
        off = 8 + n
        env_id = data[8:off].decode("utf-8")
        n_actions, gamma, alpha, seed, count = struct.unpack_from("<HddQI", data, off)
        off += struct.calcsize("<HddQI")
        table = cls(n_actions, gamma, alpha, env_id, seed)
        rec = struct.Struct("<QHd")
        for i in range(count):
            d, a, v = rec.unpack_from(data, off + i * rec.size)
            table.entries.setdefault(d, [0.0] * n_actions)[a] = v
        if off + count * rec.size != len(data):
            raise ValueError("Q-table file has trailing or missing bytes")
        return table

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> "QTable":
        return cls.from_bytes(Path(path).read_bytes())


def q_update(table: QTable, s: int, a: int, r: float, s_next: int) -> QTable:
    """Apply one update in place and return the table."""
    nxt = table.entries.get(s_next)
    target = r + table.gamma * (max(nxt) if nxt is not None else 0.0)
    row = table.entries.get(s)
    if row is None:
        if table.alpha == 0.0:
            return table
        row = table.entries[s] = [0.0] * table.n_actions
    row[a] = (1.0 - table.alpha) * row[a] + table.alpha * target
    return table


@dataclass(frozen=True)
class EpsilonSchedule:
    """Linear decay from ``start`` to ``end`` over the first ``fraction`` of episodes."""

    start: float = 1.0
    end: float = 0.05
    fraction: float = 0.5

    def __call__(self, episode: int, episodes: int) -> float:
        span = self.fraction * episodes
        if span <= 0 or episode >= span:
            return self.end
        return self.start + (self.end - self.start) * episode / span


def greedy(values: list[float]) -> int:
    best = 0
    for a in range(1, len(values)):
        if values[a] > values[best]:
            best = a
    return best


def train_q(
    env_factory,
    episodes: int,
    epsilon_schedule: EpsilonSchedule = EpsilonSchedule(),
    seed: int = 0,
    gamma: float = 0.95,
    alpha: float = 0.2,
    max_steps: int = 300,
    noop_starts: int = 30,
) -> QTable:
    """Epsilon-greedy training; every random choice comes from ``seed``.

    Each episode starts after a seeded number of no-ops in ``[0, noop_starts)``
    so the table covers the evaluation start states.
    """
    env = env_factory()
    table = QTable(env.n_actions, gamma, alpha, env.env_id, seed)
    rng = RngStream(seed)
    n = env.n_actions
    s0 = env.save()
    for ep in range(episodes):
        env.restore(s0)
        eps = epsilon_schedule(ep, episodes)
        erng = rng.split(ep)
        c = 0
        for _ in range(erng.below(noop_starts) if noop_starts > 1 else 0):
            if env.terminal:
                break
            env.step(NOOP)
        c += 1
        if env.terminal:
            continue
        s = env.peek().digest
        for _ in range(max_steps):
            if erng.uniform(c) < eps:
                a = erng.below(n, c + 1)
            else:
                a = greedy(table.values(s))
            c += 2
            out = env.step(a)
            q_update(table, s, a, out.reward, out.digest)
            s = out.digest
            if out.terminal:
                break
    return table
