from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from prescience.core import StepOutcome
from prescience.nondet import RngStream


class WrongEnvKind(Exception):
    pass


class MissingExpert(Exception):
    pass


@dataclass(frozen=True)
class PreferenceOrder:
    """Strict total ranking of every action, most preferred first."""

    ranked: tuple[int, ...]
    scores: tuple[float, ...]

    @property
    def top(self) -> int:
        return self.ranked[0]

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "PreferenceOrder":
        """Rank by value, ties to the lowest action id.

        Tied values are nudged down to the next representable float so the
        emitted scores stay strictly decreasing.
        """
        ranked = tuple(sorted(range(len(values)), key=lambda a: (-values[a], a)))
        scores: list[float] = []
        for a in ranked:
            v = float(values[a])
            if scores and v >= scores[-1]:
                v = math.nextafter(scores[-1], -math.inf)
            scores.append(v)
        return cls(ranked, tuple(scores))


class Policy:
    kind = ""
    env_kind = ""
    n_actions = 0

    def begin_trace(self, index: int) -> None:
        """Called once before each trace; ``index`` is the initial-state index."""

    def act(self, outcome: StepOutcome) -> PreferenceOrder:
        raise NotImplementedError

    def _check(self, outcome: StepOutcome) -> None:
        kind = outcome.observation.env_kind
        if kind and kind != self.env_kind:
            raise WrongEnvKind(f"{self.kind} policy for {self.env_kind!r} got an outcome from {kind!r}")


def nth_permutation(n: int, k: int) -> tuple[int, ...]:
    items = list(range(n))
    out = []
    for i in range(n, 0, -1):
        f = math.factorial(i - 1)
        j, k = divmod(k, f)
        out.append(items.pop(j))
    return tuple(out)


class RandomPolicy(Policy):
    """Uniformly shuffled preferences from a counter-based stream.

    Each trace gets its own child stream keyed by the initial-state index,
    so traces are reproducible in any evaluation order.
    """

    kind = "random"

    def __init__(self, env_kind: str, n_actions: int, seed: int = 0):
        self.env_kind = env_kind
        self.n_actions = n_actions
        self.seed = seed
        self._nperm = math.factorial(n_actions)
        self.begin_trace(0)

    def begin_trace(self, index: int) -> None:
        self._rng = RngStream(self.seed).split(index)

    def act(self, outcome: StepOutcome) -> PreferenceOrder:
        self._check(outcome)
        k = self._rng.below(self._nperm)
        self._rng = self._rng.advance()
        ranked = nth_permutation(self.n_actions, k)
        return PreferenceOrder(ranked, tuple(float(self.n_actions - i) for i in range(self.n_actions)))


class GreedyQPolicy(Policy):
    kind = "greedy_q"

    def __init__(self, env_kind: str, table):
        self.env_kind = env_kind
        self.table = table
        self.n_actions = table.n_actions

    def act(self, outcome: StepOutcome) -> PreferenceOrder:
        self._check(outcome)
        return PreferenceOrder.from_values(self.table.values(outcome.digest))
