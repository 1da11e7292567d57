"""Brute-force trace replay on the reference simulators.

Rebuilds every trace of an analysis from scratch, feeding the real policy
outcomes built from reference states.  Verdicts and first-violation frames
are compared against the verifier's.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

from prescience.core import NOOP, Observation, StepOutcome
from prescience.oracle.graph import ref_bounded_safe
from prescience.oracle.labels import RefLabel
from prescience.oracle.refsim import FORMATS, RefGame


@dataclass(frozen=True)
class RefTrace:
    index: int
    steps: int
    first_violation_step: int | None
    total_reward: int
    reason: str

    @property
    def safe(self) -> bool:
        return self.first_violation_step is None


def _outcome(game: RefGame, s: tuple, reward: int) -> StepOutcome:
    scalars, lives, term = game.view(s)
    return StepOutcome(Observation(scalars, state=s, env_kind=game.kind), reward, lives, term, game.digest(s))


def replay(game: RefGame, policy, props, nu: int = 30, frame_cap: int = 2000) -> list[list[RefTrace]]:
    """Per property, one RefTrace per initial index (no action perturbation)."""
    labels = [RefLabel(p) for p in props]
    out: list[list[RefTrace]] = [[] for _ in props]
    for i in range(nu):
        s = game.initial()
        accs = []
        for lab in labels:
            _, acc = lab.fold(lab.initial, 0, *game.view(s))
            accs.append(acc)
        for _ in range(i):
            s, r = game.step(s, NOOP)
            accs = [lab.fold(acc, r, *game.view(s))[1] for lab, acc in zip(labels, accs)]
        policy.begin_trace(i)
        first: list[int | None] = [None] * len(labels)
        o = _outcome(game, s, 0)
        frame = total = 0
        while frame < frame_cap and not s[-1]:
            a = policy.act(o).ranked[0]
            s, r = game.step(s, a)
            frame += 1
            total += r
            view = game.view(s)
            for k, lab in enumerate(labels):
                unsafe, accs[k] = lab.fold(accs[k], r, *view)
                if unsafe and first[k] is None:
                    first[k] = frame
            o = _outcome(game, s, r)
        reason = "terminal_state" if s[-1] else "frame_cap"
        for k in range(len(labels)):
            out[k].append(RefTrace(i, frame, first[k], total, reason))
    return out


def state_of(game: RefGame, payload: bytes) -> tuple:
    return struct.unpack(FORMATS[game.kind], payload)


def ref_acc(label: RefLabel, acc: int):
    """Translate a verifier accumulator into the reference encoding."""
    if label.kind == "life_count":
        return None if acc < 0 else acc
    if label.kind == "reward_threshold":
        return max(acc, label.threshold)
    return acc


def action_unsafe(game: RefGame, label: RefLabel, state: tuple, acc, action: int, bound: int) -> bool:
    """True when ``action`` cannot start a safe bounded path of ``bound`` frames."""
    t, r = game.step(state, action)
    unsafe, acc2 = label.fold(acc, r, *game.view(t))
    return unsafe or not ref_bounded_safe(game, label, t, acc2, bound - 1)
