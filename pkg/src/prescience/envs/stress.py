"""Three-action countdown used to stress the shield's search.

Actions have no effect.  An alarm sounds when the countdown reaches zero and
the countdown restarts at ``period``.  Started with ``countdown = H``, every
bounded path of length ``H`` ends on an alarm and every shorter prefix is
quiet, so a bound-``H`` search has to expand the full ``3^1 + ... + 3^H``
tree.
"""
from __future__ import annotations

from dataclasses import dataclass

from prescience.core import Env, InvalidParams


@dataclass
class Stress(Env):
    countdown: int = 5
    period: int = 1000

    env_id = "stress"
    kind = "stress"
    action_names = ("noop", "a", "b")
    _fmt = "<HBBB"  # remaining, alarm, game_over, terminal

    def _validate(self) -> None:
        if not (1 <= self.countdown <= 65535 and 1 <= self.period <= 65535):
            raise InvalidParams("stress: countdown and period must be in [1, 65535]")

    def _initial_state(self):
        return (self.countdown, 0, 0, 0)

    def _transition(self, state, action):
        remaining = state[0] - 1
        if remaining == 0:
            return (self.period, 1, 0, 0), 0
        return (remaining, 0, 0, 0), 0

    def _scalars(self, state):
        return {"remaining": state[0], "alarm": state[1]}

    def _render(self, state):
        return ((state[1],),)
