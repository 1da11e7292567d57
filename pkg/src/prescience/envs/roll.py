"""Single-ball bowling: aim, release, and learn the result much later.

Phases:

* setup: ``setup_frames`` frames while the pins are set; actions are ignored.
* aim: up to ``aim_window`` frames of ``left``/``right``; ``release`` (or the
  last aim frame) throws the ball from its current column.
* travel: the ball rolls for ``travel_frames`` frames.  On arrival it knocks
  every pin of ``pin_layout`` (bit ``c`` = pin in column ``c``) within one
  column of the ball, paying +1 per pin.  Zero pins is a miss.

The arrival frame ends the game; the following frame is terminal.
"""
from __future__ import annotations

from dataclasses import dataclass

from prescience.core import Env, InvalidParams

SETUP, AIM, TRAVEL = 0, 1, 2
NO_RESULT = 255
EMPTY, BALL, PIN = 0, 4, 5


@dataclass
class Roll(Env):
    width: int = 7
    start_col: int = 1
    aim_window: int = 10
    travel_frames: int = 40
    setup_frames: int = 30
    pin_layout: int = 0b0011100

    env_id = "roll"
    kind = "roll"
    action_names = ("noop", "left", "right", "release")
    _fmt = "<6B"  # mode, counter, col, result, game_over, terminal

    def _validate(self) -> None:
        if not 1 <= self.width <= 16:
            raise InvalidParams("roll: width must be in [1, 16]")
        if not 0 <= self.start_col < self.width:
            raise InvalidParams("roll: start_col outside the lane")
        if not 1 <= self.aim_window < self.travel_frames <= 255:
            raise InvalidParams("roll: need 1 <= aim_window < travel_frames <= 255")
        if not 0 <= self.setup_frames <= 255:
            raise InvalidParams("roll: setup_frames must be in [0, 255]")
        if self.pin_layout <= 0 or self.pin_layout >> self.width:
            raise InvalidParams("roll: pin_layout must be a non-empty mask over the columns")

    def pins_hit(self, col: int) -> int:
        lo = max(0, col - 1)
        mask = ((1 << (col + 2 - lo)) - 1) << lo
        return bin(self.pin_layout & mask).count("1")

    def _initial_state(self):
        if self.setup_frames:
            return (SETUP, 0, self.start_col, NO_RESULT, 0, 0)
        return (AIM, 0, self.start_col, NO_RESULT, 0, 0)

    def _transition(self, state, action):
        mode, counter, col, result, _, _ = state
        if mode == SETUP:
            counter += 1
            if counter == self.setup_frames:
                return (AIM, 0, col, result, 0, 0), 0
            return (SETUP, counter, col, result, 0, 0), 0
        if mode == AIM:
            if action == 1:
                col = max(0, col - 1)
            elif action == 2:
                col = min(self.width - 1, col + 1)
            counter += 1
            if action == 3 or counter == self.aim_window:
                return (TRAVEL, self.travel_frames, col, result, 0, 0), 0
            return (AIM, counter, col, result, 0, 0), 0
        counter -= 1
        if counter == 0:
            pins = self.pins_hit(col)
            return (TRAVEL, 0, col, pins, 1, 0), pins
        return (TRAVEL, counter, col, result, 0, 0), 0

    def _scalars(self, state):
        mode, counter, col, result, _, _ = state
        return {
            "mode": mode,
            "counter": counter,
            "col": col,
            "pins": 0 if result == NO_RESULT else result,
            "miss": int(result == 0),
        }

    def _render(self, state):
        pins = tuple(PIN if self.pin_layout >> c & 1 else EMPTY for c in range(self.width))
        lane = [EMPTY] * self.width
        lane[state[2]] = BALL
        return (pins, tuple(lane))
