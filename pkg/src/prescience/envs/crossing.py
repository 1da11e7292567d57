"""Road crossing: walk up through lanes of periodic traffic.

Dynamics per frame (the reference table mirrored by the oracle simulator):

1. ``up``/``down`` move the walker one row (rows ``0..lanes+1``, clamped at 0).
2. The frame phase advances; the car of lane ``i`` sits at column
   ``(offset_i + dir_i * (phase // period_i)) mod width`` with ``dir = +1``
   on odd lanes and ``-1`` on even ones.
3. Reaching row ``lanes+1`` pays +1 and returns the walker to row 0.
4. If the walker shares a cell with a car it loses a life and is pushed
   back ``knockback`` rows (not below row 0).  At zero lives the game is over; the next frame is the
   terminating state.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import lcm

from prescience.core import Env, InvalidParams

EMPTY, CAR, AGENT = 0, 1, 2


@dataclass
class Crossing(Env):
    lanes: int = 7
    width: int = 9
    car_periods: tuple[int, ...] = (1, 2, 3, 2, 1, 3, 2)
    car_offsets: tuple[int, ...] = (1, 4, 8, 3, 6, 0, 3)
    lives: int = 3
    agent_col: int = 4
    start_row: int = 0
    knockback: int = 1

    env_id = "crossing"
    kind = "crossing"
    action_names = ("noop", "up", "down")
    _fmt = "<HBBBB"  # phase, row, lives, game_over, terminal

    def _validate(self) -> None:
        self.car_periods = tuple(self.car_periods)
        self.car_offsets = tuple(self.car_offsets)
        if self.lanes < 1 or self.width < 1:
            raise InvalidParams("crossing: lanes and width must be >= 1")
        if len(self.car_periods) != self.lanes or len(self.car_offsets) != self.lanes:
            raise InvalidParams("crossing: need one car period and offset per lane")
        if any(p < 1 for p in self.car_periods):
            raise InvalidParams("crossing: car periods must be >= 1")
        if not 0 <= self.agent_col < self.width:
            raise InvalidParams("crossing: agent_col outside the road")
        if not 0 <= self.start_row <= self.lanes + 1:
            raise InvalidParams("crossing: start_row outside [0, lanes+1]")
        if not 1 <= self.lives <= 255:
            raise InvalidParams("crossing: lives must be in [1, 255]")
        if self.knockback < 1:
            raise InvalidParams("crossing: knockback must be >= 1")
        self.cycle = lcm(*(p * self.width for p in self.car_periods))
        if self.cycle > 65535:
            raise InvalidParams("crossing: traffic cycle too long for the snapshot encoding")
        # cars[phase][lane-1] -> column
        self.cars = tuple(
            tuple(
                (off + (1 if lane % 2 else -1) * (phase // per)) % self.width
                for lane, (per, off) in enumerate(zip(self.car_periods, self.car_offsets), start=1)
            )
            for phase in range(self.cycle)
        )

    def _initial_state(self) -> tuple:
        return (0, self.start_row, self.lives, 0, 0)

    def _transition(self, state, action):
        phase, row, lives, _, _ = state
        if action == 1:
            row += 1
        elif action == 2 and row > 0:
            row -= 1
        phase = (phase + 1) % self.cycle
        reward = 0
        if row == self.lanes + 1:
            reward = 1
            row = 0
        over = 0
        if 1 <= row <= self.lanes and self.cars[phase][row - 1] == self.agent_col:
            lives -= 1
            row = max(0, row - self.knockback)
            if lives == 0:
                over = 1
        return (phase, row, lives, over, 0), reward

    def _lives(self, state):
        return state[2]

    def _scalars(self, state):
        return {"phase": state[0], "row": state[1], "lives": state[2]}

    def _render(self, state):
        phase, row, _, _, _ = state
        grid = [[EMPTY] * self.width for _ in range(self.lanes + 2)]
        for lane, col in enumerate(self.cars[phase], start=1):
            grid[lane][col] = CAR
        grid[row][self.agent_col] = AGENT
        return tuple(tuple(r) for r in grid)

    def car_column(self, lane: int, phase: int) -> int:
        return self.cars[phase % self.cycle][lane - 1]
