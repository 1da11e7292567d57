"""Looping track with a fuel tank, refuelling depots and hazards.

Per frame: ``forward`` advances one row (the track wraps), ``left``/``right``
change column.  A move that changes position costs ``fuel_per_move`` and is
refused when the tank holds less than that; ``noop`` is free.  Entering a
goal cell pays +1, entering a depot refills to ``fuel_init``, entering a
hazard ends the episode on the spot.
"""
from __future__ import annotations

from dataclasses import dataclass

from prescience.core import Env, InvalidParams

EMPTY, AGENT, HAZARD, DEPOT, GOAL = 0, 2, 6, 7, 8


@dataclass
class Fuel(Env):
    track_len: int = 10
    width: int = 5
    fuel_init: int = 20
    fuel_per_move: int = 1
    hazard_cells: tuple = ((3, 0), (3, 4), (7, 1), (7, 3))
    depot_cells: tuple = ((0, 2), (5, 2))
    goal_cells: tuple = ((9, 0), (9, 1), (9, 2), (9, 3), (9, 4))
    start: tuple = (0, 2)

    env_id = "fuel"
    kind = "fuel"
    action_names = ("noop", "left", "right", "forward")
    _fmt = "<5B"  # row, col, fuel, game_over, terminal

    def _validate(self) -> None:
        self.hazard_cells = frozenset(tuple(c) for c in self.hazard_cells)
        self.depot_cells = frozenset(tuple(c) for c in self.depot_cells)
        self.goal_cells = frozenset(tuple(c) for c in self.goal_cells)
        self.start = tuple(self.start)
        if not (1 <= self.track_len <= 255 and 1 <= self.width <= 255):
            raise InvalidParams("fuel: bad track size")
        if not 0 <= self.fuel_init <= 255 or self.fuel_per_move < 0:
            raise InvalidParams("fuel: fuel values out of range")
        cells = self.hazard_cells | self.depot_cells | self.goal_cells | {self.start}
        if any(not (0 <= r < self.track_len and 0 <= c < self.width) for r, c in cells):
            raise InvalidParams("fuel: cell outside the track")
        if self.start in self.hazard_cells:
            raise InvalidParams("fuel: start cell is a hazard")

    def _initial_state(self):
        return (self.start[0], self.start[1], self.fuel_init, 0, 0)

    def _transition(self, state, action):
        row, col, fuel, _, _ = state
        nrow, ncol = row, col
        if action == 1:
            ncol = max(0, col - 1)
        elif action == 2:
            ncol = min(self.width - 1, col + 1)
        elif action == 3:
            nrow = (row + 1) % self.track_len
        if (nrow, ncol) == (row, col) or fuel < self.fuel_per_move:
            return (row, col, fuel, 0, 0), 0
        fuel -= self.fuel_per_move
        cell = (nrow, ncol)
        if cell in self.hazard_cells:
            return (nrow, ncol, fuel, 0, 1), 0
        reward = 1 if cell in self.goal_cells else 0
        if cell in self.depot_cells:
            fuel = self.fuel_init
        return (nrow, ncol, fuel, 0, 0), reward

    def _scalars(self, state):
        return {"row": state[0], "col": state[1], "fuel": state[2]}

    def _render(self, state):
        grid = [[EMPTY] * self.width for _ in range(self.track_len)]
        for cells, code in ((self.goal_cells, GOAL), (self.depot_cells, DEPOT), (self.hazard_cells, HAZARD)):
            for r, c in cells:
                grid[r][c] = code
        grid[state[0]][state[1]] = AGENT
        return tuple(tuple(r) for r in grid)
