"""Reference simulators: pure functions on state tuples.

These are written from the published per-game rule tables, separately from
``prescience.envs``.  They share the snapshot payload layout (so digests
agree) but no stepping code.
"""
from __future__ import annotations

import struct
from math import gcd

import xxhash

from prescience.core import InvalidParams

DEFAULTS = {
    "crossing": dict(lanes=7, width=9, car_periods=(1, 2, 3, 2, 1, 3, 2), car_offsets=(1, 4, 8, 3, 6, 0, 3),
                     lives=3, agent_col=4, start_row=0, knockback=1),
    "overheat": dict(width=5, heat_per_shot=2, cooling_per_frame=1, overheat_threshold=10, lives=3,
                     enemy_period=3, breach_frames=12, start_col=2, enemy_start=0),
    "roll": dict(width=7, start_col=1, aim_window=10, travel_frames=40, setup_frames=30, pin_layout=0b0011100),
    "fuel": dict(track_len=10, width=5, fuel_init=20, fuel_per_move=1,
                 hazard_cells=((3, 0), (3, 4), (7, 1), (7, 3)), depot_cells=((0, 2), (5, 2)),
                 goal_cells=((9, 0), (9, 1), (9, 2), (9, 3), (9, 4)), start=(0, 2)),
    "stress": dict(countdown=5, period=1000),
}

FORMATS = {"crossing": "<HBBBB", "overheat": "<8B", "roll": "<6B", "fuel": "<5B", "stress": "<HBBB"}
N_ACTIONS = {"crossing": 3, "overheat": 4, "roll": 4, "fuel": 4, "stress": 3}


class RefGame:
    """``initial``/``step``/``view`` over plain tuples for one game configuration."""

    def __init__(self, kind: str, params=None):
        if kind not in DEFAULTS:
            raise InvalidParams(f"oracle has no reference model for {kind!r}")
        p = dict(DEFAULTS[kind])
        extra = set(params or {}) - set(p)
        if extra:
            raise InvalidParams(f"{kind}: unknown params {sorted(extra)}")
        p.update(params or {})
        self.kind = kind
        self.p = p
        self.n_actions = N_ACTIONS[kind]
        self._pack = struct.Struct(FORMATS[kind]).pack
        self._step = getattr(self, "_step_" + kind)
        self._view = getattr(self, "_view_" + kind)
        if kind == "crossing":
            cyc = 1
            for per in p["car_periods"]:
                n = per * p["width"]
                cyc = cyc * n // gcd(cyc, n)
            self.cycle = cyc

    # -- shared shell ---------------------------------------------------
    def initial(self) -> tuple:
        p = self.p
        if self.kind == "crossing":
            return (0, p["start_row"], p["lives"], 0, 0)
        if self.kind == "overheat":
            return (0, p["start_col"], p["enemy_start"], 0, 0, p["lives"], 0, 0)
        if self.kind == "roll":
            return (0 if p["setup_frames"] else 1, 0, p["start_col"], 255, 0, 0)
        if self.kind == "fuel":
            return (p["start"][0], p["start"][1], p["fuel_init"], 0, 0)
        return (p["countdown"], 0, 0, 0)

    def step(self, s: tuple, a: int) -> tuple[tuple, int]:
        if not 0 <= a < self.n_actions:
            raise ValueError(f"action {a} out of range")
        if s[-1]:
            raise ValueError("step from the terminating state")
        if s[-2]:
            return s[:-1] + (1,), 0
        return self._step(s, a)

    def view(self, s: tuple) -> tuple[dict, int, bool]:
        """(scalars, lives, terminal)."""
        scalars, lives = self._view(s)
        return scalars, lives, bool(s[-1])

    def digest(self, s: tuple) -> int:
        return xxhash.xxh64_intdigest(self._pack(*s))

    def payload(self, s: tuple) -> bytes:
        return self._pack(*s)

    # -- crossing -------------------------------------------------------
    def _car(self, lane: int, phase: int) -> int:
        p = self.p
        per = p["car_periods"][lane - 1]
        off = p["car_offsets"][lane - 1]
        step = phase // per
        return (off + step) % p["width"] if lane % 2 == 1 else (off - step) % p["width"]

    def _step_crossing(self, s, a):
        p = self.p
        phase, row, lives = s[0], s[1], s[2]
        row = row + 1 if a == 1 else (max(row - 1, 0) if a == 2 else row)
        phase = (phase + 1) % self.cycle
        r = 0
        if row == p["lanes"] + 1:
            r, row = 1, 0
        over = 0
        if 0 < row <= p["lanes"] and self._car(row, phase) == p["agent_col"]:
            lives, row = lives - 1, max(row - p["knockback"], 0)
            over = int(lives == 0)
        return (phase, row, lives, over, 0), r

    def _view_crossing(self, s):
        return {"phase": s[0], "row": s[1], "lives": s[2]}, s[2]

    # -- overheat -------------------------------------------------------
    def _step_overheat(self, s, a):
        p = self.p
        heat, col, enemy, et, bt, lives = s[:6]
        thr = p["overheat_threshold"]
        heat = 0 if heat >= thr else heat
        heat = heat - p["cooling_per_frame"] if heat > p["cooling_per_frame"] else 0
        r, hit, over = 0, False, 0
        if a == 1:
            if heat + p["heat_per_shot"] >= thr:
                heat, lives = thr, lives - 1
                over = int(lives == 0)
            else:
                heat += p["heat_per_shot"]
                if col == enemy:
                    hit, r = True, 1
        elif a == 2 and col > 0:
            col -= 1
        elif a == 3 and col < p["width"] - 1:
            col += 1
        et = (et + 1) % p["enemy_period"]
        if et == 0:
            enemy = (enemy + 1) % p["width"]
        if hit:
            bt = 0
        elif bt + 1 == p["breach_frames"]:
            bt, r = 0, r - 1
        else:
            bt += 1
        return (heat, col, enemy, et, bt, lives, over, 0), r

    def _view_overheat(self, s):
        return {
            "heat": s[0],
            "overheated": int(s[0] >= self.p["overheat_threshold"]),
            "col": s[1],
            "enemy": s[2],
            "lives": s[5],
        }, s[5]

    # -- roll -----------------------------------------------------------
    def _pins(self, col: int) -> int:
        layout = self.p["pin_layout"]
        return sum(1 for c in (col - 1, col, col + 1) if 0 <= c < self.p["width"] and layout >> c & 1)

    def _step_roll(self, s, a):
        p = self.p
        mode, n, col, res = s[:4]
        if mode == 0:
            n += 1
            return ((1, 0) if n == p["setup_frames"] else (0, n)) + (col, res, 0, 0), 0
        if mode == 1:
            if a == 1:
                col = max(col - 1, 0)
            elif a == 2:
                col = min(col + 1, p["width"] - 1)
            n += 1
            if a == 3 or n == p["aim_window"]:
                return (2, p["travel_frames"], col, res, 0, 0), 0
            return (1, n, col, res, 0, 0), 0
        if n == 1:
            pins = self._pins(col)
            return (2, 0, col, pins, 1, 0), pins
        return (2, n - 1, col, res, 0, 0), 0

    def _view_roll(self, s):
        res = s[3]
        return {"mode": s[0], "counter": s[1], "col": s[2], "pins": 0 if res == 255 else res, "miss": int(res == 0)}, 1

    # -- fuel -----------------------------------------------------------
    def _step_fuel(self, s, a):
        p = self.p
        row, col, fuel = s[:3]
        target = {
            0: (row, col),
            1: (row, max(col - 1, 0)),
            2: (row, min(col + 1, p["width"] - 1)),
            3: ((row + 1) % p["track_len"], col),
        }[a]
        if target == (row, col) or fuel < p["fuel_per_move"]:
            return (row, col, fuel, 0, 0), 0
        fuel -= p["fuel_per_move"]
        cells = lambda key: {tuple(c) for c in p[key]}  # noqa: E731
        if target in cells("hazard_cells"):
            return target + (fuel, 0, 1), 0
        r = int(target in cells("goal_cells"))
        if target in cells("depot_cells"):
            fuel = p["fuel_init"]
        return target + (fuel, 0, 0), r

    def _view_fuel(self, s):
        return {"row": s[0], "col": s[1], "fuel": s[2]}, 1

    # -- stress ---------------------------------------------------------
    def _step_stress(self, s, a):
        if s[0] == 1:
            return (self.p["period"], 1, 0, 0), 0
        return (s[0] - 1, 0, 0, 0), 0

    def _view_stress(self, s):
        return {"remaining": s[0], "alarm": s[1]}, 1
