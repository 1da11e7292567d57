"""Gun turret that overheats when fired too often.

Per frame:

1. A turret left overheated by the previous frame restarts at heat 0.
2. Heat drops by ``cooling_per_frame`` (floored at 0).
3. ``fire`` adds ``heat_per_shot``.  Reaching ``overheat_threshold`` costs a
   life (heat is shown pinned at the threshold for that frame) and the shot
   is lost; otherwise a shot in the enemy's column scores +1.
4. ``left``/``right`` move the turret one column (clamped).
5. The enemy drifts one column right every ``enemy_period`` frames
   (wrapping).  If it goes ``breach_frames`` frames without being hit it
   breaches the defence for -1.
"""
from __future__ import annotations

from dataclasses import dataclass

from prescience.core import Env, InvalidParams

EMPTY, PLAYER, ENEMY = 0, 2, 3


@dataclass
class Overheat(Env):
    width: int = 5
    heat_per_shot: int = 2
    cooling_per_frame: int = 1
    overheat_threshold: int = 10
    lives: int = 3
    enemy_period: int = 3
    breach_frames: int = 12
    start_col: int = 2
    enemy_start: int = 0

    env_id = "overheat"
    kind = "overheat"
    action_names = ("noop", "fire", "left", "right")
    _fmt = "<8B"  # heat, col, enemy, enemy_timer, breach_timer, lives, game_over, terminal

    def _validate(self) -> None:
        if self.width < 1:
            raise InvalidParams("overheat: width must be >= 1")
        if not self.overheat_threshold > self.heat_per_shot >= 1:
            raise InvalidParams("overheat: need threshold > heat_per_shot >= 1")
        if self.cooling_per_frame < 0 or self.overheat_threshold > 255:
            raise InvalidParams("overheat: bad cooling or threshold")
        if self.enemy_period < 1 or not 1 <= self.breach_frames <= 255:
            raise InvalidParams("overheat: enemy_period and breach_frames must be >= 1")
        if not (0 <= self.start_col < self.width and 0 <= self.enemy_start < self.width):
            raise InvalidParams("overheat: start columns outside the field")
        if not 1 <= self.lives <= 255:
            raise InvalidParams("overheat: lives must be in [1, 255]")

    def _initial_state(self):
        return (0, self.start_col, self.enemy_start, 0, 0, self.lives, 0, 0)

    def _transition(self, state, action):
        heat, col, enemy, etimer, btimer, lives, _, _ = state
        if heat >= self.overheat_threshold:
            heat = 0
        heat = max(0, heat - self.cooling_per_frame)
        reward = 0
        hit = False
        over = 0
        if action == 1:
            heat += self.heat_per_shot
            if heat >= self.overheat_threshold:
                heat = self.overheat_threshold
                lives -= 1
                if lives == 0:
                    over = 1
            elif col == enemy:
                hit = True
                reward += 1
        elif action == 2:
            col = max(0, col - 1)
        elif action == 3:
            col = min(self.width - 1, col + 1)
        etimer += 1
        if etimer == self.enemy_period:
            etimer = 0
            enemy = (enemy + 1) % self.width
        if hit:
            btimer = 0
        else:
            btimer += 1
            if btimer == self.breach_frames:
                reward -= 1
                btimer = 0
        return (heat, col, enemy, etimer, btimer, lives, over, 0), reward

    def _lives(self, state):
        return state[5]

    def _scalars(self, state):
        return {
            "heat": state[0],
            "overheated": int(state[0] >= self.overheat_threshold),
            "col": state[1],
            "enemy": state[2],
            "lives": state[5],
        }

    def _render(self, state):
        top = [EMPTY] * self.width
        bottom = [EMPTY] * self.width
        top[state[2]] = ENEMY
        bottom[state[1]] = PLAYER
        return (tuple(top), tuple(bottom))
