"""Reference labelling folds over reference-simulator views.

The reward accumulator is clamped at the threshold: below it every later
non-terminal frame is unsafe anyway, and clamping keeps the product graph
finite.
"""
from __future__ import annotations

from prescience.properties import Property


class OracleUnsupported(Exception):
    pass


def _test(op: str, x, v) -> bool:
    if op == "==":
        return x == v
    if op == "!=":
        return x != v
    if op == "<":
        return x < v
    if op == "<=":
        return x <= v
    if op == ">":
        return x > v
    if op == ">=":
        return x >= v
    if op == "in":
        return x in set(v)
    if op == "not_in":
        return x not in set(v)
    raise OracleUnsupported(f"operator {op!r}")


class RefLabel:
    """``fold(acc, reward, scalars, lives, terminal) -> (unsafe, acc')``."""

    def __init__(self, prop: Property):
        self.kind = prop.labeller_kind
        params = dict(prop.labeller_params)
        if self.kind == "life_count":
            self.initial = None
        elif self.kind == "reward_threshold":
            self.threshold = int(params["threshold"])
            self.initial = 0
        elif self.kind == "observation_predicate":
            conds = params.get("all") or [params]
            for c in conds:
                if "scalar" not in c:
                    raise OracleUnsupported("the oracle only evaluates scalar predicates")
            self.conds = [(c["scalar"], c["op"], c["value"]) for c in conds]
            self.hold = int(params.get("hold", 1))
            self.initial = 0
        else:
            raise OracleUnsupported(self.kind)

    def fold(self, acc, reward: int, scalars: dict, lives: int, terminal: bool):
        if self.kind == "life_count":
            return (not terminal and acc is not None and lives < acc), lives
        if self.kind == "reward_threshold":
            acc = max(acc + min(reward, 0), self.threshold)
            return (not terminal and acc <= self.threshold), acc
        if terminal:
            return False, 0
        if all(_test(op, scalars[name], v) for name, op, v in self.conds):
            run = min(acc + 1, self.hold)
        else:
            run = 0
        return run >= self.hold, (run if self.hold > 1 else 0)
