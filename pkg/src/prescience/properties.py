"""Safety properties as stateful labelling folds over step outcomes.

Three labeller kinds:

``life_count``
    unsafe when the life counter drops below its previous value.
``reward_threshold``
    accumulates negative reward; unsafe once the sum is at or below
    ``threshold`` (and forever after, since the sum never increases).
``observation_predicate``
    unsafe when a condition on the observation's scalars or grid cells
    holds, optionally only after holding for ``hold`` consecutive frames.

A terminal outcome is always safe.
"""
from __future__ import annotations

import enum
import json
import operator
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

import xxhash

from prescience.core import StepOutcome

CLASSES = ("shallow", "minimal", "general")
KINDS = ("life_count", "reward_threshold", "observation_predicate")
UNSET = -1


class PropertyError(Exception):
    pass


class UnknownLabellerKind(PropertyError):
    pass


class ParseError(PropertyError):
    pass


class DuplicateId(PropertyError):
    pass


class Verdict(str, enum.Enum):
    SAFE = "safe"
    UNSAFE = "unsafe"


_OPS = {
    "==": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
    "in": lambda a, b: a in b,
    "not_in": lambda a, b: a not in b,
}


@dataclass(frozen=True)
class Condition:
    op: str
    value: Any
    scalar: str | None = None
    cell: tuple[int, int] | None = None

    def holds(self, outcome: StepOutcome) -> bool:
        obs = outcome.observation
        if self.scalar is not None:
            x = obs.scalars[self.scalar]
        else:
            r, c = self.cell
            x = obs.grid[r][c]
        return _OPS[self.op](x, self.value)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Condition":
        op = d.get("op", "==")
        if op not in _OPS:
            raise ParseError(f"unknown predicate operator {op!r}")
        value = d.get("value")
        if op in ("in", "not_in"):
            value = frozenset(value)
        if "scalar" in d:
            return cls(op, value, scalar=str(d["scalar"]))
        if "cell" in d:
            r, c = d["cell"]
            return cls(op, value, cell=(int(r), int(c)))
        raise ParseError("predicate condition needs 'scalar' or 'cell'")

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"scalar": self.scalar} if self.scalar is not None else {"cell": list(self.cell)}
        d["op"] = self.op
        d["value"] = sorted(self.value) if isinstance(self.value, frozenset) else self.value
        return d


class Labeller:
    """Pure fold ``(acc, outcome) -> (unsafe, acc')`` with an integer accumulator."""

    kind = ""
    initial = 0

    def fold(self, acc: int, outcome: StepOutcome) -> tuple[bool, int]:
        raise NotImplementedError

    def key(self) -> tuple:
        return (self.kind,)


class LifeCount(Labeller):
    kind = "life_count"
    initial = UNSET

    def fold(self, acc, outcome):
        lives = outcome.lives
        if outcome.terminal:
            return False, lives
        return (acc != UNSET and lives < acc), lives


class RewardThreshold(Labeller):
    kind = "reward_threshold"
    initial = 0

    def __init__(self, threshold: int):
        if threshold >= 0:
            raise ParseError("reward_threshold needs a negative threshold")
        self.threshold = threshold

    def fold(self, acc, outcome):
        if outcome.reward < 0:
            acc += outcome.reward
        if outcome.terminal:
            return False, acc
        return acc <= self.threshold, acc

    def key(self):
        return (self.kind, self.threshold)


class ObservationPredicate(Labeller):
    kind = "observation_predicate"
    initial = 0

    def __init__(self, conditions: Iterable[Condition], hold: int = 1):
        self.conditions = tuple(conditions)
        if not self.conditions:
            raise ParseError("observation_predicate needs at least one condition")
        if hold < 1:
            raise ParseError("hold must be >= 1")
        self.hold = hold

    def fold(self, acc, outcome):
        if outcome.terminal:
            return False, 0
        if all(c.holds(outcome) for c in self.conditions):
            acc = min(acc + 1, self.hold)
        else:
            acc = 0
        return acc >= self.hold, (acc if self.hold > 1 else 0)

    def key(self):
        return (self.kind, self.hold, tuple(sorted(repr(c) for c in self.conditions)))


@dataclass(frozen=True)
class Property:
    id: str
    cls: str
    labeller_kind: str
    labeller_params: Mapping[str, Any] = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if ":" not in self.id:
            raise ParseError(f"property id {self.id!r} must look like 'game:name'")
        if self.cls not in CLASSES:
            raise ParseError(f"{self.id}: class must be one of {CLASSES}")
        object.__setattr__(self, "_labeller", _build_labeller(self.labeller_kind, self.labeller_params))

    @property
    def game(self) -> str:
        return self.id.split(":", 1)[0]

    @property
    def labeller(self) -> Labeller:
        return self._labeller

    def to_dict(self) -> dict[str, Any]:
        lab = {"kind": self.labeller_kind}
        lab.update(self.labeller_params)
        return {"id": self.id, "class": self.cls, "labeller": lab}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Property":
        try:
            lab = dict(d["labeller"])
            kind = lab.pop("kind")
            return cls(str(d["id"]), str(d["class"]), kind, lab)
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed property entry {d!r}: {exc}") from None


def _build_labeller(kind: str, params: Mapping[str, Any]) -> Labeller:
    if kind == "life_count":
        return LifeCount()
    if kind == "reward_threshold":
        try:
            return RewardThreshold(int(params["threshold"]))
        except KeyError:
            raise ParseError("reward_threshold needs 'threshold'") from None
    if kind == "observation_predicate":
        conds = params.get("all")
        if conds is None:
            conds = [params]
        return ObservationPredicate([Condition.from_dict(c) for c in conds], int(params.get("hold", 1)))
    raise UnknownLabellerKind(kind)


@dataclass(frozen=True)
class LabellerState:
    labeller: Labeller = field(compare=False)
    acc: int
    kind: str = ""

    @property
    def digest(self) -> int:
        return xxhash.xxh64_intdigest(repr((self.labeller.key(), self.acc)).encode())


def init_labeller(prop: Property) -> LabellerState:
    if prop.labeller_kind not in KINDS:
        raise UnknownLabellerKind(prop.labeller_kind)
    lab = prop.labeller
    return LabellerState(lab, lab.initial, lab.kind)


def label(state: LabellerState, outcome: StepOutcome) -> tuple[Verdict, LabellerState]:
    unsafe, acc = state.labeller.fold(state.acc, outcome)
    return (Verdict.UNSAFE if unsafe else Verdict.SAFE), LabellerState(state.labeller, acc, state.kind)


class Registry(dict):
    """Properties keyed by id, iterated in lexicographic id order."""

    def __init__(self, props: Iterable[Property] = ()):
        super().__init__()
        for p in sorted(props, key=lambda p: p.id):
            if p.id in self:
                raise DuplicateId(p.id)
            self[p.id] = p

    def for_game(self, game: str) -> list[Property]:
        return [p for p in self.values() if p.game == game]


def parse_property_suite(data: Any) -> Registry:
    if not isinstance(data, list):
        raise ParseError("property suite must be a JSON array")
    props = [Property.from_dict(d) for d in data]
    seen: set[str] = set()
    for p in props:
        if p.id in seen:
            raise DuplicateId(p.id)
        seen.add(p.id)
    return Registry(props)


def load_property_suite(path: str | Path) -> Registry:
    text = Path(path).read_text()
    if not text.strip():
        return Registry()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    return parse_property_suite(data)


def default_suite_path() -> Path:
    return Path(__file__).parent / "data" / "default_suite.json"
