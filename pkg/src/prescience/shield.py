"""Bounded-prescience shield.

Before each agent decision the shield forward-simulates the game through
snapshot/restore and keeps the agent's most preferred action that can be
continued into a safe bounded path of ``H`` frames.  If no action can, the
agent's top preference goes through unchanged.

Search is depth-first in canonical action order, so a state where the first
action keeps working costs one node per frame.  Verdicts are memoised per
``(state digest, labeller digest, wrapper context)`` as a monotone depth
frontier: safe up to some depth, unsafe from some depth.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import xxhash

from prescience.core import NOOP, Env
from prescience.nondet import BranchSpec, RngStream, transform_action
from prescience.properties import LabellerState, Property
from prescience.verifier import (
    AnalysisConfig,
    TraceRecord,
    _records,
    initial_labellers,
    initial_set,
    map_ordered,
    rollout,
)


class NodeBudgetExceeded(Exception):
    pass


class UnboundedSupport(ValueError):
    pass


@dataclass(frozen=True)
class ShieldConfig:
    bound_H: int
    node_budget: int | None = None
    memo_enabled: bool = True
    robust: bool = False

    def __post_init__(self):
        if self.bound_H < 1:
            raise ValueError("bound_H must be >= 1")
        if self.node_budget is not None and self.node_budget < self.bound_H:
            raise ValueError("node_budget must be >= bound_H")


@dataclass
class ShieldStats:
    nodes_expanded: int = 0
    simulator_steps: int = 0
    cache_hits: int = 0
    overrides: int = 0
    fallbacks: int = 0
    budget_exhausted: int = 0
    decisions: int = 0

    def add(self, other: "ShieldStats") -> "ShieldStats":
        for name in self.__dataclass_fields__:
            setattr(self, name, getattr(self, name) + getattr(other, name))
        return self

    def copy(self) -> "ShieldStats":
        return ShieldStats(**{k: getattr(self, k) for k in self.__dataclass_fields__})

    def minus(self, other: "ShieldStats") -> "ShieldStats":
        return ShieldStats(**{k: getattr(self, k) - getattr(other, k) for k in self.__dataclass_fields__})


class MemoCache:
    """Depth frontiers keyed by (state digest, labeller digest, context).

    Each entry is ``[safe_upto, unsafe_from]``: the deepest bound proven
    safe (-1 if none) and the shallowest bound proven unsafe (None if none).
    Monotonicity of bounded safety lets one entry answer every depth outside
    the open gap between the two.
    """

    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self.entries: dict[tuple, list] = {}

    def __len__(self) -> int:
        return len(self.entries)

    def lookup(self, key: tuple, depth: int) -> bool | None:
        if not self.enabled:
            return None
        e = self.entries.get(key)
        if e is None:
            return None
        if e[0] >= depth:
            return True
        if e[1] is not None and e[1] <= depth:
            return False
        return None

    def record(self, key: tuple, depth: int, safe: bool) -> None:
        if not self.enabled:
            return
        e = self.entries.setdefault(key, [-1, None])
        if safe:
            if depth > e[0]:
                e[0] = depth
        elif e[1] is None or depth < e[1]:
            e[1] = depth

    def frontier(self, key: tuple) -> tuple[int, int | None] | None:
        e = self.entries.get(key)
        return None if e is None else (e[0], e[1])

    def clear(self) -> None:
        self.entries.clear()


def _as_list(labeller_state) -> list[LabellerState]:
    if isinstance(labeller_state, LabellerState):
        return [labeller_state]
    return list(labeller_state)


def labeller_digest(labs: Sequence[LabellerState]) -> int:
    if len(labs) == 1:
        return labs[0].digest
    return xxhash.xxh64_intdigest(repr([(l.labeller.key(), l.acc) for l in labs]).encode())


class Search:
    """One shield's search state over a single live env."""

    def __init__(
        self,
        env: Env,
        cache: MemoCache | None = None,
        branch: BranchSpec | None = None,
        rng: RngStream | None = None,
        robust: bool = False,
        node_budget: int | None = None,
        stats: ShieldStats | None = None,
    ):
        self.env = env
        self.cache = cache if cache is not None else MemoCache(True)
        self.branch = branch or BranchSpec()
        self.rng = rng or RngStream(self.branch.seed)
        self.robust = robust
        if robust and not self.branch.finite_support:
            raise UnboundedSupport("robust search cannot enumerate sticky-action repeats")
        self.node_budget = node_budget
        self.stats = stats if stats is not None else ShieldStats()
        self._budget_left = None

    def _key(self, labs, counter: int, previous: int) -> tuple:
        if self.robust:
            ctx: tuple = ("robust", previous) if self.branch.mode == "sticky" else ("robust",)
        else:
            ctx = self.branch.context(counter, previous)
        return (self.env.digest(), labeller_digest(labs), ctx)

    def _outcomes(self, action: int, counter: int, previous: int) -> list[tuple[int, int]]:
        if self.robust:
            return self.branch.outcomes(action, previous)
        return [transform_action(self.branch, self.rng.at(counter), action, previous)]

    def safe(self, labs, depth: int, counter: int, previous: int) -> bool:
        """Bounded safety of the env's current state for ``depth`` more frames."""
        if depth <= 0:
            return True
        key = self._key(labs, counter, previous)
        hit = self.cache.lookup(key, depth)
        if hit is not None:
            self.stats.cache_hits += 1
            return hit
        snap = self.env.save()
        result = False
        for a in range(self.env.n_actions):
            if self.action_safe(snap, labs, a, depth, counter, previous):
                result = True
                break
        self.cache.record(key, depth, result)
        return result

    def action_safe(self, snap, labs, action: int, depth: int, counter: int, previous: int) -> bool:
        """Every wrapper outcome of ``action`` starts a safe path of ``depth`` frames."""
        for effective, repeats in self._outcomes(action, counter, previous):
            if not self._branch(snap, labs, effective, repeats, depth, counter):
                return False
        return True

    def _branch(self, snap, labs, effective: int, repeats: int, depth: int, counter: int) -> bool:
        self.stats.nodes_expanded += 1
        if self._budget_left is not None:
            self._budget_left -= 1
            if self._budget_left < 0:
                raise NodeBudgetExceeded(f"node budget {self.node_budget} exhausted")
        env = self.env
        env.restore(snap)
        labs = list(labs)
        frames = min(repeats, depth)
        ok = None
        for _ in range(frames):
            out = env.step(effective)
            self.stats.simulator_steps += 1
            unsafe = False
            for i, l in enumerate(labs):
                bad, acc = l.labeller.fold(l.acc, out)
                labs[i] = LabellerState(l.labeller, acc, l.kind)
                unsafe |= bad
            if unsafe:
                ok = False
                break
            if out.terminal:
                ok = True
                break
        if ok is None:
            ok = self.safe(labs, depth - frames, counter + 1, effective)
        env.restore(snap)
        return ok

    def choose(self, ranked: Sequence[int], labs, bound: int, counter: int, previous: int) -> tuple[int, str]:
        """Return (action, kind) with kind one of "top", "override", "fallback", "budget"."""
        top = ranked[0]
        self.stats.decisions += 1
        snap = self.env.save()
        key = self._key(labs, counter, previous)
        if self.cache.lookup(key, bound) is False:
            self.stats.cache_hits += 1
            self.stats.fallbacks += 1
            return top, "fallback"
        self._budget_left = self.node_budget
        try:
            for a in ranked:
                if self.action_safe(snap, labs, a, bound, counter, previous):
                    self.cache.record(key, bound, True)
                    if a != top:
                        self.stats.overrides += 1
                        return a, "override"
                    return a, "top"
        except NodeBudgetExceeded:
            self.env.restore(snap)
            self.stats.budget_exhausted += 1
            self.stats.fallbacks += 1
            return top, "budget"
        finally:
            self._budget_left = None
        self.cache.record(key, bound, False)
        self.stats.fallbacks += 1
        return top, "fallback"


def bounded_safe(
    env: Env,
    labeller_state,
    depth: int,
    cache: MemoCache | None = None,
    *,
    stats: ShieldStats | None = None,
    branch: BranchSpec | None = None,
    rng: RngStream | None = None,
    counter: int = 0,
    previous: int = NOOP,
    node_budget: int | None = None,
) -> bool:
    """True iff some action sequence keeps every state safe for ``depth`` frames.

    Terminal states are safe and end the path.  The env is restored to its
    entry state.  The labeller state must describe the env's current state.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    s = Search(env, cache if cache is not None else MemoCache(False), branch, rng, False, node_budget, stats)
    s._budget_left = node_budget
    return s.safe(_as_list(labeller_state), depth, counter, previous)


def robust_bounded_safe(
    env: Env,
    labeller_state,
    depth: int,
    branch_spec: BranchSpec,
    cache: MemoCache | None = None,
    *,
    stats: ShieldStats | None = None,
    previous: int = NOOP,
    node_budget: int | None = None,
) -> bool:
    """AND-OR version: some action choice per step keeps every wrapper outcome safe."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    s = Search(env, cache if cache is not None else MemoCache(False), branch_spec, None, True, node_budget, stats)
    s._budget_left = node_budget
    return s.safe(_as_list(labeller_state), depth, 0, previous)


def shielded_act(
    env: Env,
    policy,
    property: Property | None,
    labeller_state,
    config: ShieldConfig,
    cache: MemoCache | None = None,
    *,
    branch: BranchSpec | None = None,
    rng: RngStream | None = None,
    counter: int = 0,
    previous: int = NOOP,
) -> tuple[int, ShieldStats]:
    """Most preferred action that starts a safe bounded path of ``bound_H`` frames.

    ``policy`` is a Policy (asked once for its preferences at the current
    state) or a PreferenceOrder.  Returns the action and this call's stats.
    """
    if env.terminal:
        raise ValueError("shielded_act on a terminal state")
    order = policy.act(env.peek()) if hasattr(policy, "act") else policy
    stats = ShieldStats()
    if cache is None:
        cache = MemoCache(config.memo_enabled)
    s = Search(env, cache, branch, rng, config.robust, config.node_budget, stats)
    action, _ = s.choose(order.ranked, _as_list(labeller_state), config.bound_H, counter, previous)
    return action, stats


# -- traces -----------------------------------------------------------------

@dataclass(frozen=True)
class Override:
    """One decision where the shield changed or could not change the agent's action."""

    decision: int
    snapshot: object
    labellers: tuple
    counter: int
    previous: int
    top: int
    chosen: int
    kind: str


@dataclass(frozen=True)
class ShieldedTrace:
    records: tuple[TraceRecord, ...]
    stats: ShieldStats
    overrides: tuple[Override, ...] = ()


def shielded_trace(
    env_factory,
    policy,
    props: Sequence[Property],
    analysis_config: AnalysisConfig,
    shield_config: ShieldConfig,
    index: int,
    init=None,
    keep_log: bool = False,
) -> ShieldedTrace:
    """One shielded rollout from initial state ``index``.

    The shield guards the conjunction of ``props``; each property still gets
    its own record.  The memo cache lives for this trace only.
    """
    if init is None:
        init = initial_set(env_factory, analysis_config)
    env = env_factory()
    folds = initial_labellers(env, init, index, props, analysis_config.prefix_audit)
    spec = analysis_config.branch
    search = Search(
        env,
        MemoCache(shield_config.memo_enabled),
        spec,
        RngStream(spec.seed).split(index),
        shield_config.robust,
        shield_config.node_budget,
    )
    log: list[Override] = []

    def choose(env, order, decision, previous, folds):
        labs = [f.state for f in folds]
        action, kind = search.choose(order.ranked, labs, shield_config.bound_H, decision, previous)
        if keep_log and kind != "top":
            log.append(Override(decision, env.save(), tuple(labs), decision, previous, order.ranked[0], action, kind))
        return action

    frames, total, reason = rollout(env, policy, folds, index, analysis_config, choose)
    return ShieldedTrace(tuple(_records(index, frames, total, reason, folds)), search.stats, tuple(log))


def run_shielded_trace(
    env_factory,
    policy,
    property: Property,
    analysis_config: AnalysisConfig,
    shield_config: ShieldConfig,
    index: int = 0,
) -> tuple[TraceRecord, ShieldStats]:
    t = shielded_trace(env_factory, policy, [property], analysis_config, shield_config, index)
    return t.records[0], t.stats


@dataclass
class ShieldResult:
    property_id: str
    policy_id: str
    bound_H: int
    traces: list[TraceRecord]
    stats: list[ShieldStats]

    @property
    def safe_count(self) -> int:
        return sum(t.safe for t in self.traces)

    @property
    def degree_of_safety(self) -> Fraction:
        return Fraction(self.safe_count, len(self.traces))

    @property
    def mean_reward(self) -> float:
        return sum(t.total_reward for t in self.traces) / len(self.traces)

    @property
    def total(self) -> ShieldStats:
        out = ShieldStats()
        for s in self.stats:
            out.add(s)
        return out


def _shield_job(args):
    env_factory, policy, prop, aconf, sconf, index, init = args
    t = shielded_trace(env_factory, policy, [prop], aconf, sconf, index, init)
    return t.records[0], t.stats


def shield_many(
    env_factory,
    policy,
    props: Sequence[Property],
    analysis_config: AnalysisConfig,
    shield_config: ShieldConfig,
    policy_id: str = "",
    workers: int = 1,
) -> list[ShieldResult]:
    """Shield each property separately over every initial state."""
    init = initial_set(env_factory, analysis_config)
    jobs = [
        (env_factory, policy, p, analysis_config, shield_config, i, init)
        for p in props
        for i in range(analysis_config.nu)
    ]
    rows = map_ordered(_shield_job, jobs, workers)
    pid = policy_id or getattr(policy, "kind", "policy")
    nu = analysis_config.nu
    out = []
    for k, p in enumerate(props):
        chunk = rows[k * nu : (k + 1) * nu]
        out.append(ShieldResult(p.id, pid, shield_config.bound_H, [r for r, _ in chunk], [s for _, s in chunk]))
    return out


# -- bound sweeps -------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    scenario: str
    bound_H: int
    nodes_expanded: int
    simulator_steps: int
    cache_hits: int
    safe_count: int
    traces: int

    @property
    def degree_of_safety(self) -> Fraction:
        return Fraction(self.safe_count, self.traces)


def sweep_bound(
    env_factory,
    policy,
    property: Property,
    analysis_config: AnalysisConfig,
    bounds: Sequence[int],
    memo_enabled: bool = True,
    workers: int = 1,
    scenario: str = "",
) -> list[SweepRow]:
    if any(b <= a for a, b in zip(bounds, bounds[1:])):
        raise ValueError("bounds must be strictly increasing")
    rows = []
    for h in bounds:
        res = shield_many(env_factory, policy, [property], analysis_config, ShieldConfig(h, memo_enabled=memo_enabled), workers=workers)[0]
        tot = res.total
        rows.append(SweepRow(scenario or property.id, h, tot.nodes_expanded, tot.simulator_steps, tot.cache_hits, res.safe_count, len(res.traces)))
    return rows


def stress_state(bound: int):
    """Three-action state from which every path of ``bound`` frames hits the alarm."""
    from prescience.envs import Stress

    return Stress(countdown=bound, period=max(bound, 1))


STRESS_PROPERTY = Property(
    "stress:no-alarm", "shallow", "observation_predicate", {"scalar": "alarm", "op": "==", "value": 1}
)


def stress_rows(bounds: Sequence[int], memo_enabled: bool = False) -> list[SweepRow]:
    """One shielded decision on the no-safe-path stress state per bound."""
    from prescience.agents.policies import PreferenceOrder
    from prescience.properties import init_labeller

    rows = []
    order = PreferenceOrder((0, 1, 2), (3.0, 2.0, 1.0))
    for h in bounds:
        env = stress_state(h)
        _, st = shielded_act(env, order, STRESS_PROPERTY, init_labeller(STRESS_PROPERTY), ShieldConfig(h, memo_enabled=memo_enabled))
        rows.append(SweepRow("stress", h, st.nodes_expanded, st.simulator_steps, st.cache_hits, 0, 1))
    return rows


def log_slope(bounds: Sequence[int], values: Sequence[float]) -> float:
    """Least-squares slope of log(values) against bounds."""
    xs = [float(b) for b in bounds]
    ys = [math.log(v) for v in values]
    mx = sum(xs) / len(xs)
    my = sum(ys) / len(ys)
    num = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    den = sum((x - mx) ** 2 for x in xs)
    return num / den


# -- report emitters ----------------------------------------------------------

SHIELD_COLUMNS = [
    "property_id", "policy_id", "bound_H", "initial_index", "safe", "total_reward",
    "overrides", "fallbacks", "nodes_expanded", "simulator_steps", "cache_hits",
]

COST_COLUMNS = ["scenario", "bound_H", "nodes_expanded", "simulator_steps", "cache_hits", "safe_count", "traces", "degree_of_safety"]


def write_shield_csv(path, results: Sequence[ShieldResult]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SHIELD_COLUMNS)
        for r in results:
            for t, s in zip(r.traces, r.stats):
                w.writerow([
                    r.property_id, r.policy_id, r.bound_H, t.initial_index, int(t.safe), t.total_reward,
                    s.overrides, s.fallbacks, s.nodes_expanded, s.simulator_steps, s.cache_hits,
                ])


def write_cost_csv(path, rows: Sequence[SweepRow], first_satisfied: dict[str, int | None] | None = None) -> None:
    cols = COST_COLUMNS + (["first_satisfied_bound"] if first_satisfied is not None else [])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            line = [r.scenario, r.bound_H, r.nodes_expanded, r.simulator_steps, r.cache_hits, r.safe_count, r.traces, str(r.degree_of_safety)]
            if first_satisfied is not None:
                fs = first_satisfied.get(r.scenario)
                line.append("" if fs is None else fs)
            w.writerow(line)


def first_satisfied(rows: Sequence[SweepRow]) -> dict[str, int | None]:
    out: dict[str, int | None] = {}
    for r in rows:
        out.setdefault(r.scenario, None)
        if out[r.scenario] is None and r.traces and r.safe_count == r.traces and r.scenario != "stress":
            out[r.scenario] = r.bound_H
    return out
