"""Explicit-state safety analysis over the no-op-induced initial states.

Games and agents are deterministic once the initial state is fixed, so
checking a property amounts to following one path per initial state and
recording whether (and when) the labeller first reports ``unsafe``.
"""
from __future__ import annotations

import csv
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from prescience.core import NOOP, Env
from prescience.nondet import BranchSpec, InitSet, RngStream, enumerate_initials, transform_action
from prescience.properties import LabellerState, Property, init_labeller


class AnalysisError(Exception):
    pass


class PrefixViolation(AnalysisError):
    pass


class DegenerateReference(AnalysisError):
    pass


class DegenerateVariance(AnalysisError):
    pass


@dataclass
class AnalysisConfig:
    nu: int = 30
    frame_cap: int = 2000
    branch: BranchSpec = field(default_factory=BranchSpec)
    prefix_audit: bool = True

    def __post_init__(self):
        if self.nu < 1:
            raise ValueError("nu must be >= 1")
        if self.frame_cap < 1:
            raise ValueError("frame_cap must be >= 1")


@dataclass(frozen=True)
class TraceRecord:
    initial_index: int
    steps: int
    first_violation_step: int | None
    total_reward: int
    safe: bool
    terminal_reason: str  # "terminal_state" | "frame_cap"


@dataclass
class AnalysisResult:
    property_id: str
    policy_id: str
    traces: list[TraceRecord]

    @property
    def degree_of_safety(self) -> Fraction:
        return degree_of_safety(self)

    @property
    def satisfied(self) -> bool:
        return all(t.safe for t in self.traces)

    @property
    def safe_count(self) -> int:
        return sum(t.safe for t in self.traces)

    @property
    def mean_reward(self) -> float:
        return statistics.fmean(t.total_reward for t in self.traces) if self.traces else 0.0


def degree_of_safety(result: AnalysisResult) -> Fraction:
    if not result.traces:
        raise AnalysisError("degree of safety needs at least one trace")
    return Fraction(result.safe_count, len(result.traces))


def normalised_reward(reward: float, r_random: float, r_reference: float) -> float:
    """``100 * (R - R_r) / (R_h - R_r)``."""
    if r_reference == r_random:
        raise DegenerateReference(f"reference and random scores coincide ({r_random})")
    return 100.0 * (reward - r_random) / (r_reference - r_random)


def pearson_correlation(points: Sequence[tuple[float, float]]) -> float:
    if len(points) < 2:
        raise DegenerateVariance("need at least two points")
    xs = [float(p[0]) for p in points]
    ys = [float(p[1]) for p in points]
    if len(set(xs)) < 2 or len(set(ys)) < 2:
        raise DegenerateVariance("both coordinates need non-zero variance")
    return statistics.correlation(xs, ys)


def distributions(results: Iterable[AnalysisResult], nu: int = 30) -> tuple[list[int], list[int]]:
    """Histogram of safe-trace counts per analysis (bins 0..nu), and a
    histogram over properties of how many policies satisfy each one."""
    results = list(results)
    width = max([nu] + [len(r.traces) for r in results])
    safety = [0] * (width + 1)
    by_prop: dict[str, int] = {}
    policies: set[str] = set()
    for r in results:
        safety[r.safe_count] += 1
        policies.add(r.policy_id)
        by_prop[r.property_id] = by_prop.get(r.property_id, 0) + int(r.satisfied)
    satisfied = [0] * (len(policies) + 1)
    for count in by_prop.values():
        satisfied[count] += 1
    return safety, satisfied


# -- rollouts ---------------------------------------------------------------

@dataclass
class _Fold:
    """Labeller chain for one property along one trace."""

    state: LabellerState
    first: int | None = None

    def feed(self, outcome, frame: int) -> bool:
        unsafe, acc = self.state.labeller.fold(self.state.acc, outcome)
        self.state = LabellerState(self.state.labeller, acc, self.state.kind)
        if unsafe and self.first is None:
            self.first = frame
        return unsafe


def initial_labellers(env: Env, init: InitSet, index: int, props: Sequence[Property], audit: bool) -> list[_Fold]:
    """Replay the start prefix from the reset state, folding every labeller.

    The env is left at ``init.snapshots[index]``.  With ``audit`` set, any
    unsafe label along the prefix raises :class:`PrefixViolation`.
    """
    env.reset()
    folds = [_Fold(init_labeller(p)) for p in props]
    violations = []
    out = env.peek()
    for k, a in enumerate((None,) + init.actions(index)):
        if a is not None:
            out = env.step(a)
        for p, f in zip(props, folds):
            if f.feed(out, k):
                violations.append((p.id, k))
    if audit and violations:
        pid, k = violations[0]
        raise PrefixViolation(f"unsafe label for {pid} at prefix frame {k} of initial state {index}")
    if env.save() != init.snapshots[index]:
        raise AnalysisError("prefix replay diverged from the enumerated initial state")
    for f in folds:
        f.first = None
    return folds


def rollout(
    env: Env,
    policy,
    folds: Sequence[_Fold],
    index: int,
    config: AnalysisConfig,
    choose: Callable | None = None,
) -> tuple[int, int, str]:
    """Run one trace from the env's current state.

    ``choose(env, order, decision, previous)`` may replace the policy's top
    action (the shield hooks in here).  Returns (frames, total reward, reason).
    """
    spec = config.branch
    rng = RngStream(spec.seed).split(index)
    policy.begin_trace(index)
    outcome = env.peek()
    frame = total = decision = 0
    previous = NOOP
    cap = config.frame_cap
    while frame < cap and not outcome.terminal:
        order = policy.act(outcome)
        action = order.ranked[0] if choose is None else choose(env, order, decision, previous, folds)
        effective, repeats = transform_action(spec, rng.at(decision), action, previous)
        decision += 1
        previous = effective
        for _ in range(repeats):
            outcome = env.step(effective)
            frame += 1
            total += outcome.reward
            for f in folds:
                f.feed(outcome, frame)
            if outcome.terminal or frame >= cap:
                break
    return frame, total, ("terminal_state" if outcome.terminal else "frame_cap")


def _records(index, frames, total, reason, folds) -> list[TraceRecord]:
    return [
        TraceRecord(index, frames, f.first, total, f.first is None, reason)
        for f in folds
    ]


def _trace_job(args) -> list[TraceRecord]:
    env_factory, policy, props, config, index, init = args
    env = env_factory()
    folds = initial_labellers(env, init, index, props, config.prefix_audit)
    frames, total, reason = rollout(env, policy, folds, index, config)
    return _records(index, frames, total, reason, folds)


def initial_set(env_factory, config: AnalysisConfig) -> InitSet:
    env = env_factory()
    prefix = config.branch.prefix if config.branch.mode == "human_start" else ()
    return enumerate_initials(env, config.nu, prefix)


def map_ordered(fn, jobs: Sequence, workers: int = 1) -> list:
    """Map in order; results are identical at any worker count."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def analyse_many(
    env_factory,
    policy,
    props: Sequence[Property],
    config: AnalysisConfig,
    policy_id: str = "",
    workers: int = 1,
    indices: Sequence[int] | None = None,
) -> list[AnalysisResult]:
    """One rollout per initial state, folding every property along it."""
    init = initial_set(env_factory, config)
    idx = range(config.nu) if indices is None else indices
    rows = map_ordered(_trace_job, [(env_factory, policy, list(props), config, i, init) for i in idx], workers)
    pid = policy_id or getattr(policy, "kind", "policy")
    return [AnalysisResult(p.id, pid, [r[k] for r in rows]) for k, p in enumerate(props)]


def analyse(env_factory, policy, prop: Property, config: AnalysisConfig, policy_id: str = "", workers: int = 1) -> AnalysisResult:
    return analyse_many(env_factory, policy, [prop], config, policy_id, workers)[0]


# -- report emitters --------------------------------------------------------

ANALYSIS_COLUMNS = ["property_id", "policy_id", "initial_index", "steps", "first_violation_step", "total_reward", "safe"]


def write_analysis_csv(path, results: Iterable[AnalysisResult]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ANALYSIS_COLUMNS)
        for r in results:
            for t in r.traces:
                w.writerow([
                    r.property_id, r.policy_id, t.initial_index, t.steps,
                    "" if t.first_violation_step is None else t.first_violation_step,
                    t.total_reward, int(t.safe),
                ])
