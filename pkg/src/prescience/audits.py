"""Checks on the property suite itself: are the class tags and desiderata true?

Certificates are computed on the oracle's product graph; desiderata use
ordinary verifier analyses of the supplied policies.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from prescience.oracle import OracleBudgetExceeded, RefGame, RefLabel, initial_nodes, product_graph
from prescience.properties import Property
from prescience.verifier import AnalysisConfig, AnalysisResult, analyse, normalised_reward


@dataclass(frozen=True)
class ShallowCertificate:
    property_id: str
    window: int
    holds: bool | None  # None: oracle budget exceeded
    counterexample: tuple | None = None
    violating_sources: int = 0


def shallow_certificate(
    kind: str,
    params,
    prop: Property,
    window: int = 10,
    nu: int = 30,
    prefix=(),
    max_nodes: int = 2_000_000,
) -> ShallowCertificate:
    """Every reachable violation has an escape ``window`` frames earlier."""
    try:
        g = product_graph(kind, params, prop, nu, prefix, max_nodes)
    except OracleBudgetExceeded:
        return ShallowCertificate(prop.id, window, None)
    r = g.shallow_certificate(window)
    return ShallowCertificate(prop.id, window, r.holds, r.counterexample, r.violating_sources)


def certified_bound(kind: str, params, prop: Property, nu: int = 30, prefix=(), max_nodes: int = 2_000_000) -> int | None:
    """Least shield bound that provably keeps every trace safe (None if unsatisfiable from some start)."""
    return product_graph(kind, params, prop, nu, prefix, max_nodes).certified_bound()


@dataclass(frozen=True)
class MinimalCertificate:
    property_id: str
    holds: bool
    violating_high_scorers: tuple[tuple[int, float], ...] = ()  # (initial index, normalised reward)


def minimal_certificate(analysis: AnalysisResult, r_random: float, r_reference: float, level: float = 10.0) -> MinimalCertificate:
    """Holds iff every violating trace scores below ``level`` normalised reward."""
    high = tuple(
        (t.initial_index, normalised_reward(t.total_reward, r_random, r_reference))
        for t in analysis.traces
        if not t.safe and normalised_reward(t.total_reward, r_random, r_reference) >= level
    )
    return MinimalCertificate(analysis.property_id, not high, high)


@dataclass
class DesiderataReport:
    property_id: str
    satisfiable: bool
    non_trivial: bool
    reward_compatible: bool
    satisfiable_by_dying: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.satisfiable and self.non_trivial and self.reward_compatible


def oracle_satisfiable(kind: str, params, prop: Property, nu: int = 30, max_nodes: int = 2_000_000) -> bool | None:
    """Some initial state admits a policy that never violates."""
    try:
        g = product_graph(kind, params, prop, nu, (), max_nodes)
    except OracleBudgetExceeded:
        return None
    return any(g.viable(r) for r in g.roots)


def desiderata_audit(
    env_factory,
    prop: Property,
    policy_random,
    policy_expert,
    config: AnalysisConfig | None = None,
    policy_dying=None,
) -> DesiderataReport:
    """Desiderata 1-3 plus the degenerate "safe because the episode ended" flag."""
    # the property is under audit here, so a violation during the start prefix is data, not an error
    config = replace(config or AnalysisConfig(), prefix_audit=False)
    rnd = analyse(env_factory, policy_random, prop, config)
    exp = analyse(env_factory, policy_expert, prop, config)
    notes = []
    satisfiable = exp.safe_count > 0
    if not satisfiable:
        via = oracle_satisfiable(env_factory.kind, env_factory.params, prop, config.nu)
        satisfiable = bool(via)
        notes.append("satisfiable by oracle" if via else "no safe trace from expert or oracle")
    non_trivial = rnd.safe_count < len(rnd.traces)
    safe_expert = [t.total_reward for t in exp.traces if t.safe]
    reward_compatible = bool(safe_expert) and sum(safe_expert) / len(safe_expert) >= rnd.mean_reward
    dying = False
    if policy_dying is not None:
        d = analyse(env_factory, policy_dying, prop, config)
        ended = all(t.terminal_reason == "terminal_state" and t.steps < config.frame_cap for t in d.traces)
        dying = d.satisfied and ended
        if dying:
            notes.append("satisfied by a policy that ends the episode")
    return DesiderataReport(prop.id, satisfiable, non_trivial, reward_compatible, dying, notes)


@dataclass(frozen=True)
class PrefixAudit:
    property_id: str
    violations: tuple[tuple[int, int], ...]  # (initial index, prefix frame)

    @property
    def clean(self) -> bool:
        return not self.violations


def prefix_audit(kind: str, params, prop: Property, nu: int = 30, prefix=()) -> PrefixAudit:
    """Unsafe labels met while driving the no-op prefix to each initial state."""
    roots = initial_nodes(RefGame(kind, params), RefLabel(prop), nu, prefix)
    return PrefixAudit(prop.id, tuple(roots.prefix_violations))
