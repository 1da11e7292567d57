"""``prescience analyse|shield|sweep|train|oracle --config PATH [--jobs N] [--out DIR]``.

Exit codes: 0 success, 1 runtime failure, 2 configuration error, 3 some
oracle result unknown (budget exceeded).
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from prescience.agents import (
    SCRIPTS,
    GreedyQPolicy,
    MissingExpert,
    QTable,
    RandomPolicy,
    make_scripted,
    reference_scores,
    train_q,
)
from prescience.audits import desiderata_audit, minimal_certificate, prefix_audit
from prescience.config import ConfigError, EnvSpec, ExperimentConfig, PolicySpec, load_config
from prescience.oracle import OracleBudgetExceeded, product_graph
from prescience.shield import (
    ShieldResult,
    _shield_job,
    first_satisfied,
    stress_rows,
    sweep_bound,
    write_cost_csv,
    write_shield_csv,
)
from prescience.verifier import (
    AnalysisResult,
    DegenerateReference,
    DegenerateVariance,
    _trace_job,
    distributions,
    initial_set,
    map_ordered,
    normalised_reward,
    pearson_correlation,
    write_analysis_csv,
)

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_UNKNOWN = 0, 1, 2, 3


@dataclass
class ReportBundle:
    out: Path
    files: dict[str, Path] = field(default_factory=dict)
    tables: dict[str, list] = field(default_factory=dict)
    exit_code: int = EXIT_OK


# -- policies -------------------------------------------------------------------

_TABLES: dict[tuple, QTable] = {}


def trained_table(spec: EnvSpec, pspec: PolicySpec) -> QTable:
    if pspec.table:
        return QTable.load(pspec.table)
    t = pspec.train
    key = (spec.kind, json.dumps(spec.params, sort_keys=True), json.dumps(t.to_dict(), sort_keys=True))
    if key not in _TABLES:
        _TABLES[key] = train_q(
            spec.factory, t.episodes, t.epsilon, seed=t.seed, gamma=t.gamma, alpha=t.alpha,
            max_steps=t.max_steps, noop_starts=t.noop_starts,
        )
    return _TABLES[key]


def build_policy(spec: EnvSpec, pspec: PolicySpec):
    n = spec.factory().n_actions
    if pspec.kind == "random":
        return RandomPolicy(spec.kind, n, pspec.seed)
    if pspec.kind == "scripted":
        return make_scripted(spec.kind, pspec.name, spec.params)
    return GreedyQPolicy(spec.kind, trained_table(spec, pspec))


# -- shared helpers -----------------------------------------------------------------

def _write_rows(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.6f}"
    return str(x)


def _write_manifest(cfg: ExperimentConfig, out: Path, command: str, bundle: ReportBundle) -> None:
    m = cfg.manifest()
    m["command"] = command
    m["outputs"] = sorted(bundle.files)
    path = out / "manifest.json"
    path.write_text(json.dumps(m, indent=2, sort_keys=True) + "\n")
    bundle.files["manifest.json"] = path


def run_analyses(cfg: ExperimentConfig, jobs: int, policies_filter=None) -> list[tuple[EnvSpec, PolicySpec, list[AnalysisResult]]]:
    """Every (env, policy) pair against the env's properties, one pooled job per trace."""
    units = []
    work = []
    for spec in cfg.envs:
        props = cfg.properties.for_game(spec.kind)
        if not props:
            continue
        init = initial_set(spec.factory, cfg.analysis)
        for pspec in spec.policies:
            if policies_filter is not None and pspec.id not in policies_filter:
                continue
            pol = build_policy(spec, pspec)
            units.append((spec, pspec, props))
            work.extend((spec.factory, pol, props, cfg.analysis, i, init) for i in range(cfg.analysis.nu))
    rows = map_ordered(_trace_job, work, jobs)
    out = []
    nu = cfg.analysis.nu
    for u, (spec, pspec, props) in enumerate(units):
        chunk = rows[u * nu : (u + 1) * nu]
        out.append((spec, pspec, [AnalysisResult(p.id, pspec.id, [r[k] for r in chunk]) for k, p in enumerate(props)]))
    return out


def _references(cfg: ExperimentConfig) -> dict[str, tuple[float, float] | None]:
    refs = {}
    for spec in cfg.envs:
        try:
            rs = reference_scores(spec.factory, cfg.analysis.nu, cfg.analysis.frame_cap)
            refs[spec.kind] = (rs.r_random, rs.r_reference)
        except MissingExpert:
            refs[spec.kind] = None
    return refs


def _rn(refs, kind, reward):
    ref = refs.get(kind)
    if ref is None:
        return None
    try:
        return normalised_reward(reward, *ref)
    except DegenerateReference:
        return None


# -- commands -------------------------------------------------------------------

AGGREGATE_COLUMNS = [
    "env", "property_id", "class", "policy_id", "safe_count", "nu", "degree_of_safety",
    "mean_reward", "normalised_reward", "satisfied",
]


def cmd_analyse(cfg: ExperimentConfig, jobs: int = 1, out: Path | None = None) -> ReportBundle:
    out = Path(out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    bundle = ReportBundle(out)
    analyses = run_analyses(cfg, jobs)
    refs = _references(cfg)
    results = [r for _, _, rs in analyses for r in rs]
    bundle.files["analysis.csv"] = out / "analysis.csv"
    write_analysis_csv(bundle.files["analysis.csv"], results)
    agg = []
    points = []
    for spec, pspec, rs in analyses:
        for r in rs:
            rn = _rn(refs, spec.kind, r.mean_reward)
            dos = r.degree_of_safety
            agg.append([spec.kind, r.property_id, cfg.properties[r.property_id].cls, r.policy_id, r.safe_count,
                        len(r.traces), str(dos), _fmt(r.mean_reward), _fmt(rn), int(r.satisfied)])
            if rn is not None:
                points.append((spec.kind, r.property_id, r.policy_id, rn, float(dos)))
    _write_rows(out / "aggregate.csv", AGGREGATE_COLUMNS, agg)
    bundle.files["aggregate.csv"] = out / "aggregate.csv"
    bundle.tables["aggregate"] = agg
    safety, satisfied = distributions(results, cfg.analysis.nu)
    hist = [["safe_traces", b, c] for b, c in enumerate(safety)] + [["policies_satisfying", b, c] for b, c in enumerate(satisfied)]
    _write_rows(out / "histogram.csv", ["histogram", "bin", "count"], hist)
    bundle.files["histogram.csv"] = out / "histogram.csv"
    try:
        r = pearson_correlation([(p[3], p[4]) for p in points])
    except DegenerateVariance:
        r = None
    corr = [[k, pid, pol, _fmt(x), _fmt(y)] for k, pid, pol, x, y in points]
    corr.append(["*", "*", "pearson_r", _fmt(r), ""])
    _write_rows(out / "correlation.csv", ["env", "property_id", "policy_id", "normalised_reward", "degree_of_safety"], corr)
    bundle.files["correlation.csv"] = out / "correlation.csv"
    bundle.tables["correlation_r"] = [r]
    _write_manifest(cfg, out, "analyse", bundle)
    return bundle


SUMMARY_COLUMNS = [
    "env", "property_id", "class", "policy_id", "bound_H", "nu",
    "unshielded_safe", "shielded_safe", "unshielded_degree", "shielded_degree",
    "unshielded_mean_reward", "shielded_mean_reward", "reward_delta", "reward_delta_pct",
    "delta_tolerance", "within_tolerance",
    "overrides", "fallbacks", "budget_exhausted", "nodes_expanded", "simulator_steps", "cache_hits",
]


def cmd_shield(cfg: ExperimentConfig, jobs: int = 1, out: Path | None = None) -> ReportBundle:
    if cfg.shield is None:
        raise ConfigError("shield.bound_H", "the shield command needs a shield section with bound_H")
    out = Path(out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    bundle = ReportBundle(out)
    before = run_analyses(cfg, jobs, cfg.shield_policies)
    units = []
    work = []
    for spec, pspec, results in before:
        pol = build_policy(spec, pspec)
        init = initial_set(spec.factory, cfg.analysis)
        for r in results:
            prop = cfg.properties[r.property_id]
            units.append((spec, pspec, r))
            work.extend((spec.factory, pol, prop, cfg.analysis, cfg.shield, i, init) for i in range(cfg.analysis.nu))
    rows = map_ordered(_shield_job, work, jobs)
    nu = cfg.analysis.nu
    shielded: list[ShieldResult] = []
    summary = []
    for u, (spec, pspec, un) in enumerate(units):
        chunk = rows[u * nu : (u + 1) * nu]
        sr = ShieldResult(un.property_id, pspec.id, cfg.shield.bound_H, [t for t, _ in chunk], [s for _, s in chunk])
        shielded.append(sr)
        tot = sr.total
        delta = sr.mean_reward - un.mean_reward
        pct = None if un.mean_reward == 0 else 100.0 * delta / abs(un.mean_reward)
        tol = spec.calibration.get("reward_delta")
        within = "" if tol is None else int(sr.mean_reward >= un.mean_reward - tol)
        summary.append([
            spec.kind, un.property_id, cfg.properties[un.property_id].cls, pspec.id, cfg.shield.bound_H, nu,
            un.safe_count, sr.safe_count, str(un.degree_of_safety), str(sr.degree_of_safety),
            _fmt(un.mean_reward), _fmt(sr.mean_reward), _fmt(delta), _fmt(pct), _fmt(tol), within,
            tot.overrides, tot.fallbacks, tot.budget_exhausted, tot.nodes_expanded, tot.simulator_steps, tot.cache_hits,
        ])
    bundle.files["shield.csv"] = out / "shield.csv"
    write_shield_csv(bundle.files["shield.csv"], shielded)
    _write_rows(out / "shield_summary.csv", SUMMARY_COLUMNS, summary)
    bundle.files["shield_summary.csv"] = out / "shield_summary.csv"
    bundle.tables["summary"] = summary
    _write_manifest(cfg, out, "shield", bundle)
    return bundle


def cmd_sweep(cfg: ExperimentConfig, jobs: int = 1, out: Path | None = None) -> ReportBundle:
    if not cfg.sweep and not cfg.stress_bounds:
        raise ConfigError("sweep", "the sweep command needs sweep.scenarios or sweep.stress_bounds")
    out = Path(out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    bundle = ReportBundle(out)
    rows = []
    for i, sc in enumerate(cfg.sweep):
        try:
            spec = cfg.env(sc.env)
        except KeyError:
            raise ConfigError(f"sweep.scenarios[{i}].env", f"env {sc.env!r} is not configured") from None
        pspec = next((p for p in spec.policies if p.id == sc.policy), None)
        if pspec is None:
            raise ConfigError(f"sweep.scenarios[{i}].policy", f"policy {sc.policy!r} not configured for {sc.env}")
        pol = build_policy(spec, pspec)
        rows.extend(sweep_bound(spec.factory, pol, cfg.properties[sc.property], cfg.analysis, sc.bounds,
                                sc.memo_enabled, jobs, f"{sc.property}/{sc.policy}"))
    if cfg.stress_bounds:
        rows.extend(stress_rows(cfg.stress_bounds))
    write_cost_csv(out / "cost_by_bound.csv", rows, first_satisfied(rows))
    bundle.files["cost_by_bound.csv"] = out / "cost_by_bound.csv"
    bundle.tables["rows"] = rows
    bundle.tables["first_satisfied"] = [first_satisfied(rows)]
    _write_manifest(cfg, out, "sweep", bundle)
    return bundle


def cmd_train(cfg: ExperimentConfig, jobs: int = 1, out: Path | None = None) -> ReportBundle:
    out = Path(out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    bundle = ReportBundle(out)
    from prescience.agents import mean_reward

    summary = []
    for spec in cfg.envs:
        for pspec in spec.policies:
            if pspec.kind != "greedy_q":
                continue
            table = trained_table(spec, pspec)
            name = f"qtable_{spec.kind}.bin"
            table.save(out / name)
            bundle.files[name] = out / name
            reward = mean_reward(spec.factory, GreedyQPolicy(spec.kind, table), cfg.analysis)
            refs = _references(EnvOnly(cfg, spec))
            rn = _rn(refs, spec.kind, reward)
            t = pspec.train
            summary.append([spec.kind, t.episodes if t else "", t.seed if t else "", len(table.entries), _fmt(reward), _fmt(rn)])
            print(f"{spec.kind}: {len(table.entries)} states, mean reward {reward:.3f}, R_n {_fmt(rn) or 'n/a'}")
    _write_rows(out / "train_summary.csv", ["env", "episodes", "seed", "states", "mean_reward", "normalised_reward"], summary)
    bundle.files["train_summary.csv"] = out / "train_summary.csv"
    bundle.tables["summary"] = summary
    _write_manifest(cfg, out, "train", bundle)
    return bundle


class EnvOnly:
    """Config view restricted to one env (for reference scores)."""

    def __init__(self, cfg: ExperimentConfig, spec: EnvSpec):
        self.envs = [spec]
        self.analysis = cfg.analysis


ORACLE_COLUMNS = [
    "property_id", "class", "status", "states", "satisfiable", "certified_bound",
    "shallow_window", "shallow_holds", "shallow_counterexample", "minimal_holds", "prefix_clean",
    "desideratum_satisfiable", "desideratum_non_trivial", "desideratum_reward_compatible", "satisfiable_by_dying",
]


def cmd_oracle(cfg: ExperimentConfig, jobs: int = 1, out: Path | None = None) -> ReportBundle:
    out = Path(out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    bundle = ReportBundle(out)
    window = int(cfg.oracle.get("window", 10))
    max_nodes = int(cfg.oracle.get("max_nodes", 2_000_000))
    prefix = cfg.analysis.branch.prefix if cfg.analysis.branch.mode == "human_start" else ()
    analyses = {(s.kind, r.property_id, p.id): r for s, p, rs in run_analyses(cfg, jobs) for r in rs}
    refs = _references(cfg)
    rows = []
    unknown = False
    for spec in cfg.envs:
        for prop in cfg.properties.for_game(spec.kind):
            row = {"property_id": prop.id, "class": prop.cls, "shallow_window": window}
            try:
                g = product_graph(spec.kind, spec.params, prop, cfg.analysis.nu, prefix, max_nodes)
                sc = g.shallow_certificate(window)
                row.update(
                    status="ok", states=len(g), satisfiable=int(any(g.viable(r) for r in g.roots)),
                    certified_bound=g.certified_bound(), shallow_holds=int(sc.holds),
                    shallow_counterexample="" if sc.counterexample is None else repr(sc.counterexample),
                )
            except OracleBudgetExceeded:
                unknown = True
                row.update(status="unknown")
            row["prefix_clean"] = int(prefix_audit(spec.kind, spec.params, prop, cfg.analysis.nu, prefix).clean)
            ref = refs.get(spec.kind)
            if ref is not None and ref[0] != ref[1]:
                mins = [minimal_certificate(r, *ref) for (k, pid, _), r in analyses.items() if k == spec.kind and pid == prop.id]
                row["minimal_holds"] = int(all(m.holds for m in mins))
            try:
                rnd = next((build_policy(spec, p) for p in spec.policies if p.kind == "random"), None)
                if rnd is None:
                    rnd = RandomPolicy(spec.kind, spec.factory().n_actions, cfg.seed)
                expert = make_scripted(spec.kind, "expert", spec.params)
                dying = make_scripted(spec.kind, "kamikaze", spec.params) if (spec.kind, "kamikaze") in SCRIPTS else None
                d = desiderata_audit(spec.factory, prop, rnd, expert, cfg.analysis, dying)
                row.update(
                    desideratum_satisfiable=int(d.satisfiable), desideratum_non_trivial=int(d.non_trivial),
                    desideratum_reward_compatible=int(d.reward_compatible), satisfiable_by_dying=int(d.satisfiable_by_dying),
                )
            except MissingExpert:
                pass
            rows.append(row)
    _write_rows(out / "oracle.csv", ORACLE_COLUMNS, [[_fmt(r.get(c)) for c in ORACLE_COLUMNS] for r in rows])
    bundle.files["oracle.csv"] = out / "oracle.csv"
    bundle.tables["rows"] = rows
    bundle.exit_code = EXIT_UNKNOWN if unknown else EXIT_OK
    _write_manifest(cfg, out, "oracle", bundle)
    return bundle


COMMANDS = {"analyse": cmd_analyse, "shield": cmd_shield, "sweep": cmd_sweep, "train": cmd_train, "oracle": cmd_oracle}


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="prescience", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="experiment config JSON")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes (results are identical for any value)")
    parser.add_argument("--out", default=None, help="output directory (overrides output_dir)")
    args = parser.parse_args(argv)
    if args.jobs < 1:
        print("config error: --jobs: must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
        bundle = COMMANDS[args.command](cfg, args.jobs, Path(args.out) if args.out else None)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - report and map to the runtime exit code
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for name in sorted(bundle.files):
        print(bundle.files[name])
    return bundle.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
