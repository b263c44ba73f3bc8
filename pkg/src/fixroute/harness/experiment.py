"""Batch runs: simulate, compare against the oracle, check invariants, report."""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..attack import SILENCE
from ..engine import StopCondition, initialize, run
from ..errors import FixRouteError
from ..fileio import dump_attacks, dump_schedule, dump_topology
from ..oracle import fr, fsr
from ..route import format_route, is_simple
from ..schedule import ExplicitSchedule, FairRandomSchedule, SynchronousSchedule
from .generators import commercial_instance_for_depth, random_shortest_path_instance
from .scenarios import Scenario

PROBE_EVENTS = 1000


@dataclass
class CellResult:
    scenario: str
    seed: int
    config: str
    status: str
    convergence_round: int
    rounds: int
    events: int
    dropped: int
    digest: str
    final: dict
    stabilization: dict = field(default_factory=dict)
    bound: int | None = None
    node_bounds: dict | None = None
    oracle_match: bool | None = None
    mismatches: dict = field(default_factory=dict)
    invariant_errors: list = field(default_factory=list)
    deterministic: bool | None = None
    probe_stable: bool | None = None
    oscillation: dict | None = None
    seconds: float = 0.0
    failures: list = field(default_factory=list)
    params: dict | None = None  # generator arguments, for sweep cells

    @property
    def quiescent(self) -> bool:
        return self.status == "quiescent"

    @property
    def ok(self) -> bool:
        return not self.failures

    def record(self, destination=None) -> dict:
        fmt = lambda r: format_route(r, destination)
        rec = asdict(self)
        rec["final"] = {str(n): fmt(r) for n, r in sorted(self.final.items())}
        rec["stabilization"] = {str(n): r for n, r in sorted(self.stabilization.items())}
        rec["node_bounds"] = None if self.node_bounds is None else \
            {str(n): b for n, b in sorted(self.node_bounds.items())}
        rec["mismatches"] = {str(n): [fmt(a), fmt(b)] for n, (a, b) in sorted(self.mismatches.items())}
        rec["quiescent"] = self.quiescent
        rec["ok"] = self.ok
        return rec


@dataclass
class ExperimentReport:
    cells: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def failures(self) -> list:
        return [c for c in self.cells if not c.ok]

    @property
    def ok(self) -> bool:
        return bool(self.cells) and not self.failures

    def summary(self) -> dict:
        n = len(self.cells)
        worst = {}
        for c in self.cells:
            if c.bound is not None:
                key = c.scenario.rsplit("-s", 1)[0]
                worst[key] = max(worst.get(key, 0), c.convergence_round)
        return {"cells": n, "failures": len(self.failures),
                "quiescent": sum(c.quiescent for c in self.cells),
                "oracle_mismatches": sum(c.oracle_match is False for c in self.cells),
                "max_convergence_round": max((c.convergence_round for c in self.cells), default=0),
                "worst_by_family": worst, **self.meta}

    def write_ndjson(self, path, destination_of=None):
        with open(path, "w", encoding="utf-8") as fh:
            for c in self.cells:
                d = destination_of(c) if destination_of else None
                fh.write(json.dumps(c.record(d)) + "\n")
            fh.write(json.dumps({"summary": self.summary()}) + "\n")


def oracle_for(scenario: Scenario, seed: int = 0):
    if scenario.oracle == "fsr":
        return fsr(scenario.graph, scenario.profile, scenario.attacks, seed=seed)
    if scenario.oracle == "fr":
        return fr(scenario.graph, scenario.profile, scenario.attacks, seed=seed)
    return None


def _route_errors(scenario: Scenario, trace) -> list:
    g = scenario.graph
    d = g.destination
    errs = []
    for clk, node, route, _ in trace.changes:
        if not route:
            continue
        if route[0] != node or route[-1] != d or not is_simple(route) or not g.has_edge(node, route[1]):
            errs.append(f"t={clk} node {node} selected malformed route {route}")
    return errs


def _attacker_errors(scenario: Scenario, state, digests) -> list:
    errs = []
    for a, att in scenario.attacks.items():
        if att.digest() != digests[a]:
            errs.append(f"attack of {a} changed during the run")
        for j in state.out_edges[a]:
            want = att.announcements.get(j, SILENCE)
            seen = [m[1] for m in state.channels[(a, j)]]
            held = state.rib_in[j][a]
            if held[0] >= 0:
                seen.append(held[1])
            box = state.inbox[j].get(a)
            if box is not None:
                seen.append(box[1])
            for c in seen:
                if want is SILENCE or c != want:
                    errs.append(f"attacker {a} delivered {c} to {j}, expected {want}")
    return errs


def _simulate(scenario, config, schedule, stop):
    st = initialize(scenario.graph, scenario.profile, scenario.attacks, config)
    return st, run(st, schedule, stop)


def _schedule_for(scenario: Scenario, seed: int):
    if scenario.schedules:
        return ExplicitSchedule(scenario.schedules[seed % len(scenario.schedules)], repeat=True)
    return FairRandomSchedule(seed)


def run_cell(scenario: Scenario, seed: int, config_index: int = 0, *, assignment=None,
             max_events: int = 200_000, max_rounds: int | None = None, determinism: bool = False,
             probe: bool = True, synchronous_check: bool = False) -> CellResult:
    """One (scenario, schedule seed, initial configuration) cell."""
    t0 = time.perf_counter()
    cfg = scenario.configs[config_index]
    explicit = bool(scenario.schedules)
    if max_rounds is None and scenario.bound is not None:
        max_rounds = 3 * scenario.bound + 12
    stop = StopCondition(max_events=max_events, max_rounds=max_rounds, detect_cycles=explicit)
    digests = {a: att.digest() for a, att in scenario.attacks.items()}
    state, trace = _simulate(scenario, cfg, _schedule_for(scenario, seed), stop)
    res = CellResult(scenario.name, seed, cfg.name, trace.status, trace.convergence_round(),
                     len(trace.boundaries), trace.clock, trace.dropped, trace.digest(), dict(trace.final),
                     trace.stabilization_rounds(), scenario.bound)
    res.invariant_errors = _route_errors(scenario, trace) + _attacker_errors(scenario, state, digests)
    if trace.witness is not None:
        w = trace.witness
        res.oscillation = {"start": w.start_clock, "end": w.end_clock, "cycle_length": w.cycle_length,
                           "nodes": sorted(w.oscillating)}
    if assignment is not None:
        res.node_bounds = dict(assignment.bound)
        res.mismatches = {n: (trace.final.get(n), r) for n, r in assignment.routes.items()
                          if trace.final.get(n) != r}
        res.oracle_match = res.quiescent and not res.mismatches
    if probe and res.quiescent:
        sub = state.copy()
        ptrace = run(sub, FairRandomSchedule(seed + 7919),
                     StopCondition(quiescence=False, max_events=PROBE_EVENTS, record_events=False))
        res.probe_stable = not ptrace.changes
    if determinism:
        _, again = _simulate(scenario, cfg, _schedule_for(scenario, seed), stop)
        res.deterministic = again.digest() == trace.digest()
    if synchronous_check:
        _, sync = _simulate(scenario, cfg, SynchronousSchedule(),
                            StopCondition(max_events=max_events, detect_cycles=True))
        if sync.witness is not None:
            res.failures.append(f"synchronous schedule oscillates over {sorted(sync.witness.oscillating)}")
    res.failures.extend(_judge(scenario, res))
    res.seconds = time.perf_counter() - t0
    return res


def _judge(scenario: Scenario, res: CellResult) -> list:
    out = list(res.invariant_errors)
    for exp in scenario.expectations:
        kind = exp[0]
        if kind == "converges_within":
            if not res.quiescent:
                out.append(f"did not quiesce ({res.status})")
            elif exp[1] is not None and res.convergence_round > exp[1]:
                out.append(f"converged in round {res.convergence_round} > bound {exp[1]}")
            if res.node_bounds:
                late = {n: (r, res.node_bounds[n]) for n, r in res.stabilization.items()
                        if n in res.node_bounds and r > res.node_bounds[n]}
                if late:
                    out.append(f"nodes stabilised after their bound: {late}")
        elif kind == "oracle_match":
            if res.oracle_match is False:
                out.append(f"final state disagrees with oracle at {sorted(res.mismatches)}")
        elif kind == "oscillates":
            if res.oscillation is None:
                out.append(f"expected an oscillation, run ended {res.status}")
        expected = scenario.meta.get("expected_final")
        if kind == "converges_within" and expected:
            wrong = {n: r for n, r in expected.items() if res.final.get(n) != r}
            if wrong:
                out.append(f"unexpected final routes at {sorted(wrong)}")
    if res.probe_stable is False:
        out.append("selection changed after quiescence was declared")
    if res.deterministic is False:
        out.append("rerun with the same seed produced a different trace")
    return out


def run_experiment(scenario: Scenario, seeds, configs=None, **kw) -> ExperimentReport:
    """All (seed, config) cells of one scenario; the oracle runs once."""
    assignment = oracle_for(scenario)
    rep = ExperimentReport(meta={"scenario": scenario.name})
    idxs = range(len(scenario.configs)) if configs is None else configs
    for seed in seeds:
        for ci in idxs:
            rep.cells.append(run_cell(scenario, seed, ci, assignment=assignment, **kw))
    return rep


def build_scenario(family: str, size: int, attackers: int, seed: int) -> Scenario:
    """``family`` is ``"sp"`` (size = source count) or ``"gr"`` (size = hierarchy depth)."""
    if family == "sp":
        return random_shortest_path_instance(size, attackers, seed=seed)
    if family == "gr":
        return commercial_instance_for_depth(size, attackers, seed)
    raise FixRouteError(f"unknown family {family!r}")


def _sweep_job(args):
    family, size, attackers, seed, kw = args
    sc = build_scenario(family, size, attackers, seed)
    try:
        rep = run_experiment(sc, [seed], **kw)
    except FixRouteError as exc:
        cell = CellResult(sc.name, seed, "-", "error", 0, 0, 0, 0, "", {})
        cell.failures.append(f"{type(exc).__name__}: {exc}")
        rep = ExperimentReport([cell])
    for c in rep.cells:
        c.params = {"family": family, "size": size, "attackers": attackers, "seed": seed}
    return rep.cells


def sweep(family: str, sizes, attacker_counts, seeds, workers: int = 1, **kw) -> ExperimentReport:
    """Grid over sizes, attacker counts and seeds; one instance per seed, all initial configs."""
    jobs = [(family, s, a, seed, kw) for s in sizes for a in attacker_counts for seed in seeds
            if family != "sp" or a <= s]
    rep = ExperimentReport(meta={"family": family, "sizes": list(sizes),
                                 "attackers": list(attacker_counts), "seeds": len(list(seeds))})
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            for cells in pool.map(_sweep_job, jobs, chunksize=4):
                rep.cells.extend(cells)
    else:
        for j in jobs:
            rep.cells.extend(_sweep_job(j))
    return rep


def write_repro_bundle(scenario: Scenario, cell: CellResult, directory) -> Path:
    """Files that reproduce one cell: the instance, the cell record with its
    trace hash, and the command that reruns it."""
    out = Path(directory) / f"{cell.scenario}-seed{cell.seed}-{cell.config}"
    out.mkdir(parents=True, exist_ok=True)
    (out / "topology.txt").write_text(dump_topology(scenario.graph), encoding="utf-8")
    (out / "attacks.txt").write_text(dump_attacks(scenario.attacks, scenario.graph), encoding="utf-8")
    if scenario.schedules:
        (out / "schedule.txt").write_text(dump_schedule(scenario.schedules[0]), encoding="utf-8")
    (out / "cell.json").write_text(json.dumps(cell.record(scenario.graph.destination), indent=2),
                                   encoding="utf-8")
    if cell.params:
        p = cell.params
        cmd = (f"fixroute sweep --family {p['family']} --sizes {p['size']} --attackers {p['attackers']} "
               f"--seed {p['seed']} --seeds 1 --format ndjson\n")
        (out / "rerun.sh").write_text(cmd, encoding="utf-8")
    return out


def rerun_cell(cell: CellResult, **kw) -> CellResult:
    """Re-execute a sweep cell from its recorded parameters."""
    p = cell.params
    sc = build_scenario(p["family"], p["size"], p["attackers"], p["seed"])
    names = [c.name for c in sc.configs]
    return run_cell(sc, cell.seed, names.index(cell.config), assignment=oracle_for(sc), **kw)


@dataclass
class WitnessAudit:
    checked: int = 0
    violations: list = field(default_factory=list)
    walk_errors: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations and not self.walk_errors


def audit_witnesses(scenario: Scenario, audit: WitnessAudit | None = None) -> WitnessAudit:
    """Run FR with a hook that checks every node it fixes directly: its best
    perceivable route has the phase's class and leaves through a fixed node."""
    from ..errors import ModelViolation
    from ..policy import RouteClass

    audit = audit or WitnessAudit()
    wanted = {"FCR": RouteClass.CUSTOMER, "FPeeR": RouteClass.PEER, "FPrvR": RouteClass.PROVIDER}

    def hook(phase, st, j):
        audit.checked += 1
        best = st.best(j)
        if j in st.fixed_nodes:
            audit.violations.append(f"{scenario.name}: {phase} picked fixed node {j}")
        elif not best or st.route_class(best) is not wanted[phase]:
            audit.violations.append(f"{scenario.name}: {phase} picked {j} with best route {best}")
        elif best[1] not in st.fixed_nodes:
            audit.violations.append(f"{scenario.name}: {phase} picked {j} whose next hop {best[1]} is unfixed")

    try:
        fr(scenario.graph, scenario.profile, scenario.attacks, on_fix=hook)
    except ModelViolation as exc:
        audit.walk_errors.append(f"{scenario.name}: {exc}")
    return audit
