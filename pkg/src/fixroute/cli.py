"""Command-line entry point: ``fixroute <command> ...``.

Exit status is 0 when every expectation holds, 1 when one fails and 2 on
bad input.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from importlib import resources
from pathlib import Path

from .engine import InitialConfig, StopCondition, initialize, run
from .errors import FixRouteError
from .fileio import apply_profile_overrides, load_topology, parse_attacks, parse_schedule
from .graph import Mode, validate
from .oracle import fr, fsr
from .policy import make_commercial_profile, make_shortest_path_profile
from .schedule import ExplicitSchedule, FairRandomSchedule, SynchronousSchedule

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def _emit(lines, args):
    """Write text lines or ndjson records to --report (or stdout)."""
    out = open(args.report, "w", encoding="utf-8") if getattr(args, "report", None) else sys.stdout
    try:
        for item in lines:
            out.write((item if isinstance(item, str) else json.dumps(item)) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()


def _read(path):
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FixRouteError(f"cannot read {path}: {exc.strerror}") from None


def _load(args):
    graph = load_topology(args.topology)
    attacks = parse_attacks(_read(args.attack), graph) if args.attack else {}
    if args.profile == "commercial":
        prof = make_commercial_profile(graph, args.tie_seed, args.intra_class_order, args.peer_provider)
    else:
        prof = make_shortest_path_profile(graph, args.tie_seed, args.export)
    if args.policy:
        prof = apply_profile_overrides(_read(args.policy), graph, prof)
    return graph, prof, attacks


def _profile_flags(p):
    p.add_argument("--topology", required=True, help="topology file")
    p.add_argument("--attack", help="attack file")
    p.add_argument("--profile", choices=("shortest-path", "commercial"), default="shortest-path")
    p.add_argument("--policy", help="ranking/export override file")
    p.add_argument("--tie-seed", type=int, default=0)
    p.add_argument("--export", choices=("seeded", "all"), default="all",
                   help="shortest-path export filter (default: export everything)")
    p.add_argument("--intra-class-order", choices=("prefer_shorter", "seeded_arbitrary"),
                   default="prefer_shorter")
    p.add_argument("--peer-provider", choices=("peer_first", "provider_first", "merged"),
                   default="peer_first")


def _output_flags(p):
    p.add_argument("--report", help="write output here instead of stdout")
    p.add_argument("--format", choices=("text", "ndjson"), default="text")


def cmd_validate(args) -> int:
    graph = load_topology(args.topology)
    rep = validate(graph, Mode(args.mode))
    if args.format == "ndjson":
        recs = [{"kind": v.kind, "detail": v.message, "nodes": list(v.nodes)} for v in rep.violations]
        _emit(recs + [{"summary": {"ok": rep.ok, "violations": len(rep.violations)}}], args)
    else:
        lines = [f"{v.kind}: {v.message}" for v in rep.violations]
        _emit(lines + [f"{args.mode}: {'ok' if rep.ok else 'INVALID'}"], args)
    return EXIT_OK if rep.ok else EXIT_FAIL


def cmd_simulate(args) -> int:
    graph, prof, attacks = _load(args)
    state = initialize(graph, prof, attacks, InitialConfig.empty())
    if args.schedule:
        sched = ExplicitSchedule(parse_schedule(_read(args.schedule)), repeat=args.repeat)
    elif args.synchronous:
        sched = SynchronousSchedule()
    else:
        sched = FairRandomSchedule(args.seed)
    cycles = bool(args.schedule or args.synchronous)
    trace = run(state, sched, StopCondition(max_events=args.events_max, max_rounds=args.rounds_max,
                                            detect_cycles=cycles))
    if args.format == "ndjson":
        recs = list(trace.records())
        if trace.witness is not None:
            w = trace.witness
            recs.insert(-1, {"ev": "oscillation", "start": w.start_clock, "end": w.end_clock,
                             "cycle_length": w.cycle_length, "nodes": sorted(w.oscillating)})
        recs[-1]["trace_hash"] = trace.digest()
        _emit(recs, args)
    else:
        lines = list(trace.lines())
        if trace.witness is not None:
            w = trace.witness
            lines.insert(-1, f"oscillation start={w.start_clock} end={w.end_clock} "
                             f"cycle_length={w.cycle_length} nodes={','.join(map(str, sorted(w.oscillating)))}")
        lines.append(f"trace_hash {trace.digest()}")
        _emit(lines, args)
    if args.expect == "quiescent":
        return EXIT_OK if trace.quiescent else EXIT_FAIL
    if args.expect == "oscillation":
        return EXIT_OK if trace.witness is not None else EXIT_FAIL
    return EXIT_OK


def cmd_oracle(args) -> int:
    graph, prof, attacks = _load(args)
    algo = args.algorithm
    if algo == "auto":
        algo = "fr" if args.profile == "commercial" else "fsr"
    asg = (fr if algo == "fr" else fsr)(graph, prof, attacks, seed=args.seed)
    rows = asg.report(graph.destination)
    if args.format == "ndjson":
        _emit(rows + [{"summary": asg.meta}], args)
    else:
        _emit([f"{r['index']:>3} node={r['node']} route={r['route']} phase={r['phase']} bound={r['bound']}"
               for r in rows], args)
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .harness.experiment import build_scenario, sweep, write_repro_bundle

    if args.family == "sp":
        sizes = args.sizes or list(range(3, 11))
        attackers = args.attackers if args.attackers is not None else [0, 1, 2, 3]
    else:
        sizes = args.sizes or list(range(0, 5))
        attackers = args.attackers if args.attackers is not None else [0, 1, 2]
    t0 = time.perf_counter()
    rep = sweep(args.family, sizes, attackers, range(args.seed, args.seed + args.seeds), workers=args.workers,
                probe=not args.no_probe, determinism=not args.no_determinism, synchronous_check=True)
    rep.meta["seconds"] = round(time.perf_counter() - t0, 2)
    if args.repro_dir:
        for c in rep.failures:
            if c.params:
                p = c.params
                sc = build_scenario(p["family"], p["size"], p["attackers"], p["seed"])
                write_repro_bundle(sc, c, args.repro_dir)
    if args.format == "ndjson":
        _emit([c.record() for c in rep.cells] + [{"summary": rep.summary()}], args)
    else:
        lines = [f"FAIL {c.scenario} seed={c.seed} config={c.config}: {'; '.join(c.failures)}"
                 for c in rep.failures]
        s = rep.summary()
        lines.append(f"cells={s['cells']} failures={s['failures']} quiescent={s['quiescent']} "
                     f"oracle_mismatches={s['oracle_mismatches']} "
                     f"max_convergence_round={s['max_convergence_round']} seconds={s['seconds']}")
        _emit(lines, args)
    return EXIT_OK if rep.ok else EXIT_FAIL


def cmd_gadget(args) -> int:
    from .harness.experiment import run_cell
    from .harness.scenarios import bad_gadget_scenario

    clean = bad_gadget_scenario(attacked=False)
    attacked = bad_gadget_scenario(attacked=True)
    cells = [run_cell(clean, s, 0) for s in range(args.seed, args.seed + args.seeds)]
    cells += [run_cell(attacked, 0, ci) for ci in range(len(attacked.configs))]
    if args.format == "ndjson":
        _emit([c.record(clean.graph.destination) for c in cells], args)
    else:
        q = sum(c.quiescent and c.ok for c in cells[:args.seeds])
        lines = [f"clean: {q}/{args.seeds} seeds quiescent with 1,2,3 on direct routes"]
        for c in cells[args.seeds:]:
            lines.append(f"attacked ({c.config}): {c.status} {json.dumps(c.oscillation)}")
        lines += [f"FAIL {c.scenario} seed={c.seed}: {'; '.join(c.failures)}" for c in cells if not c.ok]
        _emit(lines, args)
    return EXIT_OK if all(c.ok for c in cells) else EXIT_FAIL


def bundled(name: str) -> str:
    """Path of a data file shipped with the package, e.g. ``bad_gadget.topo``."""
    return str(resources.files("fixroute") / "data" / name)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fixroute", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a topology for a policy mode")
    p.add_argument("--topology", required=True)
    p.add_argument("--mode", choices=[m.value for m in Mode], default="commercial")
    _output_flags(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="run the dynamics once")
    _profile_flags(p)
    p.add_argument("--schedule", help="explicit schedule file")
    p.add_argument("--repeat", action="store_true", help="loop the explicit schedule forever")
    p.add_argument("--synchronous", action="store_true", help="deliver all, activate all, repeat")
    p.add_argument("--seed", type=int, default=0, help="fair random schedule seed")
    p.add_argument("--rounds-max", type=int)
    p.add_argument("--events-max", type=int, default=200_000)
    p.add_argument("--expect", choices=("quiescent", "oscillation"))
    _output_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("oracle", help="predict the stable assignment")
    _profile_flags(p)
    p.add_argument("--algorithm", choices=("auto", "fsr", "fr"), default="auto")
    p.add_argument("--seed", type=int, default=0, help="tie-break seed for the fixing order")
    _output_flags(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("sweep", help="random instances against the round bounds and oracles")
    p.add_argument("--family", choices=("sp", "gr"), default="sp",
                   help="sp: shortest-path (sizes are node counts); gr: commercial (sizes are depths)")
    p.add_argument("--sizes", type=int, nargs="+")
    p.add_argument("--attackers", type=int, nargs="+")
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--seed", type=int, default=0, help="first seed")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-probe", action="store_true")
    p.add_argument("--no-determinism", action="store_true")
    p.add_argument("--repro-dir", help="write a bundle for each failing cell here")
    _output_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gadget", help="the destabilisation example, clean and attacked")
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    _output_flags(p)
    p.set_defaults(func=cmd_gadget)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FixRouteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
