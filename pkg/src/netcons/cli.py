"""Command line front end.

Exit codes: 0 success, 1 a single run did not converge, 2 usage or protocol
parse error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from . import harness
from .detectors import ConfigurationError, DetectorKind
from .engine import InvalidPopulationError, Simulation, draw_seed
from .protocols import (
    BUILTIN_NAMES,
    DEFAULT_HEAD_START,
    ProtocolParseError,
    builtin,
    check_protocol,
    format_protocol,
    parse_protocol_file,
    random_protocol,
)
from .schedulers import SchedulerConfig, SchedulerKind

EXIT_OK, EXIT_NOT_CONVERGED, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

SCHEDULERS = [k.value for k in SchedulerKind]
DETECTORS = [k.value for k in DetectorKind]


class UsageError(Exception):
    pass


def _add_protocol_flags(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--protocol", choices=BUILTIN_NAMES, help="built-in protocol")
    g.add_argument("--protocol-file", help="protocol in the text format")
    p.add_argument("--b", type=int, default=None,
                   help=f"counting head start (default {DEFAULT_HEAD_START})")
    p.add_argument("--detector", choices=DETECTORS, default=None,
                   help="termination detector (default: the protocol's own)")
    p.add_argument("--max-steps", type=int, default=None,
                   help="interaction budget (default 50 * f(n), capped at 5e9)")
    p.add_argument("--history-capacity", type=int, default=None,
                   help="partners remembered per node (default 50)")
    p.add_argument("--bias", type=float, default=None,
                   help="probability of the non-uniform branch "
                        "(defaults: history 0.75, reverse-history 0.25, connection 0.80)")
    p.add_argument("--json", action="store_true", help="machine-readable output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netcons", description="Simulate on/off network constructors."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a single simulation")
    _add_protocol_flags(p)
    p.add_argument("--scheduler", choices=SCHEDULERS, default="random")
    p.add_argument("--n", type=int, required=True, help="population size")
    p.add_argument("--seed", type=int, default=None,
                   help="RNG seed (default: drawn from entropy and printed)")
    p.add_argument("--trace", help="write the per-step event trace to this file")
    p.add_argument("--snapshot-every", type=int, default=None, metavar="K",
                   help="write a DOT snapshot every K steps")
    p.add_argument("--snapshot-dir", default=".", help="directory for DOT snapshots")
    p.add_argument("--alpha", type=float, default=None,
                   help="record the census and report the window where every "
                        "state has >= alpha * n nodes")

    p = sub.add_parser("batch", help="run a batch of experiments")
    p.add_argument("spec", nargs="?", help="experiment file (JSON); flags override it")
    _add_protocol_flags(p)
    p.add_argument("--scheduler", action="append", choices=SCHEDULERS, default=None,
                   help="scheduler; repeat for several")
    p.add_argument("--sizes", default=None, help="comma separated population sizes")
    p.add_argument("--reps", type=int, default=None, help="repetitions per size")
    p.add_argument("--seed", type=int, default=None, help="base seed")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("analyze", help="recompute the report from a results.csv")
    p.add_argument("results")
    p.add_argument("--complexity", choices=sorted(harness.COMPLEXITIES), default=None)
    p.add_argument("--threshold", type=float, default=None,
                   help="extra counting success threshold (fraction of n)")
    p.add_argument("--out", default=None, help="write report.json here")

    p = sub.add_parser("protocol-check", help="parse and lint a protocol file")
    p.add_argument("file")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("gen-protocol", help="print a random protocol")
    p.add_argument("--states", type=int, required=True, help="|Q|, between 2 and 16")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="write to this file instead of stdout")
    return parser


def _protocol(args):
    if args.protocol_file:
        try:
            text = Path(args.protocol_file).read_text()
        except OSError as e:
            raise OSError(f"cannot read {args.protocol_file}: {e.strerror}") from e
        return parse_protocol_file(text)
    name = args.protocol or "faster-global-line"
    b = DEFAULT_HEAD_START if args.b is None else args.b
    return builtin(name, b=b)


def _scheduler(kind, args) -> SchedulerConfig:
    return SchedulerConfig(kind=kind).with_overrides(
        history_capacity=args.history_capacity, bias=args.bias
    )


def cmd_run(args, out) -> int:
    protocol = _protocol(args)
    seed = args.seed
    if seed is None:
        seed = draw_seed()
        print(f"seed: {seed}", file=sys.stderr)
    detector = args.detector
    if args.alpha is not None and detector is None:
        detector = DetectorKind.NONE
    complexity = harness.DEFAULT_COMPLEXITY.get(protocol.name, "n^3")
    max_steps = args.max_steps or harness.default_max_steps(complexity, args.n)

    snap_dir = Path(args.snapshot_dir)

    def on_snapshot(step, dot):
        snap_dir.mkdir(parents=True, exist_ok=True)
        (snap_dir / f"snapshot-{seed}-{step}.dot").write_text(dot)

    trace = open(args.trace, "w") if args.trace else None
    try:
        sim = Simulation(
            protocol, args.n, _scheduler(args.scheduler, args), detector, seed,
            trace=trace, record_census=args.alpha is not None,
            snapshot_every=args.snapshot_every, on_snapshot=on_snapshot,
        )
        result = sim.run(max_steps)
    finally:
        if trace:
            trace.close()

    payload = asdict(result)
    payload.pop("census_trace")
    if result.leader_counters is not None:
        payload["r0_over_n"] = result.leader_counters[0] / result.n
    if args.alpha is not None:
        w = harness.census_window(result.census_trace, args.alpha, result.n)
        payload["census_window"] = asdict(w)
    if args.json:
        print(json.dumps(payload, sort_keys=True), file=out)
    else:
        for key in ("protocol", "scheduler", "detector", "n", "seed", "converged",
                    "total_interactions", "effective_interactions"):
            print(f"{key}: {payload[key]}", file=out)
        census = " ".join(f"{k}={v}" for k, v in result.final_census.items())
        print(f"final_census: {census}", file=out)
        if result.leader_counters is not None:
            r0, r1 = result.leader_counters
            print(f"b: {result.head_start}", file=out)
            print(f"r0: {r0}\nr1: {r1}\nr0/n: {r0 / result.n:.4f}", file=out)
        if "census_window" in payload:
            w = payload["census_window"]
            print(f"census_window: {w['window']} (W/n = {w['normalized']:.3f}, alpha = {w['alpha']})",
                  file=out)
    return EXIT_OK if result.converged or detector == DetectorKind.NONE else EXIT_NOT_CONVERGED


def _batch_spec(args) -> harness.ExperimentSpec:
    if args.spec:
        try:
            spec = harness.load_experiment(args.spec)
        except OSError as e:
            raise OSError(f"cannot read {args.spec}: {e.strerror}") from e
        except (ValueError, TypeError) as e:
            raise UsageError(f"bad experiment file {args.spec}: {e}") from e
    else:
        spec = harness.ExperimentSpec()
    updates = {
        "protocol": args.protocol,
        "protocol_file": args.protocol_file,
        "detector": args.detector,
        "b": args.b,
        "max_steps": args.max_steps,
        "reps": args.reps,
        "seed": args.seed,
        "history_capacity": args.history_capacity,
        "bias": args.bias,
        "schedulers": tuple(args.scheduler) if args.scheduler else None,
        "sizes": tuple(int(x) for x in args.sizes.split(",")) if args.sizes else None,
    }
    if args.protocol:
        updates["protocol_file"] = ""
    data = {**asdict(spec), **{k: v for k, v in updates.items() if v is not None}}
    return harness.ExperimentSpec(**data)


def cmd_batch(args, out) -> int:
    spec = _batch_spec(args)
    results = harness.run_batch(spec, workers=args.workers)
    report = harness.build_report(spec, results)
    csv_path, json_path = harness.write_results(results, report, args.out)
    if args.json:
        print(json.dumps(report, sort_keys=True), file=out)
    else:
        print(f"{len(results)} runs -> {csv_path}, {json_path}", file=out)
        _print_cells(report, out)
    return EXIT_OK


def _print_cells(report, out):
    print(f"f(n) = {report['complexity']} (natural log)", file=out)
    for c in report["cells"]:
        coef = "absent" if c["coefficient"] is None else f"{c['coefficient']:.4f}"
        print(f"  {c['scheduler']:>16} n={c['n']:<6} runs={c['runs']:<4} "
              f"excluded={c['excluded']:<3} T/f(n)={coef}", file=out)
    for sched, fit in report["fits"].items():
        print(f"  {sched:>16} exponent={fit['alpha']:.3f} r2={fit['r2']:.3f}", file=out)
    for t, rate in report.get("counting", {}).items():
        print(f"  r0 >= {t}n: {rate['rate']:.3f} [{rate['low']:.3f}, {rate['high']:.3f}]", file=out)


def cmd_analyze(args, out) -> int:
    results = harness.read_results_csv(args.results)
    if not results:
        complexity = args.complexity or "n^3"
    else:
        complexity = args.complexity or harness.DEFAULT_COMPLEXITY.get(results[0].protocol, "n^3")
    report = harness.estimate_coefficient(results, complexity).to_dict()
    if results and all(r.leader_counters is not None for r in results):
        thresholds = {0.5, 0.9} | ({args.threshold} if args.threshold else set())
        report["counting"] = {
            str(t): asdict(harness.counting_success_rate(results, t)) for t in sorted(thresholds)
        }
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    _print_cells(report, out)
    return EXIT_OK


def cmd_protocol_check(args, out) -> int:
    try:
        text = Path(args.file).read_text()
    except OSError as e:
        raise OSError(f"cannot read {args.file}: {e.strerror}") from e
    spec = parse_protocol_file(text)
    warnings = check_protocol(spec)
    if args.json:
        print(json.dumps({"name": spec.name, "states": len(spec.states),
                          "rules": len(spec.rules), "warnings": warnings}), file=out)
    else:
        print(f"OK {spec.name}: {len(spec.states)} states, {len(spec.rules)} rules", file=out)
        for w in warnings:
            print(f"warning: {w}", file=out)
    return EXIT_OK


def cmd_gen_protocol(args, out) -> int:
    seed = args.seed if args.seed is not None else draw_seed()
    text = format_protocol(random_protocol(args.states, seed))
    if args.out:
        Path(args.out).write_text(text)
    else:
        out.write(text)
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "batch": cmd_batch,
    "analyze": cmd_analyze,
    "protocol-check": cmd_protocol_check,
    "gen-protocol": cmd_gen_protocol,
}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args, out)
    except ProtocolParseError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, ConfigurationError, InvalidPopulationError, LookupError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
