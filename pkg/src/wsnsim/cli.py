"""Command-line entry point: ``wsnsim run|scaling|trace``."""

from __future__ import annotations

import argparse
import json
import random
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .coding import build_distribution, dump_stores, payload_for
from .dsa1 import JsonlTrace, run_dsa1
from .dsa2 import inference_csv, infer_all, run_dsa2
from .errors import ConfigError, IntegrityError, ScalingError
from .harness import ExperimentConfig, ScalingConfig, default_slots, emit, run_sweep, sample_network, verify_scaling

EXIT_OK, EXIT_CONFIG, EXIT_INTEGRITY = 0, 1, 2


def eta_grid(start: float, stop: float, step: float) -> tuple[float, ...]:
    if step <= 0:
        raise ConfigError("eta step must be > 0")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return tuple(round(start + i * step, 10) for i in range(max(count, 0)))


def _add_network_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alg", choices=("dsa1", "dsa2"), default="dsa1")
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--side", type=float, default=2.0)
    p.add_argument("--radius", type=float, default=0.7)
    p.add_argument("--dist", choices=("ideal", "robust"), default="ideal")
    p.add_argument("--c0", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=0.5)
    slots = p.add_mutually_exclusive_group()
    slots.add_argument("--m", type=int, default=None, help="slots per node, own slot included")
    slots.add_argument("--m-ratio", type=float, default=0.1, help="slots as a fraction of n")
    p.add_argument("--c-scale", type=float, default=1.0, help="global factor C for the DSA-II counter")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--next-hop", choices=("memory", "fresh"), default="memory")
    p.add_argument("--relay", choices=("unicast", "multicast"), default="unicast")
    p.add_argument("--strict-discard", action="store_true", help="drop duplicate packets instead of relaying them")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wsnsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="estimate decoding success over an eta grid")
    _add_network_args(run)
    run.add_argument("--config", type=Path, help="JSON experiment config; flags are ignored when given")
    run.add_argument("--eta-start", type=float, default=0.1)
    run.add_argument("--eta-stop", type=float, default=1.0)
    run.add_argument("--eta-step", type=float, default=0.1)
    run.add_argument("--trials", type=int, default=500, help="cap on trials per grid point")
    run.add_argument("--sample-frac", type=float, default=1.0)
    run.add_argument("--reuse-graph", action="store_true")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--out", type=Path, default=None, help="output file (stdout if omitted)")
    run.add_argument("--format", choices=("csv", "json"), default="csv")

    scaling = sub.add_parser("scaling", help="regress transmissions and depth against n")
    scaling.add_argument("--config", type=Path, required=True, help="JSON scaling config")
    scaling.add_argument("--out", type=Path, default=None)

    trace = sub.add_parser("trace", help="dump one dissemination as JSON lines")
    _add_network_args(trace)
    trace.add_argument("--out", type=Path, default=None, help="event log (stdout if omitted)")
    trace.add_argument("--stores", type=Path, default=None, help="write final node stores as JSON")
    trace.add_argument("--graph", type=Path, default=None, help="write the deployment as JSON")
    trace.add_argument("--inference", type=Path, default=None, help="write DSA-II counters as CSV")
    return parser


def _experiment_from_args(args) -> ExperimentConfig:
    if args.config is not None:
        return ExperimentConfig.from_dict(json.loads(args.config.read_text()))
    return ExperimentConfig(
        algorithm=args.alg, n=args.n, side=args.side, radius=args.radius, dist=args.dist,
        c0=args.c0, delta=args.delta, m=args.m, m_ratio=args.m_ratio, c_scale=args.c_scale,
        eta_grid=eta_grid(args.eta_start, args.eta_stop, args.eta_step), trials=args.trials,
        sample_frac=args.sample_frac, master_seed=args.seed, strict_discard=args.strict_discard,
        next_hop=args.next_hop, relay=args.relay, reuse_graph=args.reuse_graph, workers=args.workers)


def _write(text: str, path: Optional[Path]) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        try:
            path.write_text(text)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc


def cmd_run(args) -> int:
    config = _experiment_from_args(args)
    result = run_sweep(config)
    if args.out is None:
        _write(result.to_csv() if args.format == "csv" else result.to_json() + "\n", None)
    else:
        emit(result, args.out, args.format)
    return EXIT_OK


def cmd_scaling(args) -> int:
    cfg = ScalingConfig.from_dict(json.loads(args.config.read_text()))
    report = verify_scaling(cfg)
    _write(json.dumps(report.to_dict(), indent=1, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def cmd_trace(args) -> int:
    m = args.m if args.m is not None else default_slots(args.n, args.m_ratio)
    graph = sample_network(args.n, args.side, args.radius, args.seed, (0,))
    dist = build_distribution(args.dist, args.n, args.c0, args.delta)
    payloads = [payload_for(args.seed, i) for i in range(args.n)]
    rng = random.Random(args.seed)
    trace = JsonlTrace()
    engine = dict(strict_discard=args.strict_discard, next_hop=args.next_hop, relay=args.relay, trace=trace)
    if args.alg == "dsa1":
        report = run_dsa1(graph, payloads, m, dist, rng, **engine)
    else:
        report = run_dsa2(graph, payloads, m, dist, args.c_scale, rng, **engine)
        if args.inference is not None:
            _write(inference_csv(infer_all(graph, args.c_scale)), args.inference)
    _write(trace.dumps(), args.out)
    if args.stores is not None:
        _write(json.dumps(dump_stores(report.stores), indent=1) + "\n", args.stores)
    if args.graph is not None:
        graph.save(args.graph)
    print(json.dumps({"tx_count": report.tx_count, "rounds": report.rounds}), file=sys.stderr)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"run": cmd_run, "scaling": cmd_scaling, "trace": cmd_trace}
    try:
        return handlers[args.command](args)
    except (ConfigError, ScalingError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IntegrityError as exc:
        print(f"integrity violation: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except (OSError, json.JSONDecodeError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
