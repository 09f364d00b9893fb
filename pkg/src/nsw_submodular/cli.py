"""Command line entry point: ``nsw-submodular <command> ...``.

Exit codes: 0 success, 2 invalid input, 3 brute-force size limit exceeded,
4 internal invariant violation (including a failed ``check`` certificate).
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

from .errors import InstanceFormatError, InvariantViolation, NSWError, SizeLimitExceeded
from .generators import GENERATORS, generate_instance
from .instance import load_instance, save_instance
from .pipeline import PipelineConfig, check_command, compare_command, dumps_report, jsonable, run_pipeline
from .reference import BRUTE_FORCE_LIMIT, brute_force_nsw, golden_instances
from .relaxation import ALWAYS_SAMPLE, EXACT_WHEN_POSSIBLE, GreedyConfig

EXIT_OK, EXIT_INPUT, EXIT_SIZE, EXIT_INVARIANT = 0, 2, 3, 4


def _solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--delta", type=float, default=None, help="greedy step size (default 1/(4m))")
    p.add_argument("--samples", type=int, default=None, help="samples per multilinear estimate")
    p.add_argument("--gain-threshold", type=float, default=1 / 8)
    p.add_argument("--max-iters", type=int, default=64)
    p.add_argument("--estimator", choices=(EXACT_WHEN_POSSIBLE, ALWAYS_SAMPLE), default=EXACT_WHEN_POSSIBLE)
    p.add_argument("--c", type=float, default=1.0, help="large-item mass threshold")
    p.add_argument("--d", type=float, default=None, help="recombination parameter (default c+2)")
    p.add_argument("--trials", type=int, default=16)
    p.add_argument("--assign-leftovers", action="store_true")


def _out_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, default=None, help="write the JSON report here")


def _config(args) -> PipelineConfig:
    greedy = GreedyConfig(
        delta=args.delta,
        samples_per_estimate=args.samples,
        gain_threshold=args.gain_threshold,
        max_iterations=args.max_iters,
        estimator_mode=args.estimator,
    )
    return PipelineConfig(greedy=greedy, c=args.c, trials=args.trials, seed=args.seed, d=args.d,
                          assign_leftovers=args.assign_leftovers)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nsw-submodular", description="Nash social welfare for submodular valuations")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run the approximation algorithm")
    p.add_argument("instance", type=Path)
    _solver_flags(p)
    _out_flag(p)

    p = sub.add_parser("exact", help="brute-force optimum")
    p.add_argument("instance", type=Path)
    p.add_argument("--limit", type=int, default=BRUTE_FORCE_LIMIT)
    _out_flag(p)

    p = sub.add_parser("compare", help="solve and compare against the brute-force optimum")
    p.add_argument("instance", type=Path)
    p.add_argument("--limit", type=int, default=BRUTE_FORCE_LIMIT)
    _solver_flags(p)
    _out_flag(p)

    p = sub.add_parser("check", help="solve and run the rounding and rematching diagnostics")
    p.add_argument("instance", type=Path)
    p.add_argument("--limit", type=int, default=BRUTE_FORCE_LIMIT)
    _solver_flags(p)
    _out_flag(p)

    p = sub.add_parser("generate", help="write a seeded random instance")
    p.add_argument("family", choices=GENERATORS)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--density", type=float, default=None, help="coverage incidence density")
    p.add_argument("--out", type=Path, default=None, help="instance path (stdout when omitted)")

    p = sub.add_parser("bench", help="time the solver on the golden corpus or on generated instances")
    p.add_argument("--family", choices=GENERATORS[:-1], default=None,
                   help="benchmark generated instances of this family instead of the corpus")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--m", type=int, default=50)
    p.add_argument("--repeat", type=int, default=3)
    _solver_flags(p)
    _out_flag(p)
    return parser


def _emit(payload: dict, out: Path | None) -> None:
    text = dumps_report(payload)
    if out is not None:
        out.write_text(text)
    sys.stdout.write(text)


def _bench(args) -> dict:
    config = _config(args)
    rows = []
    if args.family is None:
        for case in golden_instances():
            t = time.perf_counter()
            rep = compare_command(case.instance, config)
            rows.append({"name": case.name, "seconds": time.perf_counter() - t, "ratio": rep["exact"]["ratio"]})
        ratios = [r["ratio"] for r in rows if r["ratio"] is not None]
        summary = {"instances": len(rows), "worst_ratio": min(ratios), "all_above_1_380": min(ratios) >= 1 / 380}
    else:
        for k in range(args.repeat):
            inst = generate_instance(args.family, args.n, args.m, seed=args.seed + k)
            t = time.perf_counter()
            rep = run_pipeline(inst, config)
            rows.append({"seed": args.seed + k, "seconds": time.perf_counter() - t, "log_nsw": rep["best"]["log_nsw"],
                         "iterations": rep["greedy_trace"]["iterations"] if rep["greedy_trace"] else 0})
        summary = {"instances": len(rows)}
    summary["total_seconds"] = math.fsum(r["seconds"] for r in rows)
    summary["max_seconds"] = max(r["seconds"] for r in rows)
    return {"summary": summary, "runs": rows}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "generate":
            params = {} if args.density is None else {"density": args.density}
            inst = generate_instance(args.family, args.n, args.m, seed=args.seed, **params)
            if args.out is None:
                sys.stdout.write(inst.dumps())
            else:
                save_instance(inst, args.out)
            return EXIT_OK
        if args.command == "bench":
            _emit(_bench(args), args.out)
            return EXIT_OK
        inst = load_instance(args.instance)
        if args.command == "exact":
            res = brute_force_nsw(inst, args.limit)
            _emit(res.to_dict(), args.out)
            return EXIT_OK
        config = _config(args)
        if args.command == "solve":
            _emit(run_pipeline(inst, config), args.out)
            return EXIT_OK
        if args.command == "compare":
            _emit(compare_command(inst, config, args.limit), args.out)
            return EXIT_OK
        report = check_command(inst, config, args.limit)
        _emit(report, args.out)
        return EXIT_OK if report["certificates"]["ok"] else EXIT_INVARIANT
    except SizeLimitExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIZE
    except InvariantViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        partial = getattr(exc, "partial", None)
        if isinstance(partial, dict):
            sys.stderr.write(json.dumps(jsonable({"partial_report": partial}), sort_keys=True) + "\n")
        return EXIT_INVARIANT
    except (InstanceFormatError, FileNotFoundError, IsADirectoryError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NSWError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
