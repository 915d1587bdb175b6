"""Batch front end: partition instance files, write partitions and run
records, and verify determinism across thread counts.

Exit codes: 0 balanced partition produced, 2 finished but imbalanced,
1 anything wrong with the input or flags (and verify-mode divergence).
"""

from __future__ import annotations

import argparse
import os
import sys
from fractions import Fraction
from pathlib import Path

from .config import PRESETS, apply_overrides, preset_config
from .io import (
    ParseError,
    RunRecord,
    append_run_record,
    assignment_digest,
    load_instance,
    write_partition,
)
from .parallel import WorkerPool
from .pipeline import partition


class _Parser(argparse.ArgumentParser):
    # spec'd exit code for usage errors is 1, not argparse's 2
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="detpart",
        description="Deterministic multilevel hypergraph partitioner "
                    "minimizing connectivity under a balance constraint.",
    )
    p.add_argument("-i", "--input", required=True,
                   help="instance file (hMetis .hgr or Metis .graph/.metis)")
    p.add_argument("-k", type=int, required=True, help="number of blocks")
    p.add_argument("-e", "--epsilon", default="0.03", metavar="EPS",
                   help="balance tolerance as a decimal string, e.g. 0.03")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: $DETPART_THREADS or 1)")
    p.add_argument("--preset", choices=PRESETS, default="detjet")
    p.add_argument("-o", "--output", metavar="FILE",
                   help="write the partition, one block id per line")
    p.add_argument("--json", metavar="FILE",
                   help="append a JSON-lines run record")
    p.add_argument("--set", action="append", default=[], dest="overrides",
                   metavar="SECTION.KEY=VALUE",
                   help="config override, repeatable")
    p.add_argument("--format", choices=("auto", "hmetis", "metis"),
                   default="auto")
    p.add_argument("--verify", action="store_true",
                   help="rerun over --thread-set x --repeats and compare "
                        "per-phase hashes instead of writing output")
    p.add_argument("--thread-set", default="1,2,4,8", metavar="T1,T2,...")
    p.add_argument("--repeats", type=int, default=2)
    return p


def _resolve_threads(value, parser):
    if value is None:
        env = os.environ.get("DETPART_THREADS", "").strip()
        value = int(env) if env else 1
    if value < 1:
        parser.error(f"threads must be >= 1, got {value}")
    return value


def _first_divergence(base_trace, trace):
    for (label_a, hash_a), (label_b, hash_b) in zip(base_trace, trace):
        if label_a != label_b:
            return f"{label_a} vs {label_b} (phase structure differs)"
        if hash_a != hash_b:
            return label_a
    if len(base_trace) != len(trace):
        return "trace length differs"
    return "final hash"  # traces agree but the assignments do not


def _verify(hg, k, epsilon, args, cfg, parser) -> int:
    try:
        thread_set = [int(t) for t in args.thread_set.split(",") if t.strip()]
    except ValueError:
        parser.error(f"bad --thread-set {args.thread_set!r}")
    if not thread_set or min(thread_set) < 1:
        parser.error(f"bad --thread-set {args.thread_set!r}")
    if args.repeats < 1:
        parser.error("repeats must be >= 1")

    baseline = None
    for threads in thread_set:
        for repeat in range(args.repeats):
            with WorkerPool(threads) as pool:
                result = partition(hg, k, epsilon, args.seed, cfg, pool)
            run = (result.state.assignment_hash(), result.trace)
            label = f"threads={threads} repeat={repeat}"
            if baseline is None:
                baseline = (run, label)
            elif run[0] != baseline[0][0] or run[1] != baseline[0][1]:
                phase = _first_divergence(baseline[0][1], run[1])
                print(f"DIVERGED: {label} differs from {baseline[1]} "
                      f"at phase {phase}")
                return 1
    digest = f"{baseline[0][0]:016x}"
    print(f"verified: {len(thread_set)} thread counts x {args.repeats} "
          f"repeats identical (partition hash {digest})")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.k < 1:
        parser.error(f"k must be >= 1, got {args.k}")
    try:
        epsilon = Fraction(args.epsilon)
    except (ValueError, ZeroDivisionError):
        parser.error(f"bad epsilon {args.epsilon!r}")
    if epsilon < 0:
        parser.error("epsilon must be >= 0")
    threads = _resolve_threads(args.threads, parser)

    try:
        cfg = preset_config(args.preset)
        cfg = apply_overrides(cfg, args.overrides)
    except ValueError as exc:
        parser.error(str(exc))

    try:
        hg = load_instance(args.input, args.format)
    except FileNotFoundError:
        print(f"detpart: input file not found: {args.input}",
              file=sys.stderr)
        return 1
    except (ParseError, ValueError, OSError) as exc:
        print(f"detpart: {args.input}: {exc}", file=sys.stderr)
        return 1

    if args.verify:
        return _verify(hg, args.k, epsilon, args, cfg, parser)

    with WorkerPool(threads) as pool:
        result = partition(hg, args.k, epsilon, args.seed, cfg, pool)
    state = result.state

    if args.output:
        write_partition(args.output, state.assignment)
    if args.json:
        record = RunRecord(
            instance=Path(args.input).name,
            k=args.k,
            epsilon=str(epsilon),
            seed=args.seed,
            threads=threads,
            preset=args.preset,
            metric=state.metric(),
            imbalance=str(state.imbalance()),
            balanced=state.is_balanced(),
            partition_hash=assignment_digest(state.assignment),
            timings={key: round(val, 6)
                     for key, val in result.timings.items()},
            config={"overrides": list(args.overrides)},
        )
        append_run_record(args.json, record)

    print(f"metric={state.metric()} imbalance={state.imbalance()} "
          f"balanced={state.is_balanced()} levels={result.num_levels} "
          f"time={result.timings['total']:.3f}s")
    return 0 if state.is_balanced() else 2


if __name__ == "__main__":
    sys.exit(main())
