"""Multilevel driver: coarsen, partition the coarsest hypergraph, then
project back up level by level, refining after every projection.

The trace records one (label, hash) pair per phase so two runs can be
compared phase by phase; labels are "coarsening", "initial", then
"L<level>/jet_t<i>" per level and "L0/flow_r<i>" for the flow rounds,
with L0 the input level.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from time import perf_counter

import numpy as np

from .coarsening import coarsen_to_limit
from .config import Config
from .flows import schedule_kway
from .hypergraph import Hypergraph, PartitionState
from .initial import initial_partition
from .jet import jet_refine
from .parallel import WorkerPool
from .vecops import fnv1a64, hash_u64

_SALT_LEVEL = 0x1E7E1


@dataclass
class RunResult:
    state: PartitionState
    timings: dict[str, float]
    trace: list[tuple[str, int]]
    num_levels: int


def _hierarchy_hash(levels) -> int:
    parts = [np.atleast_1d(np.int64(len(levels)))]
    for hg_c, mapping in levels:
        parts.append(mapping.astype(np.int64))
        parts.append(np.array(
            [hg_c.num_vertices, hg_c.num_edges], dtype=np.int64))
    return fnv1a64(np.concatenate(parts))


def partition(
    hg: Hypergraph,
    k: int,
    epsilon,
    seed: int = 1,
    cfg: Config | None = None,
    pool: WorkerPool | None = None,
) -> RunResult:
    """Partition `hg` into k blocks under the epsilon balance tolerance.

    The result is a pure function of (hg, k, epsilon, seed, cfg); the
    pool size never changes it. The returned state can be imbalanced
    only when no balanced partition was found at all (callers decide
    how loudly to fail).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    epsilon = Fraction(epsilon)
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    cfg = cfg if cfg is not None else Config()

    timings = {"coarsening": 0.0, "initial": 0.0, "jet": 0.0,
               "flows": 0.0, "rebalance": 0.0}
    trace: list[tuple[str, int]] = []
    started = perf_counter()
    flow_deadline = started + cfg.flows.time_budget_s

    t0 = perf_counter()
    levels = coarsen_to_limit(hg, k, cfg.coarsening, seed, pool)
    timings["coarsening"] = perf_counter() - t0
    trace.append(("coarsening", _hierarchy_hash(levels)))

    hgs = [hg] + [lvl for lvl, _ in levels]

    t0 = perf_counter()
    state = initial_partition(hgs[-1], k, epsilon, seed, cfg.initial, pool)
    timings["initial"] = perf_counter() - t0
    trace.append(("initial", state.assignment_hash()))

    for i in range(len(levels), -1, -1):
        tag = f"L{i}/"
        sub: dict[str, float] = {}
        t0 = perf_counter()
        jet_refine(state, cfg.jet, pool, timings=sub, trace=trace, tag=tag)
        jet_wall = perf_counter() - t0
        rebalance_part = sub.get("rebalance", 0.0)
        timings["jet"] += jet_wall - rebalance_part
        timings["rebalance"] += rebalance_part
        if i > 0:
            mapping = levels[i - 1][1]
            coarse_metric = state.metric()
            state = PartitionState(
                hgs[i - 1], k, epsilon, state.assignment[mapping]
            )
            assert state.metric() == coarse_metric, (
                "projection changed the metric"
            )

    # flow refinement runs once, on the input-level partition the jet
    # schedule has finished with: it can only improve the final result,
    # so the flows preset is never worse than the jet preset on the
    # same input. Running it at coarser levels too would feed different
    # states into the finer jet passes and void that guarantee.
    if cfg.flows.enabled:
        t0 = perf_counter()
        schedule_kway(
            state, cfg.flows, hash_u64(seed, _SALT_LEVEL, 0),
            pool, trace, "L0/", flow_deadline,
        )
        timings["flows"] += perf_counter() - t0

    timings["total"] = perf_counter() - started
    return RunResult(state, timings, trace, len(levels))
