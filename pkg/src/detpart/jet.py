"""Unconstrained batch refinement with afterburner filtering and a
deterministic rebalancer.

One refinement iteration selects move candidates whose gain passes a
temperature-controlled filter, re-evaluates them against each other with
a per-edge sequential simulation (the afterburner), applies the
survivors synchronously, and restores balance. A temperature schedule
runs several such phases from permissive to strict; each phase keeps a
best-balanced snapshot and rolls back to it at the end, so the metric of
a balanced input never degrades.

Everything is integer arithmetic; the inner loops are compiled chunk
kernels working on ranges whose boundaries depend only on the workload,
making the result independent of thread count.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from time import perf_counter

import numpy as np

from ._kernels import (
    candidate_kernel,
    rebalance_targets_kernel,
    simulate_groups_kernel,
)
from .hypergraph import PartitionState
from .parallel import WorkerPool
from .vecops import (
    balanced_chunks,
    group_bounds,
    ragged_gather,
    segment_cumsum,
    segment_sum,
)

_INT64_MIN = np.iinfo(np.int64).min
# quantization for negative-priority sort keys; equal-key runs are
# re-sorted with exact Fractions, so the scale only affects speed
_PRIORITY_SCALE = 1 << 20
_PRIORITY_CLAMP = 1 << 61
_MAX_REBALANCE_ROUNDS = 64

# test seam: when set, called as hook(gains, threads) after candidate
# gains are computed; lets tests inject thread-dependent corruption to
# prove the determinism verifier catches it
_gain_perturbation_hook = None


@dataclass
class JetConfig:
    temperatures: tuple[Fraction, ...] = (
        Fraction(3, 4), Fraction(3, 8), Fraction(0),
    )
    max_nonimproving: int = 8
    deadzone_factor: Fraction = Fraction(1, 10)
    lock_moves: bool = True

    def __post_init__(self):
        if not self.temperatures:
            raise ValueError("temperature schedule must be nonempty")
        temps = [Fraction(t) for t in self.temperatures]
        for t in temps:
            if not 0 <= t <= 1:
                raise ValueError(f"temperature {t} outside [0, 1]")
        if any(a < b for a, b in zip(temps, temps[1:])):
            raise ValueError("temperature schedule must be nonincreasing")
        self.temperatures = tuple(temps)
        if self.max_nonimproving < 1:
            raise ValueError("max_nonimproving must be >= 1")
        self.deadzone_factor = Fraction(self.deadzone_factor)
        if self.deadzone_factor < 0:
            raise ValueError("deadzone factor must be >= 0")


@dataclass
class MoveCandidateSet:
    vertices: np.ndarray  # int32, ascending
    targets: np.ndarray   # int32
    gains: np.ndarray     # int64, toward targets

    def __len__(self) -> int:
        return len(self.vertices)


def _chunk_bounds(state: PartitionState, verts: np.ndarray) -> list:
    """Fixed vertex-range chunks of ~equal incidence-slot counts."""
    degs = state.hg.degrees[verts].astype(np.int64)
    cum = np.cumsum(np.maximum(degs, 1))
    slot_budget = max(8192, (1 << 21) // state.k)
    return balanced_chunks(cum, slot_budget)


def _candidate_chunk(state, verts, tau_num, tau_den):
    """Candidates among `verts`: best target, filter, gains, penalty."""
    hg = state.hg
    targets, gains, qualifies = candidate_kernel(
        hg.inc_offsets, hg.inc_edges, hg.edge_weights, state.pin_counts,
        state.assignment, verts, tau_num, tau_den,
    )
    return verts[qualifies], targets[qualifies], gains[qualifies]


def compute_move_candidates(
    state: PartitionState,
    tau: Fraction,
    locks: np.ndarray | None = None,
    pool: WorkerPool | None = None,
) -> MoveCandidateSet:
    """Unconstrained move candidates under temperature `tau`.

    Each unlocked vertex gets the target block maximizing its gain (ties
    to the smaller block id, own block excluded) and survives iff
    gain >= -tau * (weight of incident edges with more than one pin in
    the vertex's block). Balance is ignored here.

    For tau < 1 only boundary vertices are scanned: an interior vertex
    has gain = -penalty, which fails the filter whenever penalty > 0,
    and the penalty == 0 case (all incident edges single-pin) reaches
    the afterburner with recomputed gain exactly 0 and is dropped there,
    so the restriction never changes the applied moves.
    """
    tau = Fraction(tau)
    if state.k < 2:
        empty = np.zeros(0, dtype=np.int32)
        return MoveCandidateSet(empty, empty.copy(), empty.astype(np.int64))
    if tau < 1:
        verts = state.boundary_vertices()
    else:
        verts = np.flatnonzero(state.hg.degrees > 0).astype(np.int32)
    if locks is not None and len(verts):
        verts = verts[~locks[verts]]
    if len(verts) == 0:
        empty = np.zeros(0, dtype=np.int32)
        return MoveCandidateSet(empty, empty.copy(), empty.astype(np.int64))

    num, den = tau.numerator, tau.denominator
    chunks = _chunk_bounds(state, verts)
    if pool is None or pool.threads == 1 or len(chunks) == 1:
        parts = [
            _candidate_chunk(state, verts[a:b], num, den) for a, b in chunks
        ]
    else:
        parts = pool.map(
            lambda ab: _candidate_chunk(state, verts[ab[0]:ab[1]], num, den),
            chunks,
        )
    vs = np.concatenate([p[0] for p in parts])
    ts = np.concatenate([p[1] for p in parts])
    gs = np.concatenate([p[2] for p in parts])
    if _gain_perturbation_hook is not None:
        gs = _gain_perturbation_hook(
            gs, pool.threads if pool is not None else 1
        )
    return MoveCandidateSet(vs, ts, gs)


def _afterburner_multi(state, e_m, v_m, g_m, t_m, pool):
    """Recomputed-gain contributions from edges with several candidates.

    Sorts members by (edge, descending precomputed gain, ascending
    vertex id) so each edge group sits contiguously in simulation turn
    order, then replays the groups in parallel chunks whose boundaries
    follow group sizes only. Returns (vertices, contribs).
    """
    order = np.lexsort((v_m, -g_m, e_m))
    e_s, v_s, t_s = e_m[order], v_m[order], t_m[order]
    eb = group_bounds(e_s)

    def run(gc):
        lo, hi = int(eb[gc[0]]), int(eb[gc[1]])
        return simulate_groups_kernel(
            e_s[lo:hi], v_s[lo:hi], t_s[lo:hi],
            np.asarray(eb[gc[0]:gc[1] + 1] - lo, dtype=np.int64),
            state.assignment, state.hg.edge_weights, state.pin_counts,
        )

    group_cum = np.cumsum(np.diff(eb))
    chunks = balanced_chunks(group_cum, 1 << 16)
    if pool is None or pool.threads == 1 or len(chunks) == 1:
        parts = [run(gc) for gc in chunks]
    else:
        parts = pool.map(run, chunks)
    return v_s, parts[0] if len(parts) == 1 else np.concatenate(parts)


def afterburner(
    state: PartitionState,
    cand: MoveCandidateSet,
    pool: WorkerPool | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Filter candidates by their gain recomputed against each other.

    Per hyperedge touching the candidate set, candidates are simulated
    in descending precomputed-gain order (ties: ascending vertex id)
    with live pin counts; per-vertex contributions accumulate across
    edges by integer addition. Returns (vertices, targets) for exactly
    the candidates whose recomputed gain is strictly positive.

    Edges holding a single candidate skip the simulation: their
    contribution is the plain gain term. Both paths are observationally
    identical (see the fast-path equivalence test).
    """
    if len(cand) == 0:
        return cand.vertices, cand.targets
    hg = state.hg
    n = hg.num_vertices
    gain_of = np.zeros(n, dtype=np.int64)
    target_of = np.zeros(n, dtype=np.int32)
    gain_of[cand.vertices] = cand.gains
    target_of[cand.vertices] = cand.targets

    flat, bounds = ragged_gather(hg.inc_offsets, cand.vertices)
    e_all = hg.inc_edges[flat]
    v_all = np.repeat(cand.vertices, np.diff(bounds))
    members_per_edge = np.bincount(e_all, minlength=hg.num_edges)
    is_single = members_per_edge[e_all] == 1

    recomputed = np.zeros(n, dtype=np.int64)

    e1, v1 = e_all[is_single], v_all[is_single]
    if len(e1):
        own1 = state.assignment[v1]
        t1 = target_of[v1]
        w1 = hg.edge_weights[e1]
        c1 = w1 * (state.pin_counts[e1, own1] == 1)
        c1 -= w1 * (state.pin_counts[e1, t1] == 0)
        np.add.at(recomputed, v1, c1)

    multi = ~is_single
    if multi.any():
        e_m, v_m = e_all[multi], v_all[multi]
        g_m, t_m = gain_of[v_m], target_of[v_m]
        vs, cs = _afterburner_multi(state, e_m, v_m, g_m, t_m, pool)
        np.add.at(recomputed, vs, cs)

    keep = recomputed[cand.vertices] > 0
    return cand.vertices[keep], cand.targets[keep]


def _rebalance_targets_chunk(state, verts, dz_num, dz_den):
    """Best escape target per vertex under weight constraints.

    Valid targets j satisfy block_weight[j] + c(v) <= L_max and, when
    the deadzone is active, block_weight[j] + c(v) < L_max - dz (exact
    rational comparison via cross multiplication). Returns
    (targets, gains, valid mask).
    """
    hg = state.hg
    targets, gains = rebalance_targets_kernel(
        hg.inc_offsets, hg.inc_edges, hg.edge_weights, state.pin_counts,
        state.assignment, hg.vertex_weights, state.block_weights, verts,
        state.max_block, dz_num, dz_den,
    )
    return targets, gains, gains > _INT64_MIN


def _priority_order(cand, targets, gains, weights, blocks):
    """Candidate order per source block: descending priority, tie by id.

    Priority is gain*c(v) for gain >= 0 and gain/c(v) for gain < 0.
    Sorting uses quantized int64 keys; runs of equal (block, key) are
    re-sorted with exact Fractions, so the result equals the exact
    rational order.
    """
    keys = np.empty(len(cand), dtype=np.int64)
    nonneg = gains >= 0
    neg = ~nonneg
    # overflow-sound quantization: if a product could exceed int64, all
    # affected keys collapse to one clamp value and the exact re-sort of
    # equal-key runs below restores the true order
    max_g = int(np.abs(gains).max(initial=0))
    max_c = int(weights.max(initial=1))
    if max_g < (1 << 31) and max_c < (1 << 31):
        keys[nonneg] = gains[nonneg] * weights[nonneg]
    else:
        keys[nonneg] = _PRIORITY_CLAMP
    if max_g < (1 << 41):
        keys[neg] = gains[neg] * _PRIORITY_SCALE // weights[neg]
    else:
        keys[neg] = -1
    order = np.lexsort((cand, -keys, blocks))
    bs, ks = blocks[order], keys[order]
    runs = group_bounds(bs, ks)
    widths = np.diff(runs)
    # keys with weight 1 everywhere are already the exact priorities
    if (widths > 1).any() and not bool((weights == 1).all()):
        order = order.copy()
        for ri in np.flatnonzero(widths > 1):
            lo, hi = int(runs[ri]), int(runs[ri + 1])
            seg = order[lo:hi].tolist()
            seg.sort(
                key=lambda i: (
                    Fraction(-int(gains[i]), int(weights[i]))
                    if gains[i] < 0
                    else Fraction(-int(gains[i]) * int(weights[i])),
                    int(cand[i]),
                )
            )
            order[lo:hi] = seg
    return order


def rebalance(
    state: PartitionState,
    deadzone_factor: Fraction = Fraction(1, 10),
    pool: WorkerPool | None = None,
    locks: np.ndarray | None = None,
    moved_out: list | None = None,
) -> bool:
    """Move minimal high-priority prefixes out of overloaded blocks until
    the balance constraint holds.

    Per round and overloaded block: candidate vertices (unlocked, not
    too heavy relative to the block's overload) get their best valid
    target; they are ordered by descending priority with ties by id, and
    the smallest prefix whose weight covers the overload moves
    synchronously. A round that moves nothing is retried once with the
    deadzone disabled; if still stuck the function returns False.

    Vertices with c(v) > (3/2) * (c(block) - ceil(c(V)/k)) never move.
    Appends each round's moved vertex array to `moved_out` when given.
    Returns True iff the final state is balanced.
    """
    dz = Fraction(deadzone_factor) * state.epsilon * state.ceil_avg
    rounds = 0
    while rounds < _MAX_REBALANCE_ROUNDS:
        over = np.flatnonzero(state.block_weights > state.max_block)
        if len(over) == 0:
            return True
        rounds += 1
        moved = _rebalance_round(state, over, dz, pool, locks)
        if moved is None or len(moved) == 0:
            # deadzone relaxation fallback
            moved = _rebalance_round(state, over, Fraction(0), pool, locks)
            if moved is None or len(moved) == 0:
                return False
        if moved_out is not None:
            moved_out.append(moved)
    return bool((state.block_weights <= state.max_block).all())


def _rebalance_round(state, over, dz, pool, locks):
    """One synchronous rebalancing round; returns moved vertices or None."""
    hg = state.hg
    overmask = np.zeros(state.k, dtype=bool)
    overmask[over] = True
    cand = np.flatnonzero(overmask[state.assignment]).astype(np.int32)
    if locks is not None and len(cand):
        cand = cand[~locks[cand]]
    if len(cand) == 0:
        return None
    src = state.assignment[cand]
    cw = hg.vertex_weights[cand]
    # exclusion of heavy vertices: c(v) > 3/2 * (c(block) - ceil_avg)
    overload_room = state.block_weights[src] - state.ceil_avg
    keep = 2 * cw <= 3 * overload_room
    cand, src, cw = cand[keep], src[keep], cw[keep]
    if len(cand) == 0:
        return None

    dz_num, dz_den = dz.numerator, dz.denominator
    chunks = _chunk_bounds(state, cand)
    if pool is None or pool.threads == 1 or len(chunks) == 1:
        parts = [
            _rebalance_targets_chunk(state, cand[a:b], dz_num, dz_den)
            for a, b in chunks
        ]
    else:
        parts = pool.map(
            lambda ab: _rebalance_targets_chunk(
                state, cand[ab[0]:ab[1]], dz_num, dz_den
            ),
            chunks,
        )
    targets = np.concatenate([p[0] for p in parts])
    gains = np.concatenate([p[1] for p in parts])
    valid = np.concatenate([p[2] for p in parts])
    cand, targets, gains, src, cw = (
        cand[valid], targets[valid], gains[valid], src[valid], cw[valid],
    )
    if len(cand) == 0:
        return None

    order = _priority_order(cand, targets, gains, cw, src)
    cs, ts, ws, bs = cand[order], targets[order], cw[order], src[order]
    bounds = group_bounds(bs)
    prefix = segment_cumsum(ws, bounds)

    take = np.zeros(len(cs), dtype=bool)
    coverable_blocks = []
    for gi in range(len(bounds) - 1):
        lo, hi = int(bounds[gi]), int(bounds[gi + 1])
        blk = int(bs[lo])
        need = int(state.block_weights[blk]) - state.max_block
        seg = prefix[lo:hi]
        pos = int(np.searchsorted(seg, need, side="left"))
        take[lo : lo + min(pos + 1, hi - lo)] = True
        if seg[-1] >= need:
            coverable_blocks.append(blk)

    mv, mt = cs[take], ts[take]
    if len(mv) == 0:
        return None
    state._apply_arrays(mv, mt)
    for blk in coverable_blocks:
        assert int(state.block_weights[blk]) <= state.max_block, (
            "rebalancer failed to restore its source block"
        )
    return mv


def jet_refine(
    state: PartitionState,
    cfg: JetConfig,
    pool: WorkerPool | None = None,
    timings: dict | None = None,
    trace: list | None = None,
    tag: str = "",
    move_log: list | None = None,
) -> bool:
    """Run the full temperature schedule on `state` in place.

    Per temperature: iterate candidates -> afterburner -> synchronous
    apply -> rebalance, tracking the best balanced snapshot; stop after
    `max_nonimproving` iterations without a strict improvement of that
    snapshot and roll back to it. Vertices moved in one iteration are
    locked for the next (when lock_moves is on); locks clear at each
    phase start. A balanced input never comes out worse or imbalanced.

    Returns True iff the final state is balanced.
    """
    if state.k < 2 or state.hg.num_vertices == 0:
        return state.is_balanced()

    if not state.is_balanced():
        t0 = perf_counter()
        ok = rebalance(state, cfg.deadzone_factor, pool)
        if timings is not None:
            timings["rebalance"] = timings.get("rebalance", 0.0) + (
                perf_counter() - t0
            )
        if not ok:
            return False

    input_metric = state.metric()
    best = state.snapshot()
    best_metric = best[2]

    for phase, tau in enumerate(cfg.temperatures):
        locks: np.ndarray | None = None  # cleared at phase start
        counter = 0
        aborted = False
        while counter < cfg.max_nonimproving:
            cand = compute_move_candidates(state, tau, locks, pool)
            keep_v, keep_t = afterburner(state, cand, pool)
            state._apply_arrays(keep_v, keep_t)
            moved = [keep_v]
            if not state.is_balanced():
                t0 = perf_counter()
                ok = rebalance(
                    state, cfg.deadzone_factor, pool, locks=locks,
                    moved_out=moved,
                )
                if timings is not None:
                    timings["rebalance"] = timings.get("rebalance", 0.0) + (
                        perf_counter() - t0
                    )
                if not ok:
                    state.restore(best)
                    aborted = True
                    break
            moved_all = (
                np.concatenate(moved) if len(moved) > 1 else moved[0]
            )
            if move_log is not None:
                move_log.append(moved_all)
            if cfg.lock_moves and len(moved_all):
                locks = np.zeros(state.hg.num_vertices, dtype=bool)
                locks[moved_all] = True
            else:
                locks = None
            m = state.metric()
            if state.is_balanced() and m < best_metric:
                best = state.snapshot()
                best_metric = m
                counter = 0
            else:
                counter += 1
        if not aborted and (
            not state.is_balanced() or state.metric() > best_metric
        ):
            state.restore(best)
        if trace is not None:
            trace.append((f"{tag}jet_t{phase}", state.assignment_hash()))

    assert state.metric() <= input_metric, "refinement degraded the metric"
    return state.is_balanced()
