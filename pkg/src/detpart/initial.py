"""Initial partitioning of the coarsest hypergraph.

Recursive bisection: every bipartition runs a fixed portfolio of greedy
growing attempts from seeded start vertices, polishes each with one
zero-temperature refinement iteration, and keeps the best by
(balanced, metric, imbalance, seed index). Side weight caps use the
per-level tolerance (1+eps)^(1/ceil(log2 k)) - 1 evaluated with exact
integer root arithmetic so no float enters a decision.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._kernels import greedy_grow_kernel
from .hypergraph import Hypergraph, PartitionState
from .jet import afterburner, compute_move_candidates
from .parallel import WorkerPool
from .vecops import hash_permutation, hash_u64, segment_sum

_SALT_INITIAL = 0x1217A7


@dataclass(frozen=True)
class InitialConfig:
    portfolio_size: int = 16

    def __post_init__(self):
        if self.portfolio_size < 1:
            raise ValueError("portfolio_size must be >= 1")


@dataclass
class BipartitionAttempt:
    """One portfolio attempt, comparable by (metric, imbalance, seed)."""

    seed_index: int
    assignment: np.ndarray
    metric: int
    imbalance: Fraction
    balanced: bool

    def sort_key(self):
        return (self.metric, self.imbalance, self.seed_index)


def _int_nth_root(value: int, d: int) -> int:
    """floor(value ** (1/d)) for nonnegative integers, exactly."""
    if value < 0:
        raise ValueError("negative radicand")
    if d == 1 or value < 2:
        return value
    x = 1 << -(-value.bit_length() // d)  # upper bound, power of two
    while True:
        y = ((d - 1) * x + value // x ** (d - 1)) // d
        if y >= x:
            break
        x = y
    while x ** d > value:
        x -= 1
    return x


def side_cap(ideal: int, epsilon: Fraction, depth: int) -> int:
    """Largest c with c <= ideal * (1+epsilon)^(1/depth).

    Equivalent to floor((1+eps')*ideal) for the adjusted per-level
    tolerance; exact because c^depth*den <= ideal^depth*num is checked
    in integers.
    """
    if ideal <= 0:
        return 0
    one_plus = Fraction(1) + epsilon
    num, den = one_plus.numerator, one_plus.denominator
    return _int_nth_root(ideal ** depth * num // den, depth)


def _induced_subhypergraph(hg: Hypergraph, vids: np.ndarray):
    """Restrict `hg` to `vids`; edges keep their weight, pins outside the
    set are dropped and edges with fewer than two surviving pins vanish."""
    vmap = np.full(hg.num_vertices, -1, dtype=np.int32)
    vmap[vids] = np.arange(len(vids), dtype=np.int32)
    local = vmap[hg.pins]
    alive = local >= 0
    counts = segment_sum(alive.astype(np.int64), hg.pin_offsets)
    keep = counts >= 2
    pin_keep = alive & keep[hg.edge_of_pin]
    new_offsets = np.zeros(int(keep.sum()) + 1, dtype=np.int64)
    np.cumsum(counts[keep], out=new_offsets[1:])
    sub = Hypergraph(
        new_offsets,
        local[pin_keep],
        hg.vertex_weights[vids],
        hg.edge_weights[keep],
        validate=False,
    )
    return sub


def _greedy_grow(sub: Hypergraph, start_order: np.ndarray, start_at: int,
                 ideal_l: int, cap_l: int) -> np.ndarray:
    """Grow block 0 from a start vertex until it reaches `ideal_l`.

    Always adds the highest-gain boundary vertex that still fits under
    `cap_l` (ties by smaller id); falls back to the next unassigned
    vertex in `start_order` when the boundary empties.
    """
    # gain of pulling u into block 0: +w for edges u would uncut, -w for
    # edges u would newly cut
    gain = -np.asarray(
        segment_sum(sub.edge_weights[sub.inc_edges], sub.inc_offsets),
        dtype=np.int64,
    )
    in_l = greedy_grow_kernel(
        sub.inc_offsets, sub.inc_edges, sub.pin_offsets, sub.pins,
        sub.edge_sizes, sub.vertex_weights, sub.edge_weights, gain,
        start_order, int(start_at), int(ideal_l), int(cap_l),
    )
    return np.where(in_l, 0, 1).astype(np.int32)


def _polish_once(state: PartitionState, cap_l: int, cap_r: int):
    """One zero-temperature refinement iteration on a 2-block state,
    kept only if (cap excess, metric) strictly improves.

    Balance class dominates: a pure metric gain that pushes a side over
    its cap is a net loss here, since emptying one side always reaches
    metric 0.
    """
    before = state.snapshot()
    pre = (_cap_excess(state, cap_l, cap_r), before[2])
    cand = compute_move_candidates(state, Fraction(0))
    keep_v, keep_t = afterburner(state, cand)
    if len(keep_v) == 0:
        return
    state._apply_arrays(keep_v, keep_t)
    post = (_cap_excess(state, cap_l, cap_r), state.metric())
    if post >= pre:
        state.restore(before)


def _cap_excess(state: PartitionState, cap_l: int, cap_r: int) -> int:
    bw = state.block_weights
    return max(0, int(bw[0]) - cap_l) + max(0, int(bw[1]) - cap_r)


def _bipartition_attempt(sub, start_order, attempt, ideal_l, ideal_r,
                         cap_l, cap_r):
    n = sub.num_vertices
    assignment = _greedy_grow(
        sub, start_order, attempt % n, ideal_l, cap_l
    )
    state = PartitionState(sub, 2, Fraction(1), assignment)
    _polish_once(state, cap_l, cap_r)
    bw = state.block_weights
    balanced = bw[0] <= cap_l and bw[1] <= cap_r
    imbalance = max(
        Fraction(int(bw[0]), max(ideal_l, 1)),
        Fraction(int(bw[1]), max(ideal_r, 1)),
    ) - 1
    return BipartitionAttempt(
        attempt, state.assignment, state.metric(), imbalance, bool(balanced)
    )


def _best_attempt(attempts):
    """Lexicographic best by (metric, imbalance, seed index), preferring
    balanced attempts; imbalanced ones only win when nothing is balanced."""
    balanced = [a for a in attempts if a.balanced]
    pool = balanced if balanced else attempts
    return min(pool, key=BipartitionAttempt.sort_key)


def _bipartition(sub, k_l, k_r, epsilon, depth, node_seed, cfg, pool):
    total = sub.total_vertex_weight
    k_sub = k_l + k_r
    ideal_l = -(-total * k_l // k_sub)
    ideal_r = -(-total * k_r // k_sub)
    cap_l = side_cap(ideal_l, epsilon, depth)
    cap_r = side_cap(ideal_r, epsilon, depth)
    start_order = hash_permutation(sub.num_vertices, node_seed)

    def run(i):
        return _bipartition_attempt(
            sub, start_order, i, ideal_l, ideal_r, cap_l, cap_r
        )

    indices = range(cfg.portfolio_size)
    if pool is not None and pool.threads > 1:
        attempts = list(pool.map(run, indices))
    else:
        attempts = [run(i) for i in indices]
    return _best_attempt(attempts)


def initial_partition(
    hg: Hypergraph,
    k: int,
    epsilon: Fraction,
    seed: int,
    cfg: InitialConfig = InitialConfig(),
    pool: WorkerPool | None = None,
) -> PartitionState:
    """Recursively bipartition `hg` into k blocks.

    The result carries the caller's k and epsilon; it is flagged through
    PartitionState.is_balanced() and may be imbalanced when no portfolio
    attempt satisfied the side caps (the refinement stage repairs that).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n = hg.num_vertices
    assignment = np.zeros(n, dtype=np.int32)
    if k > 1:
        depth = (k - 1).bit_length()  # ceil(log2 k), no float round trip
        stack = [(np.arange(n, dtype=np.int32), k, 0)]
        while stack:
            vids, k_sub, offset = stack.pop()
            if k_sub == 1 or len(vids) == 0:
                continue
            if len(vids) <= k_sub:
                # fewer vertices than blocks: one vertex per block
                assignment[vids] = offset + np.arange(
                    len(vids), dtype=np.int32
                )
                continue
            k_l = -(-k_sub // 2)
            k_r = k_sub - k_l
            sub = _induced_subhypergraph(hg, vids)
            node_seed = hash_u64(seed, _SALT_INITIAL, offset, k_sub)
            best = _bipartition(
                sub, k_l, k_r, epsilon, depth, node_seed, cfg, pool
            )
            left = vids[best.assignment == 0]
            right = vids[best.assignment == 1]
            assignment[right] = offset + k_l
            stack.append((left, k_l, offset))
            stack.append((right, k_r, offset + k_l))
    return PartitionState(hg, k, epsilon, assignment)
