"""Flow-based two-way refinement with a matching scheduler.

A refinement region holds the vertices near the cut of one block pair;
the rest of each block is contracted into a source or sink terminal.
Hyperedges become two-node gadgets (capacity = edge weight) so a maximum
flow equals the minimum hyperedge cut separating the terminals. The
incremental loop augments, extracts the two canonical min-cut sides
(forward reachable from S, backward reachable from T), accepts a
balanced side if it beats the incumbent, and otherwise pierces one more
vertex into the lighter side. The canonical sides are unique for fixed
terminals no matter how the solver routed the flow, which is what makes
the outcome independent of augmentation order.
"""

from __future__ import annotations

from dataclasses import dataclass
from time import perf_counter

import numpy as np

from ._kernels import dinic_kernel, residual_reach_kernel
from .hypergraph import PartitionState
from .parallel import WorkerPool
from .vecops import hash_u64, mix64, ragged_gather

_SALT_FLOW = 0xF10E5
_INF = 1 << 60


@dataclass(frozen=True)
class FlowsConfig:
    enabled: bool = False
    time_budget_s: float = 600.0
    max_piercing_factor: int = 2

    def __post_init__(self):
        if self.time_budget_s <= 0:
            raise ValueError("time_budget_s must be positive")
        if self.max_piercing_factor < 1:
            raise ValueError("max_piercing_factor must be >= 1")


@dataclass
class FlowRegion:
    """Contracted two-block neighborhood of the cut.

    Node ids: 0 = source terminal, 1 = sink terminal, 2+i = eligible
    vertex i. `edge_pins` lists each hyperedge's pins as node ids.
    """

    block_i: int
    block_j: int
    elig: np.ndarray          # global vertex ids
    elig_side: np.ndarray     # 0: came from block_i, 1: from block_j
    elig_weights: np.ndarray
    s_weight: int             # terminal weight on the block_i side
    t_weight: int
    edge_weights: list
    edge_pins: list
    bound: int                # current cut weight between the blocks
    total: int                # c(block_i) + c(block_j)
    l_max: int


def _grow_side(hg, assignment, block, boundary, budget):
    """Layered BFS inside `block` from the (sorted) boundary vertices.

    Vertices are visited in layer order, each layer sorted by id; the
    visit stops at the first vertex that would push the visited weight
    over `budget`. Returns the eligible vertices in visit order. When
    the whole side would fit, the last visited vertex is withheld so the
    terminal is never empty.
    """
    vw = hg.vertex_weights
    eligible = []
    acc = 0
    seen = set(int(v) for v in boundary)
    layer = sorted(seen)
    stopped = False
    while layer and not stopped:
        nxt = set()
        for v in layer:
            if acc + vw[v] > budget:
                stopped = True
                break
            eligible.append(v)
            acc += int(vw[v])
            for e in hg.inc_edges[hg.inc_offsets[v]:hg.inc_offsets[v + 1]]:
                for u in hg.pins[hg.pin_offsets[e]:hg.pin_offsets[e + 1]]:
                    u = int(u)
                    if assignment[u] == block and u not in seen:
                        seen.add(u)
                        nxt.add(u)
        layer = sorted(nxt)
    if not stopped and eligible and len(eligible) == int(
        np.count_nonzero(assignment == block)
    ):
        eligible.pop()  # farthest vertex stays terminal
    return eligible


def build_region(state: PartitionState, block_i: int, block_j: int):
    """Region for the pair (block_i, block_j), or None when the pair
    shares no cut hyperedge."""
    hg = state.hg
    cut_mask = (state.pin_counts[:, block_i] > 0) & (
        state.pin_counts[:, block_j] > 0
    )
    if not cut_mask.any():
        return None
    bound = int(hg.edge_weights[cut_mask].sum())
    cut_eids = np.nonzero(cut_mask)[0]
    flat, _ = ragged_gather(hg.pin_offsets, cut_eids)
    cut_pins = hg.pins[flat]
    pin_blocks = state.assignment[cut_pins]
    boundary_i = np.unique(cut_pins[pin_blocks == block_i])
    boundary_j = np.unique(cut_pins[pin_blocks == block_j])

    c_i = int(state.block_weights[block_i])
    c_j = int(state.block_weights[block_j])
    l_max = state.max_block
    elig_i = _grow_side(
        hg, state.assignment, block_i, boundary_i, l_max - c_j
    )
    elig_j = _grow_side(
        hg, state.assignment, block_j, boundary_j, l_max - c_i
    )

    elig = np.array(elig_i + elig_j, dtype=np.int32)
    elig_side = np.array(
        [0] * len(elig_i) + [1] * len(elig_j), dtype=np.int8
    )
    elig_w = hg.vertex_weights[elig] if len(elig) else np.zeros(0, np.int64)
    node_of = {int(v): 2 + idx for idx, v in enumerate(elig)}

    # candidate edges: everything incident to an eligible vertex, plus
    # the pair-cut edges (they keep contributing through the terminals)
    cand = set(int(e) for e in cut_eids)
    for v in elig:
        for e in hg.inc_edges[hg.inc_offsets[v]:hg.inc_offsets[v + 1]]:
            cand.add(int(e))

    edge_weights = []
    edge_pins = []
    for e in sorted(cand):
        nodes = set()
        for u in hg.pins[hg.pin_offsets[e]:hg.pin_offsets[e + 1]]:
            u = int(u)
            node = node_of.get(u)
            if node is not None:
                nodes.add(node)
            elif state.assignment[u] == block_i:
                nodes.add(0)
            elif state.assignment[u] == block_j:
                nodes.add(1)
        if len(nodes) >= 2:
            edge_weights.append(int(hg.edge_weights[e]))
            edge_pins.append(sorted(nodes))

    s_weight = c_i - int(hg.vertex_weights[elig_i].sum()) if elig_i else c_i
    t_weight = c_j - int(hg.vertex_weights[elig_j].sum()) if elig_j else c_j
    return FlowRegion(
        block_i, block_j, elig, elig_side, elig_w,
        s_weight, t_weight, edge_weights, edge_pins,
        bound, c_i + c_j, l_max,
    )


class LawlerNetwork:
    """Residual-arc flow network over a region, with seeded adjacency
    order so augmentation order can be varied without changing the
    canonical min-cut sides."""

    def __init__(self, region: FlowRegion, seed: int = 0):
        self.region = region
        n_el = len(region.elig)
        m = len(region.edge_weights)
        self.n_vertex_nodes = 2 + n_el
        self.n_nodes = 2 + n_el + 2 * m
        self.node_weights = np.zeros(self.n_vertex_nodes, dtype=np.int64)
        self.node_weights[0] = region.s_weight
        self.node_weights[1] = region.t_weight
        if n_el:
            self.node_weights[2:] = region.elig_weights

        # arc layout per edge idx (e_in = base + 2*idx, e_out = e_in+1):
        # gadget arc e_in -> e_out with cap w, then per pin p the pair
        # p -> e_in and e_out -> p with infinite cap; every forward arc
        # at an even id, its zero-cap reverse right after it
        npins = np.array(
            [len(p) for p in region.edge_pins], dtype=np.int64
        )
        pins_flat = (
            np.concatenate([
                np.asarray(p, dtype=np.int64) for p in region.edge_pins
            ])
            if m
            else np.zeros(0, dtype=np.int64)
        )
        base = self.n_vertex_nodes
        eids = np.arange(m, dtype=np.int64)
        e_in = base + 2 * eids
        edge_arc0 = np.zeros(m + 1, dtype=np.int64)
        np.cumsum(2 + 4 * npins, out=edge_arc0[1:])
        n_arcs = int(edge_arc0[-1])
        to = np.empty(n_arcs, dtype=np.int64)
        cap = np.zeros(n_arcs, dtype=np.int64)
        tail = np.empty(n_arcs, dtype=np.int64)
        go = edge_arc0[:-1]
        to[go] = e_in + 1
        tail[go] = e_in
        cap[go] = np.asarray(region.edge_weights, dtype=np.int64)
        to[go + 1] = e_in
        tail[go + 1] = e_in + 1
        if len(pins_flat):
            e_of_pin = np.repeat(eids, npins)
            pin_start = np.concatenate(([0], np.cumsum(npins)[:-1]))
            local = np.arange(len(pins_flat)) - pin_start[e_of_pin]
            pa = edge_arc0[e_of_pin] + 2 + 4 * local
            ein_p = e_in[e_of_pin]
            to[pa] = ein_p
            tail[pa] = pins_flat
            cap[pa] = _INF
            to[pa + 1] = pins_flat
            tail[pa + 1] = ein_p
            to[pa + 2] = pins_flat
            tail[pa + 2] = ein_p + 1
            cap[pa + 2] = _INF
            to[pa + 3] = ein_p + 1
            tail[pa + 3] = pins_flat

        self.to = to
        self.cap = cap
        # adjacency: arcs grouped by tail in arc-id order, optionally
        # reordered per node by seeded hash keys (stable, so seed 0 and
        # equal keys keep the insertion order)
        arc_ids = np.arange(n_arcs, dtype=np.int64)
        if seed:
            h = np.uint64(0x9E3779B97F4A7C15)
            h = mix64(h ^ np.uint64(seed & ((1 << 64) - 1)))
            h = mix64(h ^ np.uint64(_SALT_FLOW))
            salts = mix64(h ^ np.arange(self.n_nodes, dtype=np.uint64))
            keys = mix64(arc_ids.astype(np.uint64) + salts[tail])
            order = np.lexsort((keys, tail))
        else:
            order = np.argsort(tail, kind="stable")
        self.adj_flat = arc_ids[order]
        self.adj_offsets = np.zeros(self.n_nodes + 1, dtype=np.int64)
        np.cumsum(
            np.bincount(tail, minlength=self.n_nodes),
            out=self.adj_offsets[1:],
        )
        self.is_src = np.zeros(self.n_nodes, dtype=bool)
        self.is_snk = np.zeros(self.n_nodes, dtype=bool)
        self.is_src[0] = True
        self.is_snk[1] = True
        self.flow_value = 0

    def add_source(self, node: int):
        self.is_src[node] = True

    def add_sink(self, node: int):
        self.is_snk[node] = True

    def pierce_source(self, node: int):
        """Turn `node` into a source; flow it already forwarded counts
        toward the flow value (zero under a conservative solver)."""
        self.add_source(node)
        self.flow_value += max(0, -self.node_excess(node))

    def pierce_sink(self, node: int):
        """Turn `node` into a sink; flow already parked at it counts as
        delivered (zero under a conservative solver)."""
        self.add_sink(node)
        self.flow_value += max(0, self.node_excess(node))

    def node_excess(self, node: int) -> int:
        """Inflow minus outflow; zero for any conservative flow, kept so
        a preflow solver can slot in without changing the caller.

        Arcs are created in pairs (forward even, reverse odd) and every
        arc in adj[node] leaves `node`; the flow on a forward arc lives
        in its reverse twin's capacity.
        """
        flow_in = 0
        flow_out = 0
        lo, hi = self.adj_offsets[node], self.adj_offsets[node + 1]
        for a in self.adj_flat[lo:hi]:
            a = int(a)
            if a % 2 == 0:
                flow_out += int(self.cap[a ^ 1])
            else:
                flow_in += int(self.cap[a])
        return flow_in - flow_out

    def augment_to_max(self, limit: int | None = None) -> None:
        """Dinic rounds until no source-sink residual path remains; may
        stop early once the flow value exceeds `limit`."""
        self.flow_value = int(dinic_kernel(
            self.adj_offsets, self.adj_flat, self.to, self.cap,
            self.is_src, self.is_snk, self.flow_value,
            0 if limit is None else int(limit), limit is not None,
        ))

    def reachable_forward(self) -> np.ndarray:
        return residual_reach_kernel(
            self.adj_offsets, self.adj_flat, self.to, self.cap,
            self.is_src, True,
        )

    def reachable_backward(self) -> np.ndarray:
        # arc a: u -> v; its reverse v -> u has residual cap in
        # cap[a ^ 1], so v reaches u exactly when that is > 0
        return residual_reach_kernel(
            self.adj_offsets, self.adj_flat, self.to, self.cap,
            self.is_snk, False,
        )


def select_piercing_vertex(candidates, avoid_ok, weights, side_weight,
                           l_max):
    """Smallest-id candidate, preferring those that do not reopen a path
    to the opposite terminal; candidates that no longer fit under the
    side's weight cap are skipped. Returns the index into `candidates`
    or None."""
    best = None
    for idx in range(len(candidates)):
        if side_weight + weights[idx] > l_max:
            continue
        key = (0 if avoid_ok[idx] else 1, int(candidates[idx]))
        if best is None or key < best[0]:
            best = (key, idx)
    return None if best is None else best[1]


def _cut_candidates(net, reach, forward):
    """Vertex nodes on the far side of the current cut: pins of
    hyperedges whose gadget arc crosses the reachable set."""
    region = net.region
    base = net.n_vertex_nodes
    cands = set()
    for idx in range(len(region.edge_weights)):
        e_in = base + 2 * idx
        e_out = e_in + 1
        near, far = (e_in, e_out) if forward else (e_out, e_in)
        if reach[near] and not reach[far]:
            for p in region.edge_pins[idx]:
                if p >= 2 and not reach[p]:
                    cands.add(p)
    return sorted(cands)


@dataclass
class TwoWayResult:
    vertices: np.ndarray   # global vertex ids that change block
    targets: np.ndarray
    cut: int
    bound: int             # incumbent pair cut the result improves on
    max_side: int          # heavier of the two new block weights


def incremental_bipartition(region: FlowRegion, seed: int,
                            cfg: FlowsConfig) -> TwoWayResult | None:
    """Run the piercing loop on `region`; None means no improvement.

    Per iteration: augment to maximality, derive the canonical cut
    sides, return a balanced side when the cut beats (or ties with
    smaller imbalance) the incumbent; the balance test runs before the
    bound check so an equal-value cut found by flow computation is still
    reported. Piercing count is capped for termination.
    """
    net = LawlerNetwork(region, seed)
    bound = region.bound
    l_max = region.l_max
    total = region.total
    weights = net.node_weights
    max_pierce = cfg.max_piercing_factor * max(1, len(region.elig))
    pierces = 0
    old_max_side = max(
        region.s_weight + int(region.elig_weights[region.elig_side == 0].sum()),
        region.t_weight + int(region.elig_weights[region.elig_side == 1].sum()),
    )

    while True:
        net.augment_to_max(limit=bound)
        f = net.flow_value
        if f > bound:
            return None
        fwd = net.reachable_forward()
        bwd = net.reachable_backward()
        vfwd = fwd[:net.n_vertex_nodes]
        vbwd = bwd[:net.n_vertex_nodes]
        c_sr = int(weights[vfwd].sum())
        c_tr = int(weights[vbwd].sum())

        options = []
        if c_sr <= l_max and total - c_sr <= l_max:
            options.append((max(c_sr, total - c_sr), 0))
        if c_tr <= l_max and total - c_tr <= l_max:
            options.append((max(c_tr, total - c_tr), 1))
        if options:
            new_max_side, which = min(options)
            if f < bound or (f == bound and new_max_side < old_max_side):
                side_mask = vfwd[2:] if which == 0 else ~vbwd[2:]
                # side_mask True -> vertex ends up in block_i
                new_blocks = np.where(
                    side_mask, region.block_i, region.block_j
                ).astype(np.int32)
                old_blocks = np.where(
                    region.elig_side == 0, region.block_i, region.block_j
                ).astype(np.int32)
                moved = new_blocks != old_blocks
                return TwoWayResult(
                    region.elig[moved], new_blocks[moved], f, bound,
                    new_max_side,
                )
            return None
        if f >= bound:
            return None  # equal value but nothing balanced: piercing
            # only raises the cut, so stop before it (termination check
            # precedes piercing)
        if pierces >= max_pierce:
            return None

        if c_sr <= c_tr:
            for node in np.nonzero(vfwd)[0]:
                net.add_source(int(node))
            cands = _cut_candidates(net, fwd, forward=True)
            cands = [c for c in cands if not net.is_snk[c]]
            avoid = [not bwd[c] for c in cands]
            pick = select_piercing_vertex(
                cands, avoid, [int(weights[c]) for c in cands], c_sr, l_max
            )
            if pick is None:
                return None
            net.pierce_source(cands[pick])
        else:
            for node in np.nonzero(vbwd)[0]:
                net.add_sink(int(node))
            cands = _cut_candidates(net, bwd, forward=False)
            cands = [c for c in cands if not net.is_src[c]]
            avoid = [not fwd[c] for c in cands]
            pick = select_piercing_vertex(
                cands, avoid, [int(weights[c]) for c in cands], c_tr, l_max
            )
            if pick is None:
                return None
            net.pierce_sink(cands[pick])
        pierces += 1


def quotient_pairs(state: PartitionState) -> list[tuple[int, int]]:
    """Block pairs sharing at least one cut hyperedge, ascending."""
    k = state.k
    if k > 64:
        raise ValueError("flow scheduling supports at most 64 blocks")
    weights = (np.uint64(1) << np.arange(k, dtype=np.uint64))
    masks = set()
    m = state.hg.num_edges
    step = 1 << 16
    for lo in range(0, m, step):
        touch = (state.pin_counts[lo:lo + step] > 0).astype(np.uint64)
        masks.update(int(x) for x in np.unique(touch @ weights))
    pairs = set()
    for mask in masks:
        blocks = [i for i in range(k) if mask >> i & 1]
        for a in range(len(blocks)):
            for b in range(a + 1, len(blocks)):
                pairs.add((blocks[a], blocks[b]))
    return sorted(pairs)


def _next_matching(unscheduled: list[tuple[int, int]]):
    """Greedy maximal matching preferring pairs whose endpoints have
    high degree in the remaining unscheduled quotient graph."""
    deg: dict[int, int] = {}
    for i, j in unscheduled:
        deg[i] = deg.get(i, 0) + 1
        deg[j] = deg.get(j, 0) + 1
    order = sorted(unscheduled, key=lambda p: (-max(deg[p[0]], deg[p[1]]),
                                               p[0], p[1]))
    used: set[int] = set()
    matching = []
    for i, j in order:
        if i not in used and j not in used:
            matching.append((i, j))
            used.add(i)
            used.add(j)
    return matching


def schedule_kway(
    state: PartitionState,
    cfg: FlowsConfig,
    seed: int = 0,
    pool: WorkerPool | None = None,
    trace: list | None = None,
    tag: str = "",
    deadline: float | None = None,
) -> bool:
    """Round-based two-way refinement over the quotient graph.

    Each round schedules every eligible pair exactly once through a
    sequence of maximal matchings; refinements inside one matching run
    in parallel (their block pairs are disjoint) and their accepted
    moves apply at the matching barrier. A block stays active for the
    next round only if one of its pairs improved. Returns True when any
    round improved the partition.
    """
    if state.k < 2:
        return False
    improved_any = False
    active = np.ones(state.k, dtype=bool)
    round_idx = 0
    pre_metric = state.metric()
    while True:
        if deadline is not None and perf_counter() >= deadline:
            break
        pairs = [
            (i, j) for i, j in quotient_pairs(state)
            if active[i] or active[j]
        ]
        if not pairs:
            break
        improved_blocks = np.zeros(state.k, dtype=bool)
        unscheduled = list(pairs)
        expired = False
        while unscheduled and not expired:
            matching = _next_matching(unscheduled)
            unscheduled = [p for p in unscheduled if p not in matching]
            busy = [b for p in matching for b in p]
            assert len(busy) == len(set(busy)), "block scheduled twice"

            def refine(pair):
                i, j = pair
                region = build_region(state, i, j)
                if region is None:
                    return None
                return incremental_bipartition(
                    region, hash_u64(seed, _SALT_FLOW, round_idx, i, j), cfg
                )

            if pool is not None and pool.threads > 1:
                results = pool.map(refine, matching)
            else:
                results = [refine(p) for p in matching]

            moves_v, moves_t = [], []
            expected_delta = 0
            for pair, res in zip(matching, results):
                if res is None or len(res.vertices) == 0:
                    continue
                expected_delta += res.bound - res.cut
                moves_v.append(res.vertices)
                moves_t.append(res.targets)
                improved_blocks[pair[0]] = True
                improved_blocks[pair[1]] = True
            if moves_v:
                before = state.metric()
                state._apply_arrays(
                    np.concatenate(moves_v), np.concatenate(moves_t)
                )
                # pair cuts account for the whole change exactly:
                # matched pairs are block-disjoint
                assert state.metric() == before - expected_delta, (
                    "flow refinement delta mismatch"
                )
                improved_any = True
            if deadline is not None and perf_counter() >= deadline:
                expired = True
        if trace is not None:
            trace.append(
                (f"{tag}flow_r{round_idx}", state.assignment_hash())
            )
        round_idx += 1
        if not improved_blocks.any() or expired:
            break
        active = improved_blocks
    assert state.metric() <= pre_metric
    return improved_any
