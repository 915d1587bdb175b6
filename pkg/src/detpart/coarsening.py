"""Synchronous clustering coarsening.

Each pass shuffles the vertices into subrounds. Within a subround, every
still-singleton vertex proposes to join the neighboring cluster with the
highest heavy-edge rating; mutual proposals are merged before approval;
then each target cluster admits the largest prefix of its proposers
(sorted by increasing weight, then id) that fits under the cluster
weight cap. All steps are barrier-synchronized, so the outcome depends
only on (hypergraph, schedule, config), never on thread count.

Ratings are compared as fixed-point integers: each edge contributes
floor(w(e) * RATING_SCALE / (|e| - 1)) once per touched cluster (or once
per pin with the historical bug re-enabled for ablations).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hypergraph import Hypergraph
from .parallel import WorkerPool, even_chunks
from .vecops import (
    balanced_chunks,
    group_bounds,
    hash_permutation,
    hash_u64,
    ragged_gather,
    segment_cumsum,
    segment_sum,
)

RATING_SCALE = 1 << 16
# keep per-vertex rating sums comfortably inside int64
_MAX_RATING_EDGE_WEIGHT = 1 << 45

_SCHEDULE_SALT = 0xC0A25


@dataclass
class CoarseningConfig:
    contraction_limit: int = 0  # 0 = auto: 160 * k
    max_cluster_weight_factor: int = 1
    prefix_doubling: bool = True
    swap_prevention: bool = True
    rating_bugfix: bool = True
    subrounds: int = 3  # used when prefix_doubling is off


def prefix_doubling_schedule(n: int, seed: int) -> list[np.ndarray]:
    """Seeded shuffle of range(n) split into growing subrounds.

    100 subrounds of size 1, then sizes doubling from 2, each capped at
    ceil(0.01 * n); the final subround takes whatever remains.
    """
    perm = hash_permutation(n, seed)
    sizes: list[int] = []
    remaining = n
    singles = min(100, n)
    sizes.extend([1] * singles)
    remaining -= singles
    cap = -(-n // 100)
    step = 2
    while remaining > 0:
        take = min(step, cap, remaining)
        sizes.append(take)
        remaining -= take
        step = min(step * 2, cap)
    out = []
    lo = 0
    for sz in sizes:
        out.append(perm[lo : lo + sz])
        lo += sz
    return out


def equal_subrounds(n: int, seed: int, r: int) -> list[np.ndarray]:
    """Seeded shuffle split into r near-equal subrounds."""
    perm = hash_permutation(n, seed)
    return [perm[a:b] for a, b in even_chunks(n, max(1, r))]


def _scaled_edge_terms(hg: Hypergraph) -> np.ndarray:
    """Per edge: floor(w * SCALE / (|e|-1)); 0 for single-pin edges."""
    if hg.num_edges and int(hg.edge_weights.max()) > _MAX_RATING_EDGE_WEIGHT:
        raise ValueError("edge weight too large for fixed-point rating")
    den = np.maximum(hg.edge_sizes.astype(np.int64) - 1, 1)
    terms = hg.edge_weights * RATING_SCALE // den
    terms[hg.edge_sizes < 2] = 0
    return terms


def _propose_chunk(
    hg: Hypergraph,
    vertices: np.ndarray,
    clustering: np.ndarray,
    cluster_weights: np.ndarray,
    cap: int,
    bugfix: bool,
    terms: np.ndarray,
):
    """Best eligible target cluster per vertex; (proposers, targets, ratings)."""
    empty = (
        np.zeros(0, dtype=np.int64),
        np.zeros(0, dtype=np.int64),
        np.zeros(0, dtype=np.int64),
    )
    if len(vertices) == 0:
        return empty
    flat_e, bounds_u = ragged_gather(hg.inc_offsets, vertices)
    eids = hg.inc_edges[flat_e]
    pair_u = np.repeat(np.arange(len(vertices)), np.diff(bounds_u))
    keep = hg.edge_sizes[eids] >= 2
    eids, pair_u = eids[keep], pair_u[keep]
    if len(eids) == 0:
        return empty

    flat_p, bounds_e = ragged_gather(hg.pin_offsets, eids)
    entry_pair = np.repeat(np.arange(len(eids)), np.diff(bounds_e))
    cl = clustering[hg.pins[flat_p]].astype(np.int64)
    u_of_entry = pair_u[entry_pair]
    own = clustering[vertices].astype(np.int64)
    mask = cl != own[u_of_entry]
    u_of_entry, entry_pair, cl = u_of_entry[mask], entry_pair[mask], cl[mask]
    if len(cl) == 0:
        return empty

    if bugfix:
        # one rating term per (vertex, edge, cluster), not per pin
        order = np.lexsort((cl, entry_pair))
        entry_pair, cl, u_of_entry = (
            entry_pair[order], cl[order], u_of_entry[order],
        )
        first = np.ones(len(cl), dtype=bool)
        first[1:] = (entry_pair[1:] != entry_pair[:-1]) | (cl[1:] != cl[:-1])
        entry_pair, cl, u_of_entry = (
            entry_pair[first], cl[first], u_of_entry[first],
        )
    contrib = terms[eids[entry_pair]]

    # sum per (vertex, cluster)
    order = np.lexsort((cl, u_of_entry))
    us, cs, vals = u_of_entry[order], cl[order], contrib[order]
    bounds = group_bounds(us, cs)
    ratings = segment_sum(vals, bounds)
    starts = bounds[:-1]
    pu, pc = us[starts], cs[starts]

    fits = (
        cluster_weights[pc] + hg.vertex_weights[vertices[pu]] <= cap
    ) & (ratings > 0)
    pu, pc, ratings = pu[fits], pc[fits], ratings[fits]
    if len(pu) == 0:
        return empty

    # winner per vertex: highest rating, tie smaller cluster id
    order = np.lexsort((pc, -ratings, pu))
    pu, pc, ratings = pu[order], pc[order], ratings[order]
    starts = group_bounds(pu)[:-1]
    return vertices[pu[starts]].astype(np.int64), pc[starts], ratings[starts]


def _propose_targets(hg, vertices, clustering, cluster_weights, cap, bugfix,
                     terms, pool: WorkerPool | None):
    """Chunk-parallel proposal computation; chunk bounds depend only on
    the workload, results are concatenated in chunk order."""
    if pool is None or pool.threads == 1 or len(vertices) < 2048:
        return _propose_chunk(
            hg, vertices, clustering, cluster_weights, cap, bugfix, terms
        )
    degs = hg.degrees[vertices].astype(np.int64)
    cum = np.cumsum(np.maximum(degs, 1))
    target = max(2048, int(cum[-1]) // (4 * pool.threads))
    chunks = balanced_chunks(cum, target)
    parts = pool.map(
        lambda ab: _propose_chunk(
            hg, vertices[ab[0] : ab[1]], clustering, cluster_weights, cap,
            bugfix, terms,
        ),
        chunks,
    )
    return (
        np.concatenate([p[0] for p in parts]),
        np.concatenate([p[1] for p in parts]),
        np.concatenate([p[2] for p in parts]),
    )


def heavy_edge_rating(
    hg: Hypergraph,
    u: int,
    clustering: np.ndarray,
    cluster_weights: np.ndarray | None = None,
    cap: int | None = None,
    bugfix: bool = True,
) -> tuple[int, int] | None:
    """Best (cluster, scaled_rating) for vertex u, or None if no eligible
    neighboring cluster exists. Ratings are RATING_SCALE fixed-point."""
    clustering = np.asarray(clustering)
    if cluster_weights is None:
        cluster_weights = np.zeros(hg.num_vertices, dtype=np.int64)
        np.add.at(cluster_weights, clustering, hg.vertex_weights)
    if cap is None:
        cap = int(hg.total_vertex_weight)
    terms = _scaled_edge_terms(hg)
    p, c, r = _propose_chunk(
        hg, np.asarray([u], dtype=np.int64), clustering, cluster_weights,
        cap, bugfix, terms,
    )
    if len(p) == 0:
        return None
    return int(c[0]), int(r[0])


def cluster_round(
    hg: Hypergraph,
    schedule: list[np.ndarray],
    cap: int,
    *,
    swap_prevention: bool = True,
    rating_bugfix: bool = True,
    clustering: np.ndarray | None = None,
    pool: WorkerPool | None = None,
) -> np.ndarray:
    """One full clustering pass over the subround schedule."""
    n = hg.num_vertices
    cluster = (
        np.arange(n, dtype=np.int64)
        if clustering is None
        else np.asarray(clustering, dtype=np.int64).copy()
    )
    cluster_weight = np.zeros(n, dtype=np.int64)
    np.add.at(cluster_weight, cluster, hg.vertex_weights)
    terms = _scaled_edge_terms(hg)

    covered = np.concatenate(schedule) if schedule else np.zeros(0, np.int64)
    if len(covered) != n or len(np.unique(covered)) != n:
        raise ValueError("schedule must cover every vertex exactly once")

    for block in schedule:
        block = np.sort(np.asarray(block, dtype=np.int64))
        single = (cluster[block] == block) & (
            cluster_weight[block] == hg.vertex_weights[block]
        )
        singles = block[single]
        if len(singles) == 0:
            continue
        proposers, targets, _ = _propose_targets(
            hg, singles, cluster, cluster_weight, cap, rating_bugfix, terms,
            pool,
        )
        if len(proposers) == 0:
            continue

        if swap_prevention:
            t_mark = np.full(n, -1, dtype=np.int64)
            t_mark[proposers] = targets
            mutual = (t_mark[targets] == proposers) & (targets != proposers)
            if mutual.any():
                a = proposers[mutual]
                b = targets[mutual]
                once = a < b  # handle each pair from its smaller endpoint
                a, b = a[once], b[once]
                wa, wb = cluster_weight[a], cluster_weight[b]
                rep = np.where(
                    wa > wb, a, np.where(wb > wa, b, np.minimum(a, b))
                )
                t_mark[a] = rep
                t_mark[b] = rep
                targets = t_mark[proposers]
                real = targets != proposers
                proposers, targets = proposers[real], targets[real]

        if len(proposers) == 0:
            continue

        # approval: per target cluster admit the largest prefix of
        # proposers (by increasing weight, then id) fitting under cap
        w = hg.vertex_weights[proposers]
        order = np.lexsort((proposers, w, targets))
        ps, cs, ws = proposers[order], targets[order], w[order]
        bounds = group_bounds(cs)
        pref = segment_cumsum(ws, bounds)
        allowed = cap - cluster_weight[cs[bounds[:-1]]]
        ok = pref <= np.repeat(allowed, np.diff(bounds))
        appr_p, appr_c = ps[ok], cs[ok]
        if len(appr_p) == 0:
            continue
        cluster[appr_p] = appr_c
        np.add.at(cluster_weight, appr_c, hg.vertex_weights[appr_p])
        assert int(cluster_weight[appr_c].max()) <= cap, (
            "cluster weight cap violated during approval"
        )
    return cluster


def _resolve_roots(cluster: np.ndarray) -> np.ndarray:
    """Collapse cluster pointers to roots.

    With swap prevention on, pointers are depth-1 chains already. With
    it off, mutual-pair 2-cycles can appear; collapse those to the
    smaller id, then pointer-jump to the fixpoint.
    """
    n = len(cluster)
    ids = np.arange(n, dtype=np.int64)
    c = cluster.astype(np.int64).copy()
    hop = c[c]
    cyc = (hop == ids) & (c != ids)
    if cyc.any():
        c[cyc] = np.minimum(ids[cyc], c[cyc])
    for _ in range(64):
        hop = c[c]
        if np.array_equal(hop, c):
            return c
        c = hop
    raise AssertionError("cluster pointers failed to resolve to roots")


def contract(
    hg: Hypergraph, clustering: np.ndarray
) -> tuple[Hypergraph, np.ndarray]:
    """Contract clusters into coarse vertices.

    Pins are deduplicated per edge, single-pin edges dropped, and
    identical coarse edges merged with summed weights. Coarse vertex ids
    follow ascending root id; coarse edges are ordered by (size,
    lexicographic pin content). Returns (coarse, mapping).
    """
    roots = _resolve_roots(np.asarray(clustering))
    root_ids = np.unique(roots)
    mapping = np.searchsorted(root_ids, roots).astype(np.int32)
    nv = len(root_ids)
    cw = np.zeros(nv, dtype=np.int64)
    np.add.at(cw, mapping, hg.vertex_weights)

    if hg.num_pins == 0:
        return (
            Hypergraph(
                np.zeros(1, np.int64), np.zeros(0, np.int32), cw,
                np.zeros(0, np.int64),
            ),
            mapping,
        )

    # dedup pins within each edge
    mp = mapping[hg.pins].astype(np.int64)
    order = np.lexsort((mp, hg.edge_of_pin))
    ep, vp = hg.edge_of_pin[order], mp[order]
    first = np.ones(len(ep), dtype=bool)
    first[1:] = (ep[1:] != ep[:-1]) | (vp[1:] != vp[:-1])
    ep, vp = ep[first], vp[first]
    sizes = np.bincount(ep, minlength=hg.num_edges).astype(np.int64)

    keep_edge = sizes >= 2
    entry_keep = keep_edge[ep]
    vp = vp[entry_keep]
    surv = np.flatnonzero(keep_edge)
    sizes = sizes[surv]
    weights = hg.edge_weights[surv].copy()
    offsets = np.zeros(len(surv) + 1, dtype=np.int64)
    np.cumsum(sizes, out=offsets[1:])

    # merge identical edges, working one size class at a time so rows
    # can be compared as fixed-width matrices (exact, no hashing)
    out_pins: list[np.ndarray] = []
    out_sizes: list[np.ndarray] = []
    out_weights: list[np.ndarray] = []
    for s in np.unique(sizes):
        rows = np.flatnonzero(sizes == s)
        flat, _ = ragged_gather(offsets, rows)
        mat = vp[flat].reshape(len(rows), int(s))
        order = np.lexsort(tuple(mat[:, ::-1].T))
        mat = mat[order]
        wrow = weights[rows][order]
        first = np.ones(len(rows), dtype=bool)
        if len(rows) > 1:
            first[1:] = (mat[1:] != mat[:-1]).any(axis=1)
        bounds = group_bounds(np.cumsum(first) - 1)
        out_pins.append(mat[first].reshape(-1))
        out_sizes.append(np.full(int(first.sum()), s, dtype=np.int64))
        out_weights.append(segment_sum(wrow, bounds))

    if out_sizes:
        csizes = np.concatenate(out_sizes)
        cpins = np.concatenate(out_pins).astype(np.int32)
        cweights = np.concatenate(out_weights)
    else:
        csizes = np.zeros(0, dtype=np.int64)
        cpins = np.zeros(0, dtype=np.int32)
        cweights = np.zeros(0, dtype=np.int64)
    coffsets = np.zeros(len(csizes) + 1, dtype=np.int64)
    np.cumsum(csizes, out=coffsets[1:])
    coarse = Hypergraph(coffsets, cpins, cw, cweights, validate=False)
    return coarse, mapping


def coarsen_to_limit(
    hg: Hypergraph,
    k: int,
    cfg: CoarseningConfig,
    seed: int,
    pool: WorkerPool | None = None,
) -> list[tuple[Hypergraph, np.ndarray]]:
    """Repeat cluster_round + contract until the vertex count reaches the
    contraction limit or a pass shrinks it by less than 1 percent.

    Returns the hierarchy as a list of (coarse_hypergraph, mapping)
    pairs, finest first; mapping[i] projects level i-1 (or the input)
    onto level i.
    """
    limit = cfg.contraction_limit if cfg.contraction_limit > 0 else 160 * k
    levels: list[tuple[Hypergraph, np.ndarray]] = []
    current = hg
    pass_idx = 0
    while current.num_vertices > limit:
        n = current.num_vertices
        cap = cfg.max_cluster_weight_factor * (
            -(-current.total_vertex_weight // limit)
        )
        sched_seed = hash_u64(seed, _SCHEDULE_SALT, pass_idx)
        if cfg.prefix_doubling:
            schedule = prefix_doubling_schedule(n, sched_seed)
        else:
            schedule = equal_subrounds(n, sched_seed, cfg.subrounds)
        clustering = cluster_round(
            current, schedule, cap,
            swap_prevention=cfg.swap_prevention,
            rating_bugfix=cfg.rating_bugfix,
            pool=pool,
        )
        coarse, mapping = contract(current, clustering)
        if coarse.num_vertices >= n:
            break
        levels.append((coarse, mapping))
        current = coarse
        pass_idx += 1
        if 100 * coarse.num_vertices > 99 * n:
            break
    return levels
