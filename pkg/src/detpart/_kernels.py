"""Compiled inner loops for the chunk-level hot paths.

Every kernel is integer-only and sequential within its chunk, so results
are bit-identical to the plain numpy/python formulations they replaced
(the test suite pins both against frozen oracles). `nogil=True` lets the
chunk thread pool run kernels concurrently; chunk boundaries are fixed
by the workload, never by thread count, so parallel runs stay exact.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_INT64_MIN = np.iinfo(np.int64).min


@njit(cache=True, nogil=True)
def candidate_kernel(inc_offsets, inc_edges, edge_weights, pin_counts,
                     assignment, verts, tau_num, tau_den):
    """Best move target, gain, and temperature filter per vertex.

    For vertex v with own block b: B[j] = sum of w(e) over incident e
    with a pin in block j; gain(j) = removal - W_inc + B[j] where
    removal counts edges with exactly one own-block pin. The target is
    the smallest j != b maximizing B[j] (untouched blocks count as 0).
    A vertex qualifies iff tau_den * gain >= -tau_num * penalty, with
    penalty the weight of incident edges keeping >1 own-block pins.
    """
    nv = len(verts)
    k = pin_counts.shape[1]
    targets = np.zeros(nv, dtype=np.int32)
    gains = np.zeros(nv, dtype=np.int64)
    qual = np.zeros(nv, dtype=np.bool_)
    brow = np.zeros(k, dtype=np.int64)
    for i in range(nv):
        v = verts[i]
        own = assignment[v]
        removal = np.int64(0)
        w_inc = np.int64(0)
        penalty = np.int64(0)
        for s in range(inc_offsets[v], inc_offsets[v + 1]):
            e = inc_edges[s]
            w = edge_weights[e]
            w_inc += w
            cnt_own = pin_counts[e, own]
            if cnt_own == 1:
                removal += w
            elif cnt_own > 1:
                penalty += w
            for j in range(k):
                if pin_counts[e, j] > 0:
                    brow[j] += w
        best = _INT64_MIN
        best_j = np.int32(0)
        for j in range(k):
            if j == own:
                continue
            if brow[j] > best:
                best = brow[j]
                best_j = np.int32(j)
        for j in range(k):
            brow[j] = 0
        g = removal - w_inc + best
        targets[i] = best_j
        gains[i] = g
        qual[i] = tau_den * g >= -tau_num * penalty
    return targets, gains, qual


@njit(cache=True, nogil=True)
def rebalance_targets_kernel(inc_offsets, inc_edges, edge_weights,
                             pin_counts, assignment, vertex_weights,
                             block_weights, verts, max_block,
                             dz_num, dz_den):
    """Best escape target per vertex under weight constraints.

    Valid targets j satisfy block_weight[j] + c(v) <= max_block and,
    when the deadzone is active, post * dz_den < max_block * dz_den -
    dz_num (exact cross-multiplied rational comparison). Rows without a
    valid target keep gain INT64_MIN.
    """
    nv = len(verts)
    k = pin_counts.shape[1]
    targets = np.zeros(nv, dtype=np.int32)
    gains = np.full(nv, _INT64_MIN, dtype=np.int64)
    brow = np.zeros(k, dtype=np.int64)
    bound = max_block * dz_den - dz_num
    for i in range(nv):
        v = verts[i]
        own = assignment[v]
        cw = vertex_weights[v]
        removal = np.int64(0)
        w_inc = np.int64(0)
        for s in range(inc_offsets[v], inc_offsets[v + 1]):
            e = inc_edges[s]
            w = edge_weights[e]
            w_inc += w
            if pin_counts[e, own] == 1:
                removal += w
            for j in range(k):
                if pin_counts[e, j] > 0:
                    brow[j] += w
        best = _INT64_MIN
        best_j = np.int32(0)
        for j in range(k):
            if j == own:
                continue
            post = block_weights[j] + cw
            if post > max_block:
                continue
            if dz_num > 0 and post * dz_den >= bound:
                continue
            val = removal - w_inc + brow[j]
            if val > best:
                best = val
                best_j = np.int32(j)
        for j in range(k):
            brow[j] = 0
        targets[i] = best_j
        gains[i] = best
    return targets, gains


@njit(cache=True, nogil=True)
def simulate_groups_kernel(e_s, v_s, t_s, bounds, assignment,
                           edge_weights, pin_counts):
    """Afterburner event simulation over contiguous edge groups.

    Members of one group share an edge and are already in simulation
    turn order. Each member leaves its own block and enters its target
    on a running pin count seeded from the live counts: a leave that
    reaches 0 pins earns +w, an enter that reaches 1 pin costs -w.
    """
    k = pin_counts.shape[1]
    contrib = np.zeros(len(e_s), dtype=np.int64)
    cnt = np.zeros(k, dtype=np.int64)
    loaded = np.zeros(k, dtype=np.bool_)
    touched = np.empty(k, dtype=np.int64)
    for g in range(len(bounds) - 1):
        lo = bounds[g]
        hi = bounds[g + 1]
        e = e_s[lo]
        w = edge_weights[e]
        nt = 0
        for s in range(lo, hi):
            own = assignment[v_s[s]]
            tgt = t_s[s]
            if not loaded[own]:
                cnt[own] = pin_counts[e, own]
                loaded[own] = True
                touched[nt] = own
                nt += 1
            if not loaded[tgt]:
                cnt[tgt] = pin_counts[e, tgt]
                loaded[tgt] = True
                touched[nt] = tgt
                nt += 1
            cnt[own] -= 1
            c = np.int64(0)
            if cnt[own] == 0:
                c += w
            cnt[tgt] += 1
            if cnt[tgt] == 1:
                c -= w
            contrib[s] = c
        for t in range(nt):
            loaded[touched[t]] = False
    return contrib


@njit(cache=True, nogil=True)
def _blocking_path(s, adj_offsets, adj_flat, to, cap, is_snk, level, ptr,
                   path):
    """One augmenting path in the level graph (iterative DFS with the
    usual current-arc pointers); returns the amount pushed."""
    plen = 0
    u = s
    while True:
        if is_snk[u] and plen > 0:
            pushed = cap[path[0]]
            for i in range(1, plen):
                c = cap[path[i]]
                if c < pushed:
                    pushed = c
            for i in range(plen):
                a = path[i]
                cap[a] -= pushed
                cap[a ^ 1] += pushed
            return pushed
        deg = adj_offsets[u + 1] - adj_offsets[u]
        advanced = False
        while ptr[u] < deg:
            a = adj_flat[adj_offsets[u] + ptr[u]]
            v = to[a]
            if cap[a] > 0 and level[v] == level[u] + 1:
                path[plen] = a
                plen += 1
                u = v
                advanced = True
                break
            ptr[u] += 1
        if advanced:
            continue
        if plen == 0:
            return np.int64(0)
        # dead end: retreat and retire the arc that led here
        level[u] = -1
        a = path[plen - 1]
        plen -= 1
        u = to[a ^ 1]
        ptr[u] += 1


@njit(cache=True, nogil=True)
def dinic_kernel(adj_offsets, adj_flat, to, cap, is_src, is_snk,
                 flow0, limit, has_limit):
    """Dinic rounds until no source-sink residual path remains; may stop
    early once the accumulated flow value exceeds `limit`. Mutates `cap`
    and returns the new flow value."""
    n = len(adj_offsets) - 1
    flow = flow0
    level = np.empty(n, dtype=np.int64)
    ptr = np.empty(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    path = np.empty(n + 2, dtype=np.int64)
    while True:
        if has_limit and flow > limit:
            return flow
        for i in range(n):
            level[i] = -1
        qt = 0
        for s in range(n):
            if is_src[s]:
                level[s] = 0
                queue[qt] = s
                qt += 1
        reached = False
        qh = 0
        while qh < qt:
            u = queue[qh]
            qh += 1
            for ai in range(adj_offsets[u], adj_offsets[u + 1]):
                a = adj_flat[ai]
                v = to[a]
                if cap[a] > 0 and level[v] < 0:
                    level[v] = level[u] + 1
                    if is_snk[v]:
                        reached = True
                    queue[qt] = v
                    qt += 1
        if not reached:
            return flow
        for i in range(n):
            ptr[i] = 0
        for s in range(n):
            if not is_src[s]:
                continue
            while True:
                got = _blocking_path(
                    s, adj_offsets, adj_flat, to, cap, is_snk, level,
                    ptr, path,
                )
                if got == 0:
                    break
                flow += got
                if has_limit and flow > limit:
                    return flow


@njit(cache=True, nogil=True)
def residual_reach_kernel(adj_offsets, adj_flat, to, cap, start, forward):
    """BFS over residual arcs from `start` (forward: cap[a] > 0 on the
    arc itself; backward: residual capacity of the reverse twin)."""
    n = len(adj_offsets) - 1
    out = start.copy()
    queue = np.empty(n, dtype=np.int64)
    qt = 0
    for u in range(n):
        if out[u]:
            queue[qt] = u
            qt += 1
    qh = 0
    while qh < qt:
        u = queue[qh]
        qh += 1
        for ai in range(adj_offsets[u], adj_offsets[u + 1]):
            a = adj_flat[ai]
            v = to[a]
            if forward:
                open_ = cap[a] > 0
            else:
                open_ = cap[a ^ 1] > 0
            if open_ and not out[v]:
                out[v] = True
                queue[qt] = v
                qt += 1
    return out


@njit(cache=True, nogil=True)
def _heap_push(hk, hv, size, key, v):
    i = size
    hk[i] = key
    hv[i] = v
    while i > 0:
        p = (i - 1) >> 1
        if hk[i] < hk[p] or (hk[i] == hk[p] and hv[i] < hv[p]):
            hk[i], hk[p] = hk[p], hk[i]
            hv[i], hv[p] = hv[p], hv[i]
            i = p
        else:
            break
    return size + 1


@njit(cache=True, nogil=True)
def _heap_pop(hk, hv, size):
    key = hk[0]
    v = hv[0]
    size -= 1
    if size > 0:
        hk[0] = hk[size]
        hv[0] = hv[size]
        i = 0
        while True:
            l = 2 * i + 1
            if l >= size:
                break
            r = l + 1
            c = l
            if r < size and (hk[r] < hk[l] or
                             (hk[r] == hk[l] and hv[r] < hv[l])):
                c = r
            if hk[c] < hk[i] or (hk[c] == hk[i] and hv[c] < hv[i]):
                hk[i], hk[c] = hk[c], hk[i]
                hv[i], hv[c] = hv[c], hv[i]
                i = c
            else:
                break
    return key, v, size


@njit(cache=True, nogil=True)
def _grow_absorb(v, inc_offsets, inc_edges, pin_offsets, pins, sizes,
                 edge_weights, in_l, cnt_l, gain, hk, hv, hp_size):
    in_l[v] = True
    for s in range(inc_offsets[v], inc_offsets[v + 1]):
        e = inc_edges[s]
        before_l = cnt_l[e]
        cnt_l[e] = before_l + 1
        before_r = sizes[e] - before_l  # counts v itself
        w = edge_weights[e]
        for p in range(pin_offsets[e], pin_offsets[e + 1]):
            u = pins[p]
            if in_l[u]:
                continue
            delta = np.int64(0)
            if before_l == 0:
                delta += w  # edge no longer newly cut by u
            if before_r == 2:
                delta += w  # u became the last outside pin
            if delta != 0:
                gain[u] += delta
                hp_size = _heap_push(hk, hv, hp_size, -gain[u], u)
    return hp_size


@njit(cache=True, nogil=True)
def greedy_grow_kernel(inc_offsets, inc_edges, pin_offsets, pins, sizes,
                       vertex_weights, edge_weights, gain, start_order,
                       start_at, ideal_l, cap_l):
    """Grow block 0 to `ideal_l` by highest-gain boundary absorption.

    Min-heap over (-gain, vertex); every push strictly increases the
    vertex's gain, so heap entries are distinct and the pop order is the
    unique total order regardless of internal layout. Stale entries and
    vertices no longer fitting under `cap_l` are dropped on pop. When
    the boundary empties the next fitting vertex in `start_order` seeds
    a new component, scanning at most once around.
    """
    n = len(vertex_weights)
    in_l = np.zeros(n, dtype=np.bool_)
    cnt_l = np.zeros(len(sizes), dtype=np.int64)
    # each (edge, outside-pin) pair pushes at most twice over the run
    cap_heap = 2 * len(pins) + 16
    hk = np.empty(cap_heap, dtype=np.int64)
    hv = np.empty(cap_heap, dtype=np.int64)
    hp_size = 0
    c_l = np.int64(0)
    scanned = 0
    while c_l < ideal_l:
        moved = False
        while hp_size > 0:
            key, v, hp_size = _heap_pop(hk, hv, hp_size)
            if in_l[v] or -key != gain[v]:
                continue
            if c_l + vertex_weights[v] > cap_l:
                continue  # c_l only grows, the entry can stay dropped
            c_l += vertex_weights[v]
            hp_size = _grow_absorb(
                v, inc_offsets, inc_edges, pin_offsets, pins, sizes,
                edge_weights, in_l, cnt_l, gain, hk, hv, hp_size,
            )
            moved = True
            break
        if not moved:
            # boundary exhausted (start, or disconnected piece): take
            # the next fitting vertex in start order, wrapping once
            while scanned < n:
                v = start_order[(start_at + scanned) % n]
                scanned += 1
                if not in_l[v] and c_l + vertex_weights[v] <= cap_l:
                    c_l += vertex_weights[v]
                    hp_size = _grow_absorb(
                        v, inc_offsets, inc_edges, pin_offsets, pins,
                        sizes, edge_weights, in_l, cnt_l, gain, hk, hv,
                        hp_size,
                    )
                    moved = True
                    break
            if not moved:
                break
    return in_l
