"""Shared array primitives: ragged gathers, segment reductions, hashing.

Everything here is a deterministic pure function of its inputs. All
reductions are integer-only so that results are exact and independent of
evaluation order; nothing reads ambient parallelism or global RNG state.
"""

from __future__ import annotations

import numpy as np

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF

_U = np.uint64


def ragged_gather(offsets: np.ndarray, ids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Expand the CSR spans of `ids` into one flat index array.

    Returns (flat, bounds): `flat` indexes the CSR value array so that
    `values[flat]` concatenates the spans of every id in order, and
    `bounds` (length len(ids)+1) delimits each id's slice inside `flat`.
    """
    ids = np.asarray(ids, dtype=np.int64)
    counts = (offsets[ids + 1] - offsets[ids]).astype(np.int64)
    bounds = np.zeros(len(ids) + 1, dtype=np.int64)
    np.cumsum(counts, out=bounds[1:])
    total = int(bounds[-1])
    flat = np.arange(total, dtype=np.int64)
    flat -= np.repeat(bounds[:-1], counts)
    flat += np.repeat(offsets[ids].astype(np.int64), counts)
    return flat, bounds


def segment_sum(values: np.ndarray, bounds: np.ndarray, dtype=np.int64) -> np.ndarray:
    """Sum `values` over the consecutive segments [bounds[i], bounds[i+1]).

    Empty segments yield 0. Requires bounds[-1] == len(values).
    """
    values = np.asarray(values, dtype=dtype)
    nseg = len(bounds) - 1
    out = np.zeros(nseg, dtype=dtype)
    if values.size == 0 or nseg == 0:
        return out
    starts = bounds[:-1]
    nonempty = bounds[1:] > starts
    if nonempty.any():
        # reduceat segments run to the next listed start; consecutive CSR
        # bounds make that equal the true segment end even across empties
        out[nonempty] = np.add.reduceat(values, starts[nonempty])
    return out


def segment_cumsum(values: np.ndarray, bounds: np.ndarray) -> np.ndarray:
    """Inclusive running sum of `values` restarting at every segment start."""
    values = np.asarray(values, dtype=np.int64)
    if values.size == 0:
        return values.copy()
    cs = np.cumsum(values)
    counts = np.diff(bounds)
    starts = np.minimum(bounds[:-1], values.size - 1)
    base = cs[starts] - values[starts]
    return cs - np.repeat(base, counts)


def group_bounds(*keys: np.ndarray) -> np.ndarray:
    """Bounds of maximal runs of equal tuples in already-sorted key arrays."""
    n = len(keys[0])
    if n == 0:
        return np.zeros(1, dtype=np.int64)
    change = np.zeros(n - 1, dtype=bool)
    for key in keys:
        change |= key[1:] != key[:-1]
    cuts = np.flatnonzero(change) + 1
    return np.concatenate(([0], cuts, [n])).astype(np.int64)


def mix64(x: np.ndarray | int) -> np.ndarray | np.uint64:
    """SplitMix64 finalizer; a stateless uint64 -> uint64 hash."""
    with np.errstate(over="ignore"):  # wraparound is the point
        z = (np.asarray(x, dtype=np.uint64) + _U(0x9E3779B97F4A7C15)) & _U(_MASK64)
        z = (z ^ (z >> _U(30))) * _U(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> _U(27))) * _U(0x94D049BB133111EB)
        return z ^ (z >> _U(31))


def hash_permutation(n: int, seed: int) -> np.ndarray:
    """Pseudorandom permutation of range(n), a pure function of (n, seed)."""
    salt = mix64(np.uint64(seed & _MASK64))
    keys = mix64(np.arange(n, dtype=np.uint64) ^ salt)
    return np.argsort(keys, kind="stable").astype(np.int64)


def hash_u64(*parts: int) -> int:
    """Fold integers into one uint64 via iterated SplitMix64. For seeding."""
    h = np.uint64(0x9E3779B97F4A7C15)
    for p in parts:
        h = mix64(h ^ np.uint64(p & _MASK64))
    return int(h)


def fnv1a64(values: np.ndarray) -> int:
    """64-bit FNV-1a folding one array element per step (not per byte)."""
    h = FNV_OFFSET
    arr = np.asarray(values)
    if arr.dtype.kind not in "iu":
        raise TypeError("fnv1a64 expects an integer array")
    for x in arr.astype(np.uint64).tolist():
        h = ((h ^ x) * FNV_PRIME) & _MASK64
    return h


def first_true_per_segment(mask: np.ndarray, bounds: np.ndarray) -> np.ndarray:
    """Per segment: index (into mask) of its first True slot, or -1."""
    nseg = len(bounds) - 1
    hit = segment_sum(mask.astype(np.int64), bounds) > 0
    out = np.full(nseg, -1, dtype=np.int64)
    if mask.size == 0 or not hit.any():
        return out
    # position of the first True inside each segment via cummax trick
    idx = np.flatnonzero(mask)
    seg_of_idx = np.searchsorted(bounds, idx, side="right") - 1
    first = np.full(nseg, -1, dtype=np.int64)
    # idx ascending, keep first per segment
    seg_first = group_bounds(seg_of_idx)[:-1]
    first[seg_of_idx[seg_first]] = idx[seg_first]
    return first


def balanced_chunks(weights_cum: np.ndarray, target: int) -> list[tuple[int, int]]:
    """Split range(len(weights_cum)) into chunks of ~`target` total weight.

    `weights_cum` is the inclusive cumulative weight of the items. Chunk
    boundaries depend only on the weights and target, never on thread
    count, so parallel runs over these chunks are reproducible.
    """
    n = len(weights_cum)
    if n == 0:
        return []
    total = int(weights_cum[-1])
    target = max(1, int(target))
    nchunks = max(1, -(-total // target))
    cuts = [0]
    for i in range(1, nchunks):
        pos = int(np.searchsorted(weights_cum, i * target, side="left")) + 1
        pos = min(pos, n)
        if pos > cuts[-1]:
            cuts.append(pos)
    if cuts[-1] != n:
        cuts.append(n)
    return [(cuts[i], cuts[i + 1]) for i in range(len(cuts) - 1)]
