"""Weighted hypergraph and k-way partition state.

The hypergraph is an immutable pair of CSR incidences (vertex -> edges,
edge -> pins) with positive integer weights. PartitionState tracks, for
every hyperedge, how many of its pins live in each block; this makes the
connectivity metric and single-move gains O(1) per (edge, block) probe
and lets batched move application commute exactly, because every update
is an integer add.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .vecops import fnv1a64, ragged_gather, segment_sum

# guard against int64 overflow in metric / weight arithmetic
_WEIGHT_BUDGET = 1 << 62


class Hypergraph:
    """Immutable weighted hypergraph in CSR form.

    Vertices and edges are dense 0-based ids. Pins of an edge are stored
    in ascending vertex order; the incident edges of a vertex in
    ascending edge order.
    """

    def __init__(
        self,
        pin_offsets: np.ndarray,
        pins: np.ndarray,
        vertex_weights: np.ndarray,
        edge_weights: np.ndarray,
        *,
        validate: bool = True,
    ):
        self.pin_offsets = np.ascontiguousarray(pin_offsets, dtype=np.int64)
        self.pins = np.ascontiguousarray(pins, dtype=np.int32)
        self.vertex_weights = np.ascontiguousarray(vertex_weights, dtype=np.int64)
        self.edge_weights = np.ascontiguousarray(edge_weights, dtype=np.int64)

        self.num_vertices = len(self.vertex_weights)
        self.num_edges = len(self.edge_weights)
        self.num_pins = len(self.pins)
        self.edge_sizes = np.diff(self.pin_offsets).astype(np.int32)

        # edge id of every pin slot
        self.edge_of_pin = np.repeat(
            np.arange(self.num_edges, dtype=np.int32), self.edge_sizes
        )

        if validate:
            self._validate()

        # vertex -> incident edges CSR, built by stable counting sort so
        # each vertex's edge list is ascending
        order = np.argsort(self.pins, kind="stable")
        self.inc_edges = self.edge_of_pin[order]
        counts = np.bincount(self.pins, minlength=self.num_vertices)
        self.inc_offsets = np.zeros(self.num_vertices + 1, dtype=np.int64)
        np.cumsum(counts, out=self.inc_offsets[1:])
        self.degrees = counts.astype(np.int32)

        self.total_vertex_weight = int(self.vertex_weights.sum())

    def _validate(self) -> None:
        if self.pin_offsets[0] != 0 or self.pin_offsets[-1] != self.num_pins:
            raise ValueError("pin_offsets must start at 0 and end at len(pins)")
        if np.any(np.diff(self.pin_offsets) < 1):
            raise ValueError("every hyperedge needs at least one pin")
        if self.num_pins and (
            self.pins.min() < 0 or self.pins.max() >= self.num_vertices
        ):
            raise ValueError("pin vertex id out of range")
        if self.num_vertices and self.vertex_weights.min() < 1:
            raise ValueError("vertex weights must be positive integers")
        if self.num_edges and self.edge_weights.min() < 1:
            raise ValueError("edge weights must be positive integers")
        # duplicate pin inside one edge
        if self.num_pins:
            same_edge = self.edge_of_pin[1:] == self.edge_of_pin[:-1]
            dup_sorted = same_edge & (self.pins[1:] == self.pins[:-1])
            if np.any(self.pins[1:][same_edge] <= self.pins[:-1][same_edge]):
                # pins may arrive unsorted; do a real per-edge check
                order = np.lexsort((self.pins, self.edge_of_pin))
                ep, pp = self.edge_of_pin[order], self.pins[order]
                if np.any((ep[1:] == ep[:-1]) & (pp[1:] == pp[:-1])):
                    raise ValueError("duplicate pin within a hyperedge")
            elif np.any(dup_sorted):
                raise ValueError("duplicate pin within a hyperedge")
        worst = int(
            (self.edge_weights * np.maximum(self.edge_sizes.astype(np.int64) - 1, 0)).sum()
        )
        if worst > _WEIGHT_BUDGET:
            raise ValueError("total edge weight too large: worst-case metric overflows")
        if int(self.vertex_weights.sum()) > _WEIGHT_BUDGET:
            raise ValueError("total vertex weight too large")

    @classmethod
    def from_edges(
        cls,
        edges: Sequence[Iterable[int]],
        num_vertices: int | None = None,
        vertex_weights: Sequence[int] | None = None,
        edge_weights: Sequence[int] | None = None,
    ) -> "Hypergraph":
        """Build from a list of pin iterables; weights default to 1."""
        pin_lists = [np.asarray(sorted(e), dtype=np.int32) for e in edges]
        sizes = np.array([len(p) for p in pin_lists], dtype=np.int64)
        offsets = np.zeros(len(pin_lists) + 1, dtype=np.int64)
        np.cumsum(sizes, out=offsets[1:])
        pins = (
            np.concatenate(pin_lists)
            if pin_lists
            else np.zeros(0, dtype=np.int32)
        )
        if num_vertices is None:
            num_vertices = int(pins.max()) + 1 if pins.size else 0
        vw = (
            np.ones(num_vertices, dtype=np.int64)
            if vertex_weights is None
            else np.asarray(vertex_weights, dtype=np.int64)
        )
        ew = (
            np.ones(len(pin_lists), dtype=np.int64)
            if edge_weights is None
            else np.asarray(edge_weights, dtype=np.int64)
        )
        return cls(offsets, pins, vw, ew)

    def edge_pins(self, e: int) -> np.ndarray:
        return self.pins[self.pin_offsets[e] : self.pin_offsets[e + 1]]

    def incident_edges(self, v: int) -> np.ndarray:
        return self.inc_edges[self.inc_offsets[v] : self.inc_offsets[v + 1]]

    def __repr__(self) -> str:
        return (
            f"Hypergraph(n={self.num_vertices}, m={self.num_edges}, "
            f"pins={self.num_pins})"
        )


def max_block_weight(total_weight: int, k: int, epsilon: Fraction) -> int:
    """Balance cap L_max = floor((1 + eps) * ceil(total/k)), exact integers."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ceil_avg = -(-total_weight // k)
    num = epsilon.numerator + epsilon.denominator
    return (num * ceil_avg) // epsilon.denominator


class PartitionState:
    """Mutable k-way partition of a hypergraph with integer bookkeeping.

    Maintains per-edge pin counts per block (`pin_counts`, shape (m, k)),
    per-edge connectivity, and per-block weights. All derived data is an
    exact function of `assignment`, re-derivable via `_rebuild`.
    """

    def __init__(
        self,
        hg: Hypergraph,
        k: int,
        epsilon: Fraction,
        assignment: np.ndarray,
        *,
        check: bool = True,
    ):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.hg = hg
        self.k = k
        self.epsilon = Fraction(epsilon)
        self.assignment = np.ascontiguousarray(assignment, dtype=np.int32).copy()
        if check:
            if len(self.assignment) != hg.num_vertices:
                raise ValueError("assignment length must equal vertex count")
            if hg.num_vertices and (
                self.assignment.min() < 0 or self.assignment.max() >= k
            ):
                raise ValueError("block id out of range")
        self.max_block = max_block_weight(hg.total_vertex_weight, k, self.epsilon)
        self.ceil_avg = -(-hg.total_vertex_weight // k)
        self._rebuild()

    def _rebuild(self) -> None:
        hg = self.hg
        self.pin_counts = np.zeros((hg.num_edges, self.k), dtype=np.int32)
        if hg.num_pins:
            np.add.at(
                self.pin_counts, (hg.edge_of_pin, self.assignment[hg.pins]), 1
            )
        self.connectivity = (self.pin_counts > 0).sum(axis=1).astype(np.int32)
        self.block_weights = np.zeros(self.k, dtype=np.int64)
        np.add.at(self.block_weights, self.assignment, hg.vertex_weights)

    # -- metric and balance ------------------------------------------------

    def metric(self) -> int:
        """Connectivity objective: sum over edges of weight * (lambda - 1)."""
        return int(
            (self.hg.edge_weights * (self.connectivity.astype(np.int64) - 1)).sum()
        )

    def is_balanced(self) -> bool:
        return bool((self.block_weights <= self.max_block).all())

    def imbalance(self) -> Fraction:
        """max_i c(V_i) / (c(V)/k) - 1 as an exact rational."""
        total = self.hg.total_vertex_weight
        if total == 0:
            return Fraction(0)
        return Fraction(int(self.block_weights.max()) * self.k, total) - 1

    # -- moves ---------------------------------------------------------------

    def gain(self, v: int, target: int) -> int:
        """Metric decrease if v moves to `target`, on the current state."""
        own = int(self.assignment[v])
        if target == own:
            raise ValueError(f"vertex {v} is already in block {target}")
        if not (0 <= target < self.k):
            raise ValueError(f"target block {target} out of range")
        lo, hi = self.hg.inc_offsets[v], self.hg.inc_offsets[v + 1]
        eids = self.hg.inc_edges[lo:hi]
        if len(eids) == 0:
            return 0
        w = self.hg.edge_weights[eids]
        removal = int(w[self.pin_counts[eids, own] == 1].sum())
        penalty = int(w[self.pin_counts[eids, target] == 0].sum())
        return removal - penalty

    def apply_moves(self, moves: Sequence[tuple[int, int]]) -> None:
        """Apply a batch of (vertex, target) moves synchronously.

        The result only depends on the set of moves, not on order. A
        vertex appearing twice, or a move to its current block, is a
        contract violation.
        """
        if not len(moves):
            return
        arr = np.asarray(moves, dtype=np.int64).reshape(len(moves), 2)
        vs, ts = arr[:, 0], arr[:, 1].astype(np.int32)
        if len(np.unique(vs)) != len(vs):
            raise ValueError("duplicate vertex in move batch")
        if vs.min() < 0 or vs.max() >= self.hg.num_vertices:
            raise ValueError("vertex id out of range")
        if ts.min() < 0 or ts.max() >= self.k:
            raise ValueError("target block out of range")
        if np.any(self.assignment[vs] == ts):
            raise ValueError("move target equals current block")
        self._apply_arrays(vs.astype(np.int32), ts)

    def _apply_arrays(self, vs: np.ndarray, ts: np.ndarray) -> None:
        """Trusted batch apply: unique vertices, targets differ from current."""
        if len(vs) == 0:
            return
        hg = self.hg
        old = self.assignment[vs]
        flat, bounds = ragged_gather(hg.inc_offsets, vs)
        eids = hg.inc_edges[flat]
        counts = np.diff(bounds)
        np.add.at(self.pin_counts, (eids, np.repeat(old, counts)), -1)
        np.add.at(self.pin_counts, (eids, np.repeat(ts, counts)), 1)
        touched = np.unique(eids)
        self.connectivity[touched] = (
            (self.pin_counts[touched] > 0).sum(axis=1).astype(np.int32)
        )
        cw = hg.vertex_weights[vs]
        np.add.at(self.block_weights, old, -cw)
        np.add.at(self.block_weights, ts, cw)
        self.assignment[vs] = ts

    # -- snapshots -------------------------------------------------------------

    def snapshot(self) -> tuple[np.ndarray, np.ndarray, int]:
        return (self.assignment.copy(), self.block_weights.copy(), self.metric())

    def restore(self, snap: tuple[np.ndarray, np.ndarray, int]) -> None:
        self.assignment[:] = snap[0]
        self._rebuild()

    def copy(self) -> "PartitionState":
        return PartitionState(
            self.hg, self.k, self.epsilon, self.assignment, check=False
        )

    # -- auditing ----------------------------------------------------------------

    def boundary_vertices(self) -> np.ndarray:
        """Vertices incident to at least one edge spanning > 1 block."""
        hg = self.hg
        cut = self.connectivity > 1
        flags = cut[hg.inc_edges].astype(np.int64)
        per_vertex = segment_sum(flags, hg.inc_offsets)
        return np.flatnonzero(per_vertex > 0).astype(np.int32)

    def validate(self) -> None:
        """Recompute all derived data from scratch and compare exactly."""
        hg = self.hg
        pc = np.zeros((hg.num_edges, self.k), dtype=np.int32)
        if hg.num_pins:
            np.add.at(pc, (hg.edge_of_pin, self.assignment[hg.pins]), 1)
        if not np.array_equal(pc, self.pin_counts):
            raise AssertionError("pin_counts out of sync with assignment")
        conn = (pc > 0).sum(axis=1).astype(np.int32)
        if not np.array_equal(conn, self.connectivity):
            raise AssertionError("connectivity out of sync with assignment")
        bw = np.zeros(self.k, dtype=np.int64)
        np.add.at(bw, self.assignment, hg.vertex_weights)
        if not np.array_equal(bw, self.block_weights):
            raise AssertionError("block_weights out of sync with assignment")
        if hg.num_edges and not np.array_equal(
            pc.sum(axis=1), hg.edge_sizes.astype(np.int64)
        ):
            raise AssertionError("pin count rows do not sum to edge sizes")

    def assignment_hash(self) -> int:
        return fnv1a64(self.assignment)
