"""File formats: hMetis hypergraphs, Metis graphs, partitions, run records.

Parsers report errors with 1-based physical line numbers. Run records are
single JSON lines with lexicographically sorted keys so byte-level diffs
of record streams are meaningful.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .hypergraph import Hypergraph
from .vecops import fnv1a64


class ParseError(ValueError):
    """Malformed input file; str(err) names the file line."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def _content_lines(text: str):
    """Yield (line_no, tokens) for non-comment, non-blank lines."""
    for i, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("%"):
            continue
        yield i, stripped.split()


def _ints(line_no: int, tokens: list[str]) -> list[int]:
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise ParseError(line_no, f"malformed integer in {tokens!r}") from None


def parse_hmetis(text: str) -> Hypergraph:
    """Parse the hMetis hypergraph format.

    Header: `<#edges> <#vertices> [fmt]` with fmt in {1, 10, 11}; 1 means
    edge weights (first number on each edge line), 10 vertex weights
    (one per line after the edges), 11 both. Pins are 1-based. `%` lines
    are comments.
    """
    lines = _content_lines(text)
    try:
        line_no, header = next(lines)
    except StopIteration:
        raise ParseError(1, "empty file: missing header") from None
    vals = _ints(line_no, header)
    if len(vals) not in (2, 3):
        raise ParseError(line_no, "header must be '<edges> <vertices> [fmt]'")
    num_edges, num_vertices = vals[0], vals[1]
    fmt = vals[2] if len(vals) == 3 else 0
    if fmt not in (0, 1, 10, 11):
        raise ParseError(line_no, f"unsupported fmt code {fmt}")
    if num_edges < 0 or num_vertices < 0:
        raise ParseError(line_no, "negative counts in header")
    has_edge_weights = fmt in (1, 11)
    has_vertex_weights = fmt in (10, 11)

    pin_lists: list[np.ndarray] = []
    edge_weights = np.ones(num_edges, dtype=np.int64)
    for e in range(num_edges):
        try:
            line_no, tokens = next(lines)
        except StopIteration:
            raise ParseError(
                line_no, f"truncated: expected {num_edges} edge lines, got {e}"
            ) from None
        vals = _ints(line_no, tokens)
        if has_edge_weights:
            if len(vals) < 2:
                raise ParseError(line_no, "edge line needs a weight and pins")
            if vals[0] < 1:
                raise ParseError(line_no, f"edge weight must be >= 1, got {vals[0]}")
            edge_weights[e] = vals[0]
            vals = vals[1:]
        if not vals:
            raise ParseError(line_no, "edge with no pins")
        pins = np.asarray(vals, dtype=np.int64)
        if pins.min() < 1 or pins.max() > num_vertices:
            raise ParseError(
                line_no, f"pin out of range 1..{num_vertices}: {vals}"
            )
        pins -= 1
        if len(np.unique(pins)) != len(pins):
            raise ParseError(line_no, "duplicate pin within edge")
        pin_lists.append(pins.astype(np.int32))

    vertex_weights = np.ones(num_vertices, dtype=np.int64)
    if has_vertex_weights:
        for v in range(num_vertices):
            try:
                line_no, tokens = next(lines)
            except StopIteration:
                raise ParseError(
                    line_no,
                    f"truncated: expected {num_vertices} vertex weight lines, got {v}",
                ) from None
            vals = _ints(line_no, tokens)
            if len(vals) != 1:
                raise ParseError(line_no, "vertex weight line must hold one integer")
            if vals[0] < 1:
                raise ParseError(line_no, f"vertex weight must be >= 1, got {vals[0]}")
            vertex_weights[v] = vals[0]

    for line_no, tokens in lines:
        raise ParseError(line_no, f"unexpected trailing content: {' '.join(tokens)}")

    sizes = np.array([len(p) for p in pin_lists], dtype=np.int64)
    offsets = np.zeros(num_edges + 1, dtype=np.int64)
    np.cumsum(sizes, out=offsets[1:])
    pins = (
        np.concatenate(pin_lists) if pin_lists else np.zeros(0, dtype=np.int32)
    )
    return Hypergraph(offsets, pins, vertex_weights, edge_weights)


def parse_metis_graph(text: str) -> Hypergraph:
    """Parse the Metis graph format into a hypergraph of 2-pin edges.

    Header: `<#vertices> <#edges> [fmt [ncon]]`; fmt is a decimal code
    whose last digit enables edge weights and middle digit vertex
    weights. The adjacency structure must be symmetric with matching
    weights; each undirected edge becomes one 2-pin hyperedge.
    """
    lines = _content_lines(text)
    try:
        line_no, header = next(lines)
    except StopIteration:
        raise ParseError(1, "empty file: missing header") from None
    vals = _ints(line_no, header)
    if len(vals) not in (2, 3, 4):
        raise ParseError(line_no, "header must be '<vertices> <edges> [fmt [ncon]]'")
    num_vertices, num_edges = vals[0], vals[1]
    fmt = f"{vals[2]:03d}" if len(vals) >= 3 else "000"
    if len(fmt) != 3 or fmt[0] != "0":
        raise ParseError(line_no, f"unsupported fmt code {fmt} (vertex sizes)")
    has_vertex_weights = fmt[1] == "1"
    has_edge_weights = fmt[2] == "1"
    ncon = vals[3] if len(vals) == 4 else (1 if has_vertex_weights else 0)
    if has_vertex_weights and ncon != 1:
        raise ParseError(line_no, "only a single vertex weight is supported")

    vertex_weights = np.ones(num_vertices, dtype=np.int64)
    srcs: list[int] = []
    dsts: list[int] = []
    wts: list[int] = []
    entry_lines: list[int] = []
    for u in range(num_vertices):
        try:
            line_no, tokens = next(lines)
        except StopIteration:
            raise ParseError(
                line_no,
                f"truncated: expected {num_vertices} adjacency lines, got {u}",
            ) from None
        vals = _ints(line_no, tokens)
        pos = 0
        if has_vertex_weights:
            if not vals:
                raise ParseError(line_no, "missing vertex weight")
            if vals[0] < 1:
                raise ParseError(line_no, f"vertex weight must be >= 1, got {vals[0]}")
            vertex_weights[u] = vals[0]
            pos = 1
        rest = vals[pos:]
        step = 2 if has_edge_weights else 1
        if len(rest) % step:
            raise ParseError(line_no, "dangling token in adjacency list")
        for i in range(0, len(rest), step):
            v = rest[i]
            if v < 1 or v > num_vertices:
                raise ParseError(line_no, f"neighbor out of range 1..{num_vertices}: {v}")
            v -= 1
            if v == u:
                raise ParseError(line_no, f"self loop at vertex {u + 1}")
            w = rest[i + 1] if has_edge_weights else 1
            if w < 1:
                raise ParseError(line_no, f"edge weight must be >= 1, got {w}")
            srcs.append(u)
            dsts.append(v)
            wts.append(w)
            entry_lines.append(line_no)

    for line_no, tokens in lines:
        raise ParseError(line_no, f"unexpected trailing content: {' '.join(tokens)}")

    src = np.asarray(srcs, dtype=np.int64)
    dst = np.asarray(dsts, dtype=np.int64)
    wt = np.asarray(wts, dtype=np.int64)
    lin = np.asarray(entry_lines, dtype=np.int64)

    # symmetry: every directed entry must have exactly one mirror with
    # the same weight
    lo = np.minimum(src, dst)
    hi = np.maximum(src, dst)
    key = lo * num_vertices + hi
    order = np.lexsort((src, key))
    ks, ss, ws_, ls = key[order], src[order], wt[order], lin[order]
    if len(ks) % 2:
        bad = int(ls[-1])
        raise ParseError(bad, "asymmetric adjacency structure")
    a, b = ks[0::2], ks[1::2]
    pair_ok = (
        (a == b)
        & (ss[0::2] != ss[1::2])
        & (ws_[0::2] == ws_[1::2])
    )
    # also no pair may collide with the next one (entry listed twice)
    if len(a) > 1:
        pair_ok[:-1] &= a[1:] != a[:-1]
    if not pair_ok.all():
        bad = int(ls[0::2][~pair_ok][0])
        raise ParseError(bad, "asymmetric adjacency structure")
    if len(a) != num_edges:
        raise ParseError(
            1, f"header declares {num_edges} edges but file holds {len(a)}"
        )

    # one hyperedge per undirected pair, ordered by (min, max) endpoint
    us = (a // num_vertices).astype(np.int32)
    vs = (a % num_vertices).astype(np.int32)
    pins = np.empty(2 * len(a), dtype=np.int32)
    pins[0::2] = us
    pins[1::2] = vs
    offsets = np.arange(0, 2 * len(a) + 1, 2, dtype=np.int64)
    return Hypergraph(offsets, pins, vertex_weights, ws_[0::2].copy())


def load_instance(path: str | Path, fmt: str = "auto") -> Hypergraph:
    """Load a hypergraph from a file; fmt in {auto, hmetis, metis}.

    `auto` picks by extension: .graph/.metis parse as Metis graphs,
    anything else as hMetis.
    """
    path = Path(path)
    text = path.read_text()
    if fmt == "auto":
        fmt = "metis" if path.suffix in (".graph", ".metis") else "hmetis"
    if fmt == "hmetis":
        return parse_hmetis(text)
    if fmt == "metis":
        return parse_metis_graph(text)
    raise ValueError(f"unknown format {fmt!r}")


def format_partition(assignment: np.ndarray) -> str:
    """One block id per line, vertex order, trailing newline."""
    if len(assignment) == 0:
        return ""
    return "\n".join(map(str, np.asarray(assignment).tolist())) + "\n"


def write_partition(path: str | Path, assignment: np.ndarray) -> None:
    Path(path).write_text(format_partition(assignment))


def assignment_digest(assignment: np.ndarray) -> str:
    """Hex digest of the 64-bit FNV-1a fold over assignment elements."""
    return f"{fnv1a64(np.asarray(assignment, dtype=np.int64)):016x}"


@dataclass
class RunRecord:
    """One partitioning run, serialized as a single JSON line."""

    instance: str
    k: int
    epsilon: str
    seed: int
    threads: int
    preset: str
    metric: int
    imbalance: str
    balanced: bool
    partition_hash: str
    timings: dict[str, float] = field(default_factory=dict)
    config: dict[str, object] = field(default_factory=dict)

    def to_json_line(self) -> str:
        payload = {
            "balanced": self.balanced,
            "config": self.config,
            "epsilon": self.epsilon,
            "imbalance": self.imbalance,
            "instance": self.instance,
            "k": self.k,
            "metric": self.metric,
            "partition_hash": self.partition_hash,
            "preset": self.preset,
            "seed": self.seed,
            "threads": self.threads,
            "timings": self.timings,
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def append_run_record(path: str | Path, record: RunRecord) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(record.to_json_line() + "\n")


def read_run_records(path: str | Path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out
