"""Dynamic directed graph: PMA-backed adjacency in both directions.

Edges are kept twice: an out-adjacency keyed by (src, dst) and an in-adjacency
keyed by (dst, src), each as a packed-memory array of composite uint64 keys
(vertex * n + neighbor), so per-vertex neighbor runs are contiguous and sorted
by neighbor id. Edge timestamps ride along the out-adjacency as PMA payloads;
they are carried for stream bookkeeping, never used in computation.

Vertices are a fixed id range [0, n); updates touching ids outside it raise
InvalidVertex. Self-loops are permitted and count once toward each degree;
parallel edges are not representable (a duplicate insert is rejected, not an
error). Batches are applied under a single writer; reads may be shared between
batches.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, InvalidVertex
from .pma import MAX_KEY, PackedMemoryArray


class UpdateOp(enum.Enum):
    INSERT = "+"
    DELETE = "-"


@dataclass(frozen=True, slots=True)
class EdgeUpdate:
    op: UpdateOp
    src: int
    dst: int
    ts: int = 0


@dataclass(frozen=True, slots=True)
class DegreeDelta:
    """Degree change of one vertex across a batch."""

    vertex: int
    old_in: int
    new_in: int
    old_out: int
    new_out: int


@dataclass(frozen=True, slots=True)
class ApplyResult:
    applied: tuple[EdgeUpdate, ...]
    rejected: tuple[EdgeUpdate, ...]
    deltas: tuple[DegreeDelta, ...]


class DynamicGraph:
    __slots__ = ("_n", "_out", "_in", "_out_deg", "_in_deg", "_edges")

    def __init__(
        self,
        num_vertices: int,
        *,
        segment_slots: int = 64,
        density_bounds: tuple[float, float] = (0.25, 0.875),
    ) -> None:
        n = int(num_vertices)
        if n < 0 or n * n >= MAX_KEY:
            raise ConfigError(f"unsupported vertex count {num_vertices}")
        self._n = n
        self._out = PackedMemoryArray(
            segment_slots=segment_slots, density_bounds=density_bounds, track_values=True
        )
        self._in = PackedMemoryArray(segment_slots=segment_slots, density_bounds=density_bounds)
        self._out_deg = np.zeros(n, dtype=np.int64)
        self._in_deg = np.zeros(n, dtype=np.int64)
        self._edges = 0

    @classmethod
    def from_edges(
        cls,
        num_vertices: int,
        edges: Iterable[tuple[int, ...]],
        *,
        segment_slots: int = 64,
        density_bounds: tuple[float, float] = (0.25, 0.875),
    ) -> "DynamicGraph":
        """Bulk-load from (src, dst) or (src, dst, ts) tuples; duplicates rejected."""
        g = cls(num_vertices, segment_slots=segment_slots, density_bounds=density_bounds)
        n = g._n
        rows = list(edges)
        if not rows:
            return g
        arr = np.asarray(rows, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[1] not in (2, 3):
            raise ConfigError("edges must be (src, dst) or (src, dst, ts) tuples")
        src, dst = arr[:, 0], arr[:, 1]
        ts = arr[:, 2] if arr.shape[1] == 3 else np.arange(len(arr), dtype=np.int64)
        if src.min() < 0 or dst.min() < 0 or src.max() >= n or dst.max() >= n:
            raise InvalidVertex("edge endpoint outside vertex range")
        out_keys = src.astype(np.uint64) * np.uint64(n) + dst.astype(np.uint64)
        order = np.argsort(out_keys, kind="stable")
        out_sorted = out_keys[order]
        if np.any(out_sorted[1:] == out_sorted[:-1]):
            raise ConfigError("duplicate edges in bulk load")
        in_keys = np.sort(dst.astype(np.uint64) * np.uint64(n) + src.astype(np.uint64))
        g._out = PackedMemoryArray.from_sorted(
            out_sorted,
            ts[order].astype(np.uint64),
            segment_slots=segment_slots,
            density_bounds=density_bounds,
        )
        g._in = PackedMemoryArray.from_sorted(
            in_keys, segment_slots=segment_slots, density_bounds=density_bounds
        )
        np.add.at(g._out_deg, src, 1)
        np.add.at(g._in_deg, dst, 1)
        g._edges = len(arr)
        return g

    # ---- queries ----

    @property
    def num_vertices(self) -> int:
        return self._n

    @property
    def num_edges(self) -> int:
        return self._edges

    @property
    def in_degrees(self) -> np.ndarray:
        """Per-vertex in-degree array; treat as read-only."""
        return self._in_deg

    @property
    def out_degrees(self) -> np.ndarray:
        return self._out_deg

    def in_degree(self, v: int) -> int:
        self._check(v)
        return int(self._in_deg[v])

    def out_degree(self, v: int) -> int:
        self._check(v)
        return int(self._out_deg[v])

    def has_edge(self, src: int, dst: int) -> bool:
        self._check(src)
        self._check(dst)
        return self._out.contains(src * self._n + dst)

    def in_neighbors(self, v: int) -> np.ndarray:
        """Sources of v's in-edges, ascending."""
        self._check(v)
        keys = self._in.keys_in_range(v * self._n, (v + 1) * self._n)
        return (keys % np.uint64(self._n)).astype(np.int64)

    def out_neighbors(self, v: int) -> np.ndarray:
        self._check(v)
        keys = self._out.keys_in_range(v * self._n, (v + 1) * self._n)
        return (keys % np.uint64(self._n)).astype(np.int64)

    def edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All edges as (src, dst, ts) arrays sorted by (src, dst)."""
        keys, ts = self._out.items_in_range(0, self._n * self._n if self._n else 1)
        n = np.uint64(max(self._n, 1))
        return (keys // n).astype(np.int64), (keys % n).astype(np.int64), ts.astype(np.int64)

    def copy(self) -> "DynamicGraph":
        dup = DynamicGraph.__new__(DynamicGraph)
        dup._n = self._n
        dup._out = self._out.copy()
        dup._in = self._in.copy()
        dup._out_deg = self._out_deg.copy()
        dup._in_deg = self._in_deg.copy()
        dup._edges = self._edges
        return dup

    # ---- mutation ----

    def apply_batch(self, batch: Sequence[EdgeUpdate]) -> ApplyResult:
        """Apply a coalesced batch atomically.

        Duplicate inserts and deletes of absent edges are rejected (reported,
        not raised); ids outside the vertex range raise InvalidVertex. Returns
        the applied updates, the rejected ones, and per-vertex degree deltas.
        """
        n = self._n
        seen: set[tuple[int, int]] = set()
        for u in batch:
            self._check(u.src)
            self._check(u.dst)
            if (u.src, u.dst) in seen:
                raise ConfigError(f"batch not coalesced: duplicate edge ({u.src}, {u.dst})")
            seen.add((u.src, u.dst))
        applied: list[EdgeUpdate] = []
        rejected: list[EdgeUpdate] = []
        old_deg: dict[int, tuple[int, int]] = {}
        for u in batch:
            ok_key = u.src * n + u.dst
            in_key = u.dst * n + u.src
            for v in (u.src, u.dst):
                if v not in old_deg:
                    old_deg[v] = (int(self._in_deg[v]), int(self._out_deg[v]))
            if u.op is UpdateOp.INSERT:
                if not self._out.insert(ok_key, value=u.ts):
                    rejected.append(u)
                    continue
                self._in.insert(in_key)
                self._out_deg[u.src] += 1
                self._in_deg[u.dst] += 1
                self._edges += 1
            else:
                if not self._out.delete(ok_key):
                    rejected.append(u)
                    continue
                self._in.delete(in_key)
                self._out_deg[u.src] -= 1
                self._in_deg[u.dst] -= 1
                self._edges -= 1
            applied.append(u)
        deltas = []
        for v in sorted(old_deg):
            oi, oo = old_deg[v]
            ni, no = int(self._in_deg[v]), int(self._out_deg[v])
            if (oi, oo) != (ni, no):
                deltas.append(DegreeDelta(v, oi, ni, oo, no))
        return ApplyResult(tuple(applied), tuple(rejected), tuple(deltas))

    def _check(self, v: int) -> None:
        if not (0 <= v < self._n):
            raise InvalidVertex(f"vertex {v} outside [0, {self._n})")


# ---- batch helpers ----


def coalesce_batch(batch: Sequence[EdgeUpdate]) -> list[EdgeUpdate]:
    """Net effect per edge: same ops collapse, opposite ops cancel.

    The surviving update keeps the timestamp of the first event that
    established it; output order follows first appearance in the batch.
    """
    order: list[tuple[int, int]] = []
    state: dict[tuple[int, int], EdgeUpdate | None] = {}
    for u in batch:
        key = (u.src, u.dst)
        if key not in state:
            state[key] = u
            order.append(key)
        else:
            cur = state[key]
            if cur is None:
                state[key] = u
            elif cur.op is not u.op:
                state[key] = None
    return [state[k] for k in order if state[k] is not None]


def invert_batch(batch: Sequence[EdgeUpdate]) -> list[EdgeUpdate]:
    """Swap inserts and deletes; applying batch then its inverse is a no-op."""
    flip = {UpdateOp.INSERT: UpdateOp.DELETE, UpdateOp.DELETE: UpdateOp.INSERT}
    return [EdgeUpdate(flip[u.op], u.src, u.dst, u.ts) for u in batch]


# ---- edge-stream files: one "op,src,dst,ts" line per update, op in {+,-} ----


def write_stream(path: str, updates: Iterable[EdgeUpdate]) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for u in updates:
            fh.write(f"{u.op.value},{u.src},{u.dst},{u.ts}\n")


def read_stream(path: str) -> list[EdgeUpdate]:
    out: list[EdgeUpdate] = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 4 or parts[0] not in ("+", "-"):
                raise ConfigError(f"{path}:{lineno}: malformed update line {line!r}")
            try:
                src, dst, ts = int(parts[1]), int(parts[2]), int(parts[3])
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: non-integer field in {line!r}") from exc
            out.append(EdgeUpdate(UpdateOp(parts[0]), src, dst, ts))
    return out
