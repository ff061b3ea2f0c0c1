"""Packed-memory array: a sorted, gapped flat array supporting O(log^2) updates.

Design notes:

- One flat uint64 key array split into fixed-size segments (default 64 slots).
  Live keys are packed at the front of each segment; the tail slots are gaps.
  Keys are globally sorted: every key in segment i precedes every key in
  segment i+1.
- Per-segment occupancy is kept within configured density bounds. After an
  insert or delete pushes a segment outside its bounds, the smallest
  power-of-two-aligned window of segments that is itself within bounds is
  evenly redistributed. If no window qualifies, capacity doubles (insert) or
  halves (delete). With the default bounds the per-segment item count stays in
  [16, 56] out of 64 slots, which both leaves room for a single insert before
  rebalancing and makes even redistribution restore the bounds exactly.
- Segment lookup is a binary search over a per-segment lower-bound array
  (empty segments inherit the next occupied segment's first key), rebuilt with
  one vectorized pass after each mutation.
- An optional parallel uint64 payload array moves in lockstep with the keys;
  the graph layer uses it for edge timestamps.

Writers must be exclusive; any number of readers may share a quiescent array.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError

_EMPTY = np.uint64(np.iinfo(np.uint64).max)
MAX_KEY = (1 << 62)  # keys must stay below the empty-slot sentinel


class PackedMemoryArray:
    __slots__ = ("_slots", "_lo", "_hi", "_keys", "_vals", "_counts", "_lower", "_size")

    def __init__(
        self,
        *,
        segment_slots: int = 64,
        density_bounds: tuple[float, float] = (0.25, 0.875),
        track_values: bool = False,
    ) -> None:
        lo, hi = density_bounds
        if not (0.0 < lo < hi <= 1.0):
            raise ConfigError(f"density bounds must satisfy 0 < lo < hi <= 1, got {density_bounds}")
        self._slots = int(segment_slots)
        self._lo = float(lo)
        self._hi = float(hi)
        if self._slots < 2 or self._max_items(1) < 1:
            raise ConfigError(f"segment_slots={segment_slots} too small for bounds {density_bounds}")
        if self._max_items(1) >= self._slots:
            # one free slot per segment is needed to insert before rebalancing
            raise ConfigError(f"upper density bound {hi} leaves no slack in a {self._slots}-slot segment")
        self._keys = np.full(self._slots, _EMPTY, dtype=np.uint64)
        self._vals = np.zeros(self._slots, dtype=np.uint64) if track_values else None
        self._counts = np.zeros(1, dtype=np.int64)
        self._lower = np.full(1, _EMPTY, dtype=np.uint64)
        self._size = 0

    # ---- bulk construction ----

    @classmethod
    def from_sorted(
        cls,
        keys: np.ndarray,
        values: np.ndarray | None = None,
        *,
        segment_slots: int = 64,
        density_bounds: tuple[float, float] = (0.25, 0.875),
    ) -> "PackedMemoryArray":
        pma = cls(
            segment_slots=segment_slots,
            density_bounds=density_bounds,
            track_values=values is not None,
        )
        keys = np.asarray(keys, dtype=np.uint64)
        n = len(keys)
        if n == 0:
            return pma
        if np.any(keys[1:] <= keys[:-1]):
            raise ConfigError("bulk keys must be strictly increasing")
        if int(keys[-1]) >= MAX_KEY:
            raise ConfigError("key exceeds supported range")
        target = max(1, int(0.5 * (pma._lo + pma._hi) * pma._slots))
        segs = 1
        while n > target * segs:
            segs *= 2
        pma._alloc(segs)
        vals = None if values is None else np.asarray(values, dtype=np.uint64)
        pma._write_spread(0, segs, keys, vals)
        pma._size = n
        pma._rebuild_lower()
        return pma

    # ---- queries ----

    def __len__(self) -> int:
        return self._size

    @property
    def num_segments(self) -> int:
        return len(self._counts)

    def contains(self, key: int) -> bool:
        seg, pos, found = self._locate(key)
        return found

    def keys_in_range(self, lo: int, hi: int) -> np.ndarray:
        """All keys k with lo <= k < hi, ascending."""
        parts = [self._keys[s:e] for s, e in self._range_slices(lo, hi)]
        if not parts:
            return np.empty(0, dtype=np.uint64)
        return np.concatenate(parts)

    def items_in_range(self, lo: int, hi: int) -> tuple[np.ndarray, np.ndarray]:
        """(keys, values) pairs in [lo, hi); requires track_values."""
        if self._vals is None:
            raise ConfigError("this array does not track values")
        slices = self._range_slices(lo, hi)
        if not slices:
            empty = np.empty(0, dtype=np.uint64)
            return empty, empty
        keys = np.concatenate([self._keys[s:e] for s, e in slices])
        vals = np.concatenate([self._vals[s:e] for s, e in slices])
        return keys, vals

    def count_in_range(self, lo: int, hi: int) -> int:
        return sum(e - s for s, e in self._range_slices(lo, hi))

    def all_keys(self) -> np.ndarray:
        return self.keys_in_range(0, MAX_KEY)

    # ---- mutation ----

    def insert(self, key: int, value: int = 0) -> bool:
        """Insert key; returns False if already present."""
        key = int(key)
        if not (0 <= key < MAX_KEY):
            raise ConfigError(f"key {key} out of supported range")
        seg, pos, found = self._locate(key)
        if found:
            return False
        base = seg * self._slots
        c = int(self._counts[seg])
        self._keys[base + pos + 1 : base + c + 1] = self._keys[base + pos : base + c]
        self._keys[base + pos] = key
        if self._vals is not None:
            self._vals[base + pos + 1 : base + c + 1] = self._vals[base + pos : base + c]
            self._vals[base + pos] = value
        self._counts[seg] = c + 1
        self._size += 1
        if c + 1 > self._max_items(1):
            self._rebalance(seg, need_space=True)
        else:
            self._rebuild_lower()
        return True

    def delete(self, key: int) -> bool:
        """Remove key; returns False if absent."""
        seg, pos, found = self._locate(int(key))
        if not found:
            return False
        base = seg * self._slots
        c = int(self._counts[seg])
        self._keys[base + pos : base + c - 1] = self._keys[base + pos + 1 : base + c]
        self._keys[base + c - 1] = _EMPTY
        if self._vals is not None:
            self._vals[base + pos : base + c - 1] = self._vals[base + pos + 1 : base + c]
        self._counts[seg] = c - 1
        self._size -= 1
        if c - 1 < self._min_items(1) and self.num_segments > 1:
            self._rebalance(seg, need_space=False)
        else:
            self._rebuild_lower()
        return True

    def copy(self) -> "PackedMemoryArray":
        dup = PackedMemoryArray.__new__(PackedMemoryArray)
        dup._slots = self._slots
        dup._lo = self._lo
        dup._hi = self._hi
        dup._keys = self._keys.copy()
        dup._vals = None if self._vals is None else self._vals.copy()
        dup._counts = self._counts.copy()
        dup._lower = self._lower.copy()
        dup._size = self._size
        return dup

    # ---- invariants (used by tests) ----

    def validate(self) -> None:
        slots = self._slots
        assert int(self._counts.sum()) == self._size
        hi = self._max_items(1)
        lo = self._min_items(1)
        prev_last: int | None = None
        for seg in range(self.num_segments):
            c = int(self._counts[seg])
            assert c <= hi, f"segment {seg} over density: {c} > {hi}"
            if self.num_segments > 1:
                assert c >= lo, f"segment {seg} under density: {c} < {lo}"
            run = self._keys[seg * slots : seg * slots + c]
            if c:
                assert np.all(run[1:] > run[:-1]), f"segment {seg} not sorted"
                if prev_last is not None:
                    assert int(run[0]) > prev_last, f"segment {seg} overlaps predecessor"
                prev_last = int(run[-1])
        firsts = self._keys[np.arange(self.num_segments) * slots].copy()
        firsts[self._counts == 0] = _EMPTY
        expect = np.minimum.accumulate(firsts[::-1])[::-1]
        assert np.array_equal(expect, self._lower), "lower-bound index stale"

    # ---- internals ----

    def _min_items(self, window: int) -> int:
        return math.ceil(self._lo * window * self._slots)

    def _max_items(self, window: int) -> int:
        return math.floor(self._hi * window * self._slots)

    def _alloc(self, segs: int) -> None:
        self._keys = np.full(segs * self._slots, _EMPTY, dtype=np.uint64)
        if self._vals is not None:
            self._vals = np.zeros(segs * self._slots, dtype=np.uint64)
        self._counts = np.zeros(segs, dtype=np.int64)
        self._lower = np.full(segs, _EMPTY, dtype=np.uint64)

    def _locate(self, key: int) -> tuple[int, int, bool]:
        """(segment, packed position within segment, exact hit)."""
        seg = int(np.searchsorted(self._lower, np.uint64(key), side="right")) - 1
        if seg < 0:
            seg = 0
        base = seg * self._slots
        c = int(self._counts[seg])
        run = self._keys[base : base + c]
        pos = int(np.searchsorted(run, np.uint64(key)))
        found = pos < c and int(run[pos]) == key
        return seg, pos, found

    def _range_slices(self, lo: int, hi: int) -> list[tuple[int, int]]:
        if self._size == 0 or lo >= hi:
            return []
        seg = int(np.searchsorted(self._lower, np.uint64(lo), side="right")) - 1
        if seg < 0:
            seg = 0
        slots = self._slots
        out: list[tuple[int, int]] = []
        for i in range(seg, self.num_segments):
            c = int(self._counts[i])
            if c == 0:
                continue
            base = i * slots
            run = self._keys[base : base + c]
            if int(run[0]) >= hi:
                break
            s = int(np.searchsorted(run, np.uint64(lo)))
            e = int(np.searchsorted(run, np.uint64(hi)))
            if s < e:
                out.append((base + s, base + e))
            if e < c:
                break
        return out

    def _rebuild_lower(self) -> None:
        firsts = self._keys[np.arange(self.num_segments) * self._slots].copy()
        firsts[self._counts == 0] = _EMPTY
        self._lower = np.minimum.accumulate(firsts[::-1])[::-1].copy()

    def _gather(self, start: int, nsegs: int) -> tuple[np.ndarray, np.ndarray | None]:
        slots = self._slots
        parts = []
        vparts = []
        for i in range(start, start + nsegs):
            c = int(self._counts[i])
            base = i * slots
            parts.append(self._keys[base : base + c].copy())
            if self._vals is not None:
                vparts.append(self._vals[base : base + c].copy())
        keys = np.concatenate(parts) if parts else np.empty(0, dtype=np.uint64)
        vals = np.concatenate(vparts) if self._vals is not None else None
        return keys, vals

    def _write_spread(self, start: int, nsegs: int, keys: np.ndarray, vals: np.ndarray | None) -> None:
        """Evenly spread keys over segments [start, start+nsegs)."""
        slots = self._slots
        lo_ix = start * slots
        hi_ix = (start + nsegs) * slots
        self._keys[lo_ix:hi_ix] = _EMPTY
        q, r = divmod(len(keys), nsegs)
        taken = 0
        for i in range(nsegs):
            c = q + (1 if i < r else 0)
            base = (start + i) * slots
            self._keys[base : base + c] = keys[taken : taken + c]
            if vals is not None:
                self._vals[base : base + c] = vals[taken : taken + c]
            self._counts[start + i] = c
            taken += c

    def _rebalance(self, seg: int, *, need_space: bool) -> None:
        k = self.num_segments
        w = 2
        while w <= k:
            start = (seg // w) * w
            total = int(self._counts[start : start + w].sum())
            if self._min_items(w) <= total <= self._max_items(w):
                keys, vals = self._gather(start, w)
                self._write_spread(start, w, keys, vals)
                self._rebuild_lower()
                return
            w *= 2
        # the whole array violates its bounds: resize
        if need_space:
            new_k = k * 2
        else:
            new_k = k
            while new_k > 1 and self._size < self._min_items(new_k):
                new_k //= 2
        keys, vals = self._gather(0, k)
        self._alloc(new_k)
        self._write_spread(0, new_k, keys, vals)
        self._rebuild_lower()
