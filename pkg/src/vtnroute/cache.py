"""Routing cache keyed by VM placement.

Entries are valid until their TTL runs out on the caller-supplied logical
clock or the topology epoch is bumped. Keys are 32-bit CRC-32 hashes of the
placement's little-endian uint32 id sequence; colliding placements are
chained and compared exactly, so a collision never serves the wrong entry.

Memory accounting model (bytes)::

    entry     = 4 (hash key) + 16 (fixed per-entry overhead) + sum(candidate)
    candidate = 4 * link_count + 8 (fixed per-candidate overhead)
"""

from __future__ import annotations

import json
import math
import struct
import threading
import zlib
from dataclasses import dataclass
from typing import Callable, Sequence

from .errors import CacheFullError
from .search import RoutingCandidate, VmPlacement

KEY_BYTES = 4
LINK_ID_BYTES = 4
CANDIDATE_OVERHEAD = 8
ENTRY_OVERHEAD = 16


def placement_hash(placement: VmPlacement) -> int:
    """CRC-32 of the sorted hypervisor ids packed as little-endian uint32."""
    data = struct.pack(f"<{len(placement.hypervisors)}I", *placement.hypervisors)
    return zlib.crc32(data) & 0xFFFFFFFF


def entry_bytes(candidates: Sequence[RoutingCandidate]) -> int:
    return (
        KEY_BYTES
        + ENTRY_OVERHEAD
        + sum(LINK_ID_BYTES * len(c.links) + CANDIDATE_OVERHEAD for c in candidates)
    )


@dataclass(frozen=True)
class CacheKey:
    hash: int
    placement: VmPlacement

    @classmethod
    def of(cls, placement: VmPlacement) -> "CacheKey":
        return cls(placement_hash(placement), placement)


@dataclass(frozen=True)
class CacheEntry:
    placement: VmPlacement
    candidates: tuple[RoutingCandidate, ...]
    created_at: float
    ttl: float
    topology_epoch: int
    nbytes: int

    def valid(self, now: float, epoch: int) -> bool:
        return self.topology_epoch == epoch and now < self.created_at + self.ttl


@dataclass(frozen=True)
class CacheStats:
    hits: int
    misses: int
    searches_performed: int
    bytes: int
    entries: int

    @property
    def lookups(self) -> int:
        return self.hits + self.misses

    @property
    def hit_ratio(self) -> float:
        return self.hits / max(1, self.hits + self.misses)

    def to_dict(self) -> dict:
        return {
            "hits": self.hits,
            "misses": self.misses,
            "hit_ratio": self.hit_ratio,
            "bytes": self.bytes,
            "entries": self.entries,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


class RoutingCache:
    """Placement -> candidate list memo with TTL and topology-epoch invalidation.

    Lookups read without locking (entries are immutable and swapped in
    atomically); inserts, stat updates and epoch bumps hold ``_lock``.
    """

    def __init__(self, ttl: float = math.inf, max_entries: int | None = None):
        if ttl <= 0:
            raise ValueError("ttl must be positive")
        self.ttl = ttl
        self.max_entries = max_entries
        self._buckets: dict[int, tuple[CacheEntry, ...]] = {}
        self._epoch = 0
        self._hits = 0
        self._misses = 0
        self._searches = 0
        self._bytes = 0
        self._entries = 0
        self._lock = threading.Lock()

    @property
    def epoch(self) -> int:
        return self._epoch

    def _find(self, key: CacheKey) -> CacheEntry | None:
        for entry in self._buckets.get(key.hash, ()):
            if entry.placement == key.placement:
                return entry
        return None

    def lookup(self, placement: VmPlacement, now: float = 0.0) -> tuple[RoutingCandidate, ...] | None:
        """Valid cached candidates or None; does not touch the statistics."""
        entry = self._find(CacheKey.of(placement))
        if entry is not None and entry.valid(now, self._epoch):
            return entry.candidates
        return None

    def get_or_search(
        self,
        placement: VmPlacement,
        search_fn: Callable[[VmPlacement], Sequence[RoutingCandidate]],
        now: float = 0.0,
    ) -> tuple[tuple[RoutingCandidate, ...], bool]:
        """Return ``(candidates, was_hit)``; on a miss run ``search_fn`` and store its result."""
        key = CacheKey.of(placement)
        entry = self._find(key)
        if entry is not None and entry.valid(now, self._epoch):
            with self._lock:
                self._hits += 1
            return entry.candidates, True

        epoch = self._epoch
        candidates = tuple(search_fn(placement))
        with self._lock:
            self._misses += 1
            self._searches += 1
            if epoch != self._epoch:
                # topology changed while searching; serve but do not cache
                return candidates, False
            self._store(key, candidates, now)
        return candidates, False

    def _store(self, key: CacheKey, candidates: tuple[RoutingCandidate, ...], now: float) -> None:
        bucket = self._buckets.get(key.hash, ())
        kept = tuple(e for e in bucket if e.placement != key.placement)
        replaced = len(kept) != len(bucket)
        if not replaced and self.max_entries is not None and self._entries >= self.max_entries:
            raise CacheFullError(f"routing cache is full ({self.max_entries} entries)")
        for e in bucket:
            if e.placement == key.placement:
                self._bytes -= e.nbytes
                self._entries -= 1
        entry = CacheEntry(key.placement, candidates, now, self.ttl, self._epoch, entry_bytes(candidates))
        self._buckets[key.hash] = kept + (entry,)
        self._bytes += entry.nbytes
        self._entries += 1

    def bump_topology_epoch(self) -> int:
        """Invalidate every entry; stale entries are dropped since they can never be served."""
        with self._lock:
            self._epoch += 1
            self._buckets = {}
            self._bytes = 0
            self._entries = 0
            return self._epoch

    def memory_bytes(self) -> int:
        return self._bytes

    def __len__(self) -> int:
        return self._entries

    def stats(self) -> CacheStats:
        with self._lock:
            return CacheStats(self._hits, self._misses, self._searches, self._bytes, self._entries)
