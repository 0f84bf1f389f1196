"""Locality-aware pre-blocking and agglomerative chunking.

Data are first assigned to areas on the (block address x access frequency)
plane: the address axis is cut into q equal bins over [0, Q] and the
frequency axis into logarithmic bins with base p, so low-frequency data are
binned strictly and high-frequency data loosely. Access frequency here is
the transaction count (feature popcount), not the raw access count.

Within each area, data are clustered greedily: starting from singletons,
the pair of clusters with the smallest feature distance among the pairs
passing the strong-relation predicate is merged (cluster feature = bitwise
OR of member vectors) until no pair qualifies. Cross-area pairs are never
considered here; the grouping stage handles them.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import ConfigError, UnknownDatumError
from .features import (
    SYMMETRIC_DIFF,
    CtfMatrix,
    CtfVector,
    distance,
    strong_relation,
)


@dataclass(frozen=True, order=True)
class AreaKey:
    addr_bin: int
    freq_bin: int


@dataclass
class ChunkerConfig:
    q: int = 16        # address regions
    p: float = 2.0     # frequency division coefficient
    sigma: float = 0.1  # strong-relation threshold

    def validate(self):
        if self.q < 1:
            raise ConfigError(f"q must be >= 1, got {self.q}")
        if self.p <= 1.0:
            raise ConfigError(f"p must be > 1, got {self.p}")
        if not 0.0 <= self.sigma <= 1.0:
            raise ConfigError(f"sigma must be in [0,1], got {self.sigma}")


def _log_bin(freq: int, p: float) -> int:
    # floor(log_p(freq)) made robust against float rounding at exact powers.
    if freq < 1:
        raise ValueError("frequency must be >= 1")
    b = int(math.floor(math.log(freq) / math.log(p) + 1e-9))
    while p ** (b + 1) <= freq:
        b += 1
    while b > 0 and p ** b > freq:
        b -= 1
    return b


def area_key(address: int, freq: int, cfg: ChunkerConfig, max_address: int) -> AreaKey:
    addr_bin = int(address * cfg.q // max(max_address, 1))
    if addr_bin >= cfg.q:  # address == Q lands in the last bin
        addr_bin = cfg.q - 1
    return AreaKey(addr_bin=addr_bin, freq_bin=_log_bin(freq, cfg.p))


def pre_block(
    data: Iterable[tuple[int, int]],
    cfg: ChunkerConfig,
    max_address: int,
) -> tuple[dict[AreaKey, list[int]], list[int]]:
    """Partition (address, frequency) pairs into areas.

    Returns (area -> sorted addresses, excluded addresses). Data with
    frequency 0 (never in any transaction) are excluded, not assigned.
    """
    cfg.validate()
    areas: dict[AreaKey, list[int]] = {}
    excluded: list[int] = []
    for address, freq in data:
        if address > max_address:
            raise ConfigError(
                f"address {address} exceeds max_address {max_address}"
            )
        if freq < 1:
            excluded.append(address)
            continue
        areas.setdefault(area_key(address, freq, cfg, max_address), []).append(address)
    for members in areas.values():
        members.sort()
    excluded.sort()
    return areas, excluded


@dataclass(frozen=True)
class Chunk:
    id: int
    members: tuple[int, ...]       # block addresses, ascending
    feature: CtfVector             # OR of member vectors
    area: AreaKey


@dataclass
class MergeRecord:
    """One executed merge, for audit replay."""

    members_a: tuple[int, ...]
    members_b: tuple[int, ...]
    distance: float
    threshold: float


def cluster_area(
    area_addrs: Iterable[int],
    ctf: CtfMatrix,
    sigma: float,
    metric: str = SYMMETRIC_DIFF,
    audit: list[MergeRecord] | None = None,
) -> list[tuple[tuple[int, ...], CtfVector]]:
    """Greedy agglomerative clustering of one area's data.

    Returns (members, OR-feature) pairs ordered by smallest member
    address. Merge order: smallest distance first among qualifying pairs,
    ties broken by the lexicographically smallest (min-address, min-address)
    pair, which makes the result deterministic.
    """
    addrs = sorted(set(area_addrs))
    for a in addrs:
        if a not in ctf:
            raise UnknownDatumError(a)

    # Identical feature vectors always qualify (distance 0), so they can be
    # collapsed up front: any greedy order over the zero-distance pairs
    # yields the same clusters and leaves every feature unchanged.
    by_feature: dict[frozenset, list[int]] = {}
    for a in addrs:
        by_feature.setdefault(ctf[a].index_set, []).append(a)

    members: dict[int, list[int]] = {}
    feats: dict[int, frozenset] = {}
    next_id = 0
    for bits, group in sorted(by_feature.items(), key=lambda kv: kv[1][0]):
        members[next_id] = sorted(group)
        feats[next_id] = bits
        if audit is not None and len(group) > 1:
            group = sorted(group)
            threshold = len(bits) * sigma
            for extra in group[1:]:
                audit.append(MergeRecord((group[0],), (extra,), 0.0, threshold))
        next_id += 1

    def pair_entry(i, j):
        fi, fj = feats[i], feats[j]
        d = len(fi ^ fj)
        if metric != SYMMETRIC_DIFF:
            dval = math.sqrt(d)
        else:
            dval = d
        if dval <= ((len(fi) + len(fj)) / 2.0) * sigma:
            lo, hi = members[i][0], members[j][0]
            if lo > hi:
                lo, hi = hi, lo
                i, j = j, i
            return (dval, lo, hi, i, j)
        return None

    # For sigma <= 1 a qualifying pair of non-empty vectors must share a
    # transaction index, so candidates come from an inverted bit index
    # instead of all n^2 pairs. (An empty-feature cluster, if any, was
    # collapsed above and can never qualify against a non-empty one.)
    prune = sigma <= 1.0
    by_bit: dict[int, set[int]] = {}
    ids = sorted(members)

    def candidates(i):
        if not prune:
            return [j for j in alive if j != i]
        seen: set[int] = set()
        for bit in feats[i]:
            seen.update(by_bit.get(bit, ()))
        seen.discard(i)
        return seen

    alive = set(ids)
    for i in ids:
        for bit in feats[i]:
            by_bit.setdefault(bit, set()).add(i)
    heap = []
    for i in ids:
        for j in candidates(i):
            if j > i:
                entry = pair_entry(i, j)
                if entry is not None:
                    heap.append(entry)
    heapq.heapify(heap)

    while heap:
        dval, _lo, _hi, i, j = heapq.heappop(heap)
        if i not in alive or j not in alive:
            continue
        if audit is not None:
            fi, fj = feats[i], feats[j]
            threshold = ((len(fi) + len(fj)) / 2.0) * sigma
            audit.append(
                MergeRecord(tuple(members[i]), tuple(members[j]), dval, threshold)
            )
        merged_id = next_id
        next_id += 1
        members[merged_id] = sorted(members.pop(i) + members.pop(j))
        feats[merged_id] = feats.pop(i) | feats.pop(j)
        alive.discard(i)
        alive.discard(j)
        for bit in feats[merged_id]:
            entries = by_bit.setdefault(bit, set())
            entries.discard(i)
            entries.discard(j)
            entries.add(merged_id)
        for other in candidates(merged_id):
            entry = pair_entry(merged_id, other)
            if entry is not None:
                heapq.heappush(heap, entry)
        alive.add(merged_id)

    dim = ctf.num_transactions
    out = [
        (tuple(members[i]), CtfVector(sorted(feats[i]), dim=dim))
        for i in sorted(alive, key=lambda i: members[i][0])
    ]
    return out


@dataclass
class ChunkSet:
    chunks: list[Chunk]
    lookup: dict[int, int]  # block address -> chunk id
    config: ChunkerConfig
    max_address: int
    excluded: tuple[int, ...] = ()
    audit: list[MergeRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.chunks)

    def chunk_of(self, address: int) -> Chunk:
        try:
            return self.chunks[self.lookup[address]]
        except KeyError:
            raise UnknownDatumError(address) from None


def chunk_all(
    ctf: CtfMatrix,
    cfg: ChunkerConfig,
    max_address: int | None = None,
    metric: str = SYMMETRIC_DIFF,
) -> ChunkSet:
    """Pre-block all transacted data and cluster each area into chunks.

    Chunk ids are assigned area by area in AreaKey order, then by smallest
    member address, so identical inputs give identical ids.
    """
    cfg.validate()
    if max_address is None:
        max_address = max(ctf.addresses(), default=0)
    data = [(a, ctf[a].popcount()) for a in ctf.addresses()]
    areas, excluded = pre_block(data, cfg, max_address)
    chunks: list[Chunk] = []
    lookup: dict[int, int] = {}
    audit: list[MergeRecord] = []
    for key in sorted(areas):
        for members, feature in cluster_area(areas[key], ctf, cfg.sigma, metric, audit):
            cid = len(chunks)
            chunks.append(Chunk(cid, members, feature, key))
            for a in members:
                lookup[a] = cid
    return ChunkSet(
        chunks=chunks,
        lookup=lookup,
        config=cfg,
        max_address=max_address,
        excluded=tuple(excluded),
        audit=audit,
    )


def replay_audit(addr_features: Mapping[int, CtfVector], audit: Iterable[MergeRecord]):
    """Re-derive cluster membership by applying an audit log in order.

    Returns the set of final member tuples. Used by tests to check that the
    recorded merges reproduce the chunking result.
    """
    clusters: dict[int, list[int]] = {a: [a] for a in addr_features}
    owner = {a: a for a in addr_features}
    for record in audit:
        ra = owner[record.members_a[0]]
        rb = owner[record.members_b[0]]
        if ra == rb:
            raise ValueError("audit merges an already-merged pair")
        merged = clusters.pop(ra) + clusters.pop(rb)
        merged.sort()
        root = merged[0]
        clusters[root] = merged
        for a in merged:
            owner[a] = root
    return {tuple(v) for v in clusters.values()}


def save_chunks(path, chunkset: ChunkSet, extractor_header: Mapping[str, object] = (),
                config_hash=""):
    """Serialize as `chunk_id<TAB>addr1,addr2,...` with a metadata header."""
    cfg = chunkset.config
    extras = " ".join(f"{k}={v}" for k, v in dict(extractor_header).items())
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"# q={cfg.q} p={cfg.p} sigma={cfg.sigma} "
            f"max_address={chunkset.max_address} config_hash={config_hash} "
            f"{extras}".rstrip() + "\n"
        )
        for chunk in chunkset.chunks:
            fh.write(f"{chunk.id}\t{','.join(map(str, chunk.members))}\n")


def load_chunk_members(path):
    """Read back chunk membership (ids -> address tuples) and the header."""
    header: dict[str, str] = {}
    members: dict[int, tuple[int, ...]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                for part in line[1:].split():
                    if "=" in part:
                        key, val = part.split("=", 1)
                        header[key] = val
                continue
            cid_text, addr_text = line.split("\t")
            members[int(cid_text)] = tuple(int(a) for a in addr_text.split(","))
    return members, header
