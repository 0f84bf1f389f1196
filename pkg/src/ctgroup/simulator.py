"""Trace replay through byte-capacity caches with optional group prefetch.

Policies:

* ``lru`` / ``fifo``        - demand-fetch baselines; one disk I/O per miss.
* ``group_prefetch``        - on a miss, fetch the datum, then each
                              non-resident member of its group with its own
                              I/O (one-step prefetch).
* ``group_merged``          - groups are stored contiguously; a miss on a
                              grouped datum costs a single I/O that fetches
                              the whole group. Misses on ungrouped data cost
                              one I/O each.

Eviction is per-datum in every policy (LRU recency order for the group
policies); a datum's resident size is its size at admission. Prefetched
members are admitted after the demand-missed datum, in ascending block
address order. A datum or group larger than the cache capacity bypasses
admission/prefetch and is counted.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import ConfigError, InvariantError
from .trace import Op, Trace

LRU = "lru"
FIFO = "fifo"
GROUP_PREFETCH = "group_prefetch"
GROUP_MERGED = "group_merged"
POLICIES = (LRU, FIFO, GROUP_PREFETCH, GROUP_MERGED)


class GroupTable:
    """Address -> group membership lookup used by the prefetch policies."""

    def __init__(self, groups: Iterable[Sequence[int]]):
        self.members: dict[int, tuple[int, ...]] = {}
        self.group_of: dict[int, int] = {}
        for gid, addrs in enumerate(groups):
            addrs = tuple(sorted(addrs))
            self.members[gid] = addrs
            for a in addrs:
                self.group_of[a] = gid

    @classmethod
    def from_grouping(cls, grouping) -> "GroupTable":
        return cls(group.members for group in grouping.groups)

    @classmethod
    def from_members(cls, members: Mapping[int, Sequence[int]]) -> "GroupTable":
        return cls(members[gid] for gid in sorted(members))


@dataclass
class SimConfig:
    policy: str = LRU
    capacity_bytes: int | None = None
    capacity_fraction: float | None = None
    grouping: GroupTable | None = None
    extra_sizes: Mapping[int, int] | None = None  # sizes for never-traced members
    write_allocate: bool = True

    def validate(self):
        if self.policy not in POLICIES:
            raise ConfigError(f"policy must be one of {POLICIES}, got {self.policy!r}")
        if (self.capacity_bytes is None) == (self.capacity_fraction is None):
            raise ConfigError("exactly one of capacity_bytes/capacity_fraction required")
        if self.capacity_bytes is not None and self.capacity_bytes <= 0:
            raise ConfigError("capacity_bytes must be positive")
        if self.capacity_fraction is not None and not 0 < self.capacity_fraction <= 1:
            raise ConfigError("capacity_fraction must be in (0,1]")
        if self.policy in (GROUP_PREFETCH, GROUP_MERGED) and self.grouping is None:
            raise ConfigError(f"policy {self.policy} requires a grouping")


@dataclass
class SimMetrics:
    policy: str
    capacity_fraction: float | None
    capacity_bytes: int
    accesses: int = 0
    hits: int = 0
    misses: int = 0
    disk_ios: int = 0
    prefetched_bytes: int = 0
    evictions: int = 0
    bypasses: int = 0
    unknown_size_skips: int = 0

    @property
    def hit_rate(self) -> float:
        return self.hits / self.accesses if self.accesses else 0.0

    def as_dict(self) -> dict:
        d = {
            "policy": self.policy,
            "capacity_fraction": self.capacity_fraction,
            "capacity_bytes": self.capacity_bytes,
            "accesses": self.accesses,
            "hits": self.hits,
            "misses": self.misses,
            "hit_rate": self.hit_rate,
            "disk_ios": self.disk_ios,
            "prefetched_bytes": self.prefetched_bytes,
            "evictions": self.evictions,
        }
        return d


def resolve_capacity(cfg: SimConfig, trace: Trace) -> int:
    """Fractions are taken of the sum of first-seen sizes of distinct data."""
    if cfg.capacity_bytes is not None:
        return cfg.capacity_bytes
    capacity = int(cfg.capacity_fraction * trace.total_unique_bytes())
    return max(capacity, 1)


class _CacheState:
    __slots__ = ("entries", "occupied", "capacity", "metrics")

    def __init__(self, capacity: int, metrics: SimMetrics):
        self.entries: OrderedDict[int, int] = OrderedDict()
        self.occupied = 0
        self.capacity = capacity
        self.metrics = metrics

    def admit(self, address: int, size: int):
        old = self.entries.pop(address, None)
        if old is not None:
            self.occupied -= old
        self.entries[address] = size
        self.occupied += size
        while self.occupied > self.capacity:
            _, evicted = self.entries.popitem(last=False)
            self.occupied -= evicted
            self.metrics.evictions += 1


def simulate(
    trace: Trace,
    cfg: SimConfig,
    check_invariants: bool = False,
    window: int | None = None,
) -> SimMetrics | tuple[SimMetrics, list[float]]:
    """Replay a trace; returns metrics (plus a per-window hit-rate series
    when ``window`` is given)."""
    cfg.validate()
    capacity = resolve_capacity(cfg, trace)
    metrics = SimMetrics(cfg.policy, cfg.capacity_fraction, capacity)
    cache = _CacheState(capacity, metrics)
    lru_order = cfg.policy != FIFO
    table = cfg.grouping
    extra_sizes = cfg.extra_sizes or {}
    sizes_seen: dict[int, int] = {}
    series: list[float] = []
    window_hits = 0
    window_count = 0

    for address, size, op in zip(
        trace.addresses.tolist(), trace.sizes.tolist(), trace.ops.tolist()
    ):
        metrics.accesses += 1
        if address not in sizes_seen:
            sizes_seen[address] = size
        if address in cache.entries:
            metrics.hits += 1
            window_hits += 1
            if lru_order:
                cache.entries.move_to_end(address)
        else:
            metrics.misses += 1
            is_write = op == int(Op.WRITE)
            allocate = cfg.write_allocate or not is_write
            if cfg.policy in (LRU, FIFO):
                metrics.disk_ios += 1
                if allocate:
                    if size <= capacity:
                        cache.admit(address, size)
                    else:
                        metrics.bypasses += 1
            elif cfg.policy == GROUP_PREFETCH:
                metrics.disk_ios += 1
                if size <= capacity and allocate:
                    cache.admit(address, size)
                elif size > capacity:
                    metrics.bypasses += 1
                gid = table.group_of.get(address)
                if gid is not None and allocate:
                    members, total = _group_fetch_plan(
                        table.members[gid], address, sizes_seen, extra_sizes, metrics
                    )
                    if total + size <= capacity:
                        for member, msize in members:
                            if member not in cache.entries:
                                metrics.disk_ios += 1
                                metrics.prefetched_bytes += msize
                                cache.admit(member, msize)
                    elif members:
                        metrics.bypasses += 1
            else:  # GROUP_MERGED
                gid = table.group_of.get(address)
                if gid is None:
                    metrics.disk_ios += 1
                    if allocate:
                        if size <= capacity:
                            cache.admit(address, size)
                        else:
                            metrics.bypasses += 1
                else:
                    metrics.disk_ios += 1  # one fetch covers the whole group
                    members, total = _group_fetch_plan(
                        table.members[gid], address, sizes_seen, extra_sizes, metrics
                    )
                    if allocate:
                        if total + size <= capacity:
                            cache.admit(address, size)
                            for member, msize in members:
                                metrics.prefetched_bytes += msize
                                cache.admit(member, msize)
                        else:
                            if size <= capacity:
                                cache.admit(address, size)
                            metrics.bypasses += 1
        if check_invariants and cache.occupied > capacity:
            raise InvariantError("cache occupancy exceeds capacity")
        window_count += 1
        if window is not None and window_count == window:
            series.append(window_hits / window_count)
            window_hits = 0
            window_count = 0

    if window is not None:
        if window_count:
            series.append(window_hits / window_count)
        return metrics, series
    return metrics


def _group_fetch_plan(members, demand, sizes_seen, extra_sizes, metrics):
    """Sizes for the other group members, ascending address order.

    Members whose size is unknown (never traced, not in extra_sizes) are
    skipped and counted.
    """
    plan = []
    total = 0
    for member in members:
        if member == demand:
            continue
        msize = sizes_seen.get(member)
        if msize is None:
            msize = extra_sizes.get(member)
        if msize is None:
            metrics.unknown_size_skips += 1
            continue
        plan.append((member, msize))
        total += msize
    return plan, total


def rolling_hit_rate(trace: Trace, cfg: SimConfig, window: int) -> list[float]:
    """Hit rate per consecutive window of ``window`` accesses; the final
    partial window uses its own denominator."""
    if window < 1:
        raise ConfigError(f"window must be >= 1, got {window}")
    _, series = simulate(trace, cfg, window=window)
    return series


def sweep(
    trace: Trace,
    grouping: GroupTable | None,
    fractions: Sequence[float],
    policies: Sequence[str],
    extra_sizes: Mapping[int, int] | None = None,
    write_allocate: bool = True,
) -> list[SimMetrics]:
    """One SimMetrics row per (fraction, policy), in input order."""
    rows = []
    for fraction in fractions:
        for policy in policies:
            cfg = SimConfig(
                policy=policy,
                capacity_fraction=fraction,
                grouping=grouping if policy in (GROUP_PREFETCH, GROUP_MERGED) else None,
                extra_sizes=extra_sizes,
                write_allocate=write_allocate,
            )
            rows.append(simulate(trace, cfg))
    return rows


METRIC_COLUMNS = (
    "policy,capacity_fraction,capacity_bytes,accesses,hits,misses,"
    "hit_rate,disk_ios,prefetched_bytes,evictions"
)


def metrics_csv_lines(rows: Iterable[SimMetrics]):
    yield METRIC_COLUMNS
    for m in rows:
        frac = "" if m.capacity_fraction is None else repr(m.capacity_fraction)
        yield (
            f"{m.policy},{frac},{m.capacity_bytes},{m.accesses},{m.hits},"
            f"{m.misses},{m.hit_rate:.6f},{m.disk_ios},{m.prefetched_bytes},"
            f"{m.evictions}"
        )
