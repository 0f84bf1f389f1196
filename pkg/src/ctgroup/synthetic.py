"""Synthetic trace generation with planted group structure.

The generator emits accesses in runs: each run picks one planted group (or
one ungrouped datum) uniformly at random and accesses its members
contiguously. With intra-group probability 1.0 every member appears in
every run of its group, so the planted partition is recoverable and can
serve as ground truth for the chunking/grouping stages.

Randomness comes from a single ``random.Random(rng_seed)`` instance
(CPython's Mersenne Twister, which is specified and stable across
platforms), so traces are bitwise reproducible for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import random

from .errors import ConfigError, EmptyTraceError
from .trace import AccessRecord, Op, Trace


@dataclass
class SyntheticSpec:
    """Parameters for a planted-group trace.

    group_structure lists (group size, intra-group access probability)
    pairs; data not covered by any group are accessed as singletons.
    Member addresses within a group are contiguous (address_stride apart)
    and each group/singleton gets its own region_gap-spaced base address.
    """

    num_data: int
    num_accesses: int
    group_structure: list[tuple[int, float]] = field(default_factory=list)
    size_min: int = 4096
    size_max: int = 4096
    rng_seed: int = 0
    address_stride: int = 4096
    region_gap: int = 1 << 20

    def validate(self):
        if self.num_data <= 0:
            raise ConfigError("num_data must be positive")
        if self.num_accesses < 0:
            raise ConfigError("num_accesses must be non-negative")
        if not 0 < self.size_min <= self.size_max:
            raise ConfigError("need 0 < size_min <= size_max")
        if self.address_stride <= 0 or self.region_gap <= 0:
            raise ConfigError("address_stride and region_gap must be positive")
        total = 0
        for size, prob in self.group_structure:
            if size <= 0:
                raise ConfigError(f"group size must be positive, got {size}")
            if not 0.0 <= prob <= 1.0:
                raise ConfigError(f"intra-group probability {prob} outside [0,1]")
            total += size
        if total > self.num_data:
            raise ConfigError(
                f"group structure covers {total} data but num_data={self.num_data}"
            )

    @classmethod
    def from_file(cls, path) -> "SyntheticSpec":
        """Read a flat key=value spec file.

        Recognized keys: num_data, num_accesses, groups (e.g. "3x1.0,4x0.8"),
        size_min, size_max, rng_seed, address_stride, region_gap.
        """
        values: dict[str, str] = {}
        with open(path, "r", encoding="utf-8") as fh:
            for raw in fh:
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"synthetic spec line without '=': {raw!r}")
                key, val = line.split("=", 1)
                values[key.strip()] = val.strip()
        try:
            spec = cls(
                num_data=int(values["num_data"]),
                num_accesses=int(values["num_accesses"]),
                group_structure=parse_group_structure(values.get("groups", "")),
                size_min=int(values.get("size_min", 4096)),
                size_max=int(values.get("size_max", 4096)),
                rng_seed=int(values.get("rng_seed", 0)),
                address_stride=int(values.get("address_stride", 4096)),
                region_gap=int(values.get("region_gap", 1 << 20)),
            )
        except KeyError as exc:
            raise ConfigError(f"synthetic spec missing key {exc}") from None
        except ValueError as exc:
            raise ConfigError(f"bad synthetic spec value: {exc}") from None
        spec.validate()
        return spec


def parse_group_structure(text: str) -> list[tuple[int, float]]:
    """Parse "3x1.0,4x0.8" into [(3, 1.0), (4, 0.8)]."""
    structure = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "x" not in part:
            raise ConfigError(f"group entry {part!r} must look like SIZExPROB")
        size_text, prob_text = part.split("x", 1)
        structure.append((int(size_text), float(prob_text)))
    return structure


@dataclass
class SyntheticTruth:
    """Ground truth accompanying a synthetic trace."""

    groups: list[tuple[int, ...]]  # planted groups, member block addresses
    ungrouped: tuple[int, ...]
    sizes: dict[int, int]


def synthesize_trace(spec: SyntheticSpec) -> tuple[Trace, SyntheticTruth]:
    """Generate a trace and its planted partition. Deterministic per seed."""
    spec.validate()
    if spec.num_accesses == 0:
        raise EmptyTraceError("num_accesses is 0")
    rng = random.Random(spec.rng_seed)

    groups: list[list[int]] = []
    next_region = 0
    datum_count = 0
    sizes: dict[int, int] = {}

    def place(count: int) -> list[int]:
        nonlocal next_region
        base = next_region * spec.region_gap
        next_region += 1
        addrs = [base + j * spec.address_stride for j in range(count)]
        for a in addrs:
            sizes[a] = rng.randint(spec.size_min, spec.size_max)
        return addrs

    probs: list[float] = []
    for size, prob in spec.group_structure:
        groups.append(place(size))
        probs.append(prob)
        datum_count += size
    ungrouped = []
    for _ in range(spec.num_data - datum_count):
        ungrouped.extend(place(1))

    # Selection units: each planted group and each singleton, uniform.
    units: list[tuple[list[int], float]] = [(g, p) for g, p in zip(groups, probs)]
    units.extend(([a], 1.0) for a in ungrouped)

    records = []
    ts = 0
    while len(records) < spec.num_accesses:
        members, prob = units[rng.randrange(len(units))]
        if prob >= 1.0 or len(members) == 1:
            chosen = list(members)
        else:
            chosen = [a for a in members if rng.random() < prob]
            if not chosen:
                chosen = [members[rng.randrange(len(members))]]
        for addr in chosen:
            if len(records) >= spec.num_accesses:
                break
            ts += 1
            records.append(AccessRecord(ts, addr, sizes[addr], Op.READ))

    trace = Trace.from_records(records, source_label=f"synthetic(seed={spec.rng_seed})")
    truth = SyntheticTruth(
        groups=[tuple(g) for g in groups],
        ungrouped=tuple(ungrouped),
        sizes=sizes,
    )
    return trace, truth
