"""Block I/O trace ingestion, serialization and train/test splitting.

Traces follow the 7-column MSR Cambridge CSV convention:

    Timestamp,Hostname,DiskNumber,Type,Offset,Size,ResponseTime

Timestamps are integer ticks (100 ns units), Offset/Size are bytes. A datum
is identified by its starting block address alone; accesses to the same
offset with different sizes are accesses to the same datum.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from .errors import (
    ConfigError,
    EmptyTraceError,
    RejectedRecordError,
    TraceParseError,
)


class Op(enum.IntEnum):
    READ = 0
    WRITE = 1


class AccessRecord(NamedTuple):
    """One block-layer access."""

    timestamp: int
    block_address: int
    size: int
    op: Op


def _parse_fields(line: str, line_no=None):
    fields = line.rstrip("\r\n").split(",")
    if len(fields) != 7:
        raise TraceParseError(
            f"expected 7 comma-separated fields, got {len(fields)}", line_no
        )
    try:
        timestamp = int(fields[0])
    except ValueError:
        raise TraceParseError(f"non-numeric timestamp {fields[0]!r}", line_no) from None
    op_text = fields[3].strip().lower()
    if op_text == "read":
        op = Op.READ
    elif op_text == "write":
        op = Op.WRITE
    else:
        raise TraceParseError(f"unknown operation type {fields[3]!r}", line_no)
    try:
        offset = int(fields[4])
        size = int(fields[5])
    except ValueError:
        raise TraceParseError(
            f"non-numeric offset/size {fields[4]!r}/{fields[5]!r}", line_no
        ) from None
    if offset < 0:
        raise TraceParseError(f"negative offset {offset}", line_no)
    if size <= 0:
        raise RejectedRecordError(f"non-positive size {size}", line_no)
    return (
        AccessRecord(timestamp, offset, size, op),
        fields[1].strip(),
        fields[2].strip(),
    )


def parse_record(line: str, line_no: int | None = None) -> AccessRecord:
    """Parse one MSR-convention CSV line into an AccessRecord.

    Raises TraceParseError for malformed lines and RejectedRecordError for
    records with non-positive size.
    """
    record, _host, _disk = _parse_fields(line, line_no)
    return record


@dataclass
class Trace:
    """An ordered access sequence, stored column-wise.

    The position of a record is its access sequence number, used by the
    locality statistics.
    """

    timestamps: np.ndarray
    addresses: np.ndarray
    sizes: np.ndarray
    ops: np.ndarray
    source_label: str = ""
    skipped: int = 0

    @classmethod
    def from_records(cls, records: Iterable[AccessRecord], source_label="", skipped=0):
        records = list(records)
        return cls(
            timestamps=np.array([r.timestamp for r in records], dtype=np.int64),
            addresses=np.array([r.block_address for r in records], dtype=np.int64),
            sizes=np.array([r.size for r in records], dtype=np.int64),
            ops=np.array([int(r.op) for r in records], dtype=np.uint8),
            source_label=source_label,
            skipped=skipped,
        )

    def __len__(self) -> int:
        return len(self.addresses)

    def __getitem__(self, i: int) -> AccessRecord:
        return AccessRecord(
            int(self.timestamps[i]),
            int(self.addresses[i]),
            int(self.sizes[i]),
            Op(int(self.ops[i])),
        )

    def __iter__(self) -> Iterator[AccessRecord]:
        for t, a, s, o in zip(
            self.timestamps.tolist(),
            self.addresses.tolist(),
            self.sizes.tolist(),
            self.ops.tolist(),
        ):
            yield AccessRecord(t, a, s, Op(o))

    def split(self, train_count: int) -> tuple["Trace", "Trace"]:
        """Split into (first train_count records, remainder).

        Both halves must be non-empty; concatenating them reproduces the
        input.
        """
        if not 0 < train_count < len(self):
            raise ConfigError(
                f"train_count must be in (0, {len(self)}), got {train_count}"
            )
        first = Trace(
            self.timestamps[:train_count],
            self.addresses[:train_count],
            self.sizes[:train_count],
            self.ops[:train_count],
            source_label=self.source_label,
        )
        rest = Trace(
            self.timestamps[train_count:],
            self.addresses[train_count:],
            self.sizes[train_count:],
            self.ops[train_count:],
            source_label=self.source_label,
        )
        return first, rest

    def filter_ops(self, ops: str) -> "Trace":
        """Keep only reads, only writes, or both ('read' | 'write' | 'both')."""
        if ops == "both":
            return self
        if ops == "read":
            mask = self.ops == int(Op.READ)
        elif ops == "write":
            mask = self.ops == int(Op.WRITE)
        else:
            raise ConfigError(f"ops filter must be read|write|both, got {ops!r}")
        return Trace(
            self.timestamps[mask],
            self.addresses[mask],
            self.sizes[mask],
            self.ops[mask],
            source_label=self.source_label,
        )

    def total_unique_bytes(self) -> int:
        """Sum of first-seen sizes over distinct block addresses."""
        return sum(self.first_seen_sizes().values())

    def first_seen_sizes(self) -> dict[int, int]:
        sizes: dict[int, int] = {}
        for a, s in zip(self.addresses.tolist(), self.sizes.tolist()):
            if a not in sizes:
                sizes[a] = s
        return sizes

    def to_csv_lines(self) -> Iterator[str]:
        host = self.source_label or "trace"
        host = host.replace(",", "_")
        for t, a, s, o in zip(
            self.timestamps.tolist(),
            self.addresses.tolist(),
            self.sizes.tolist(),
            self.ops.tolist(),
        ):
            op_text = "Read" if o == int(Op.READ) else "Write"
            yield f"{t},{host},0,{op_text},{a},{s},0"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for line in self.to_csv_lines():
                fh.write(line + "\n")


def load_trace(
    path,
    skip_malformed: bool = False,
    ops: str = "both",
    host: str | None = None,
    disk: str | None = None,
    max_records: int | None = None,
    source_label: str | None = None,
) -> Trace:
    """Load an MSR-convention CSV trace.

    Malformed lines abort with the offending line number unless
    skip_malformed is set, in which case they are skipped and counted. A
    first line whose first column is not numeric is treated as a header.
    host/disk restrict the trace to records from one server/disk.
    """
    records = []
    skipped = 0
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise TraceParseError(f"cannot read trace file {path}: {exc}") from None
    with fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record, rec_host, rec_disk = _parse_fields(line, line_no)
            except TraceParseError:
                if line_no == 1 and not line.split(",")[0].strip().isdigit():
                    continue  # header row
                if skip_malformed:
                    skipped += 1
                    continue
                raise
            except RejectedRecordError:
                if skip_malformed:
                    skipped += 1
                    continue
                raise
            if host is not None and rec_host != host:
                continue
            if disk is not None and rec_disk != disk:
                continue
            records.append(record)
            if max_records is not None and len(records) >= max_records:
                break
    if not records:
        raise EmptyTraceError(f"no valid records in {path}")
    label = source_label if source_label is not None else str(path)
    trace = Trace.from_records(records, source_label=label, skipped=skipped)
    if ops != "both":
        trace = trace.filter_ops(ops)
        if len(trace) == 0:
            raise EmptyTraceError(f"no records left in {path} after ops={ops} filter")
    return trace
