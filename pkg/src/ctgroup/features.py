"""Per-datum transaction-membership features.

Inverting the transaction log yields, for every block address, a sparse
binary vector over transaction indices: bit j is set iff the datum was a
member of transaction j. The popcount of a vector is the datum's access
frequency at transaction granularity.

The relationship distance between two vectors is the symmetric-difference
count of their index sets. The alternative form (Euclidean distance on
the binary vectors) is the square root of that count; it is
available as metric="euclidean" for sensitivity checks, but the count form
is the default so the strong-relation threshold compares like with like
(both sides are transaction counts).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import DimensionMismatchError
from .transactions import CacheTransaction

SYMMETRIC_DIFF = "symmetric_diff"
EUCLIDEAN = "euclidean"
METRICS = (SYMMETRIC_DIFF, EUCLIDEAN)


class CtfVector:
    """Sparse ascending list of transaction indices where a datum appears."""

    __slots__ = ("bits", "dim", "_set")

    def __init__(self, bits: Iterable[int], dim: int | None = None):
        self.bits = tuple(bits)
        self.dim = dim
        self._set = frozenset(self.bits)

    @property
    def index_set(self) -> frozenset:
        return self._set

    def popcount(self) -> int:
        return len(self.bits)

    def __eq__(self, other):
        return isinstance(other, CtfVector) and self._set == other._set

    def __hash__(self):
        return hash(self._set)

    def __repr__(self):
        return f"CtfVector({list(self.bits)!r})"


def _check_dims(x: CtfVector, y: CtfVector):
    if x.dim is not None and y.dim is not None and x.dim != y.dim:
        raise DimensionMismatchError(
            f"vectors over {x.dim} vs {y.dim} transactions"
        )


def distance(x: CtfVector, y: CtfVector, metric: str = SYMMETRIC_DIFF) -> float:
    """Number of transaction indices where the two vectors differ.

    metric="euclidean" returns the square root of that count.
    """
    _check_dims(x, y)
    count = len(x.index_set ^ y.index_set)
    if metric == EUCLIDEAN:
        return math.sqrt(count)
    return count


def access_frequency(x: CtfVector) -> int:
    return x.popcount()


def strong_relation(
    x: CtfVector, y: CtfVector, sigma: float, metric: str = SYMMETRIC_DIFF
) -> bool:
    """True iff distance(x, y) <= mean(popcounts) * sigma.

    Non-strict comparison: sigma=0 admits exactly the identical-vector
    pairs.
    """
    return distance(x, y, metric) <= ((x.popcount() + y.popcount()) / 2.0) * sigma


@dataclass
class CtfMatrix:
    """All feature vectors of a transaction log."""

    num_transactions: int
    rows: dict[int, CtfVector] = field(default_factory=dict)

    def __contains__(self, address: int) -> bool:
        return address in self.rows

    def __getitem__(self, address: int) -> CtfVector:
        return self.rows[address]

    def addresses(self):
        return self.rows.keys()

    def reconstruct_transactions(self) -> list[set[int]]:
        """Member sets per transaction index (order within a set is lost)."""
        members: list[set[int]] = [set() for _ in range(self.num_transactions)]
        for address, vec in self.rows.items():
            for j in vec.bits:
                members[j].add(address)
        return members


def build_ctf(
    transactions: Sequence[CacheTransaction], include_partial: bool = False
) -> CtfMatrix:
    """Invert a transaction log into per-datum vectors.

    Partial (end-of-trace) transactions are excluded unless requested;
    when included they get the next consecutive index. Full transaction
    indices must be consecutive from 0.
    """
    used = [t for t in transactions if include_partial or not t.partial]
    bits: dict[int, list[int]] = {}
    for j, txn in enumerate(used):
        if not txn.partial and txn.index != j:
            raise DimensionMismatchError(
                f"transaction indices not consecutive: expected {j}, got {txn.index}"
            )
        for address in txn.members:
            bits.setdefault(address, []).append(j)
    dim = len(used)
    return CtfMatrix(
        num_transactions=dim,
        rows={a: CtfVector(idxs, dim=dim) for a, idxs in bits.items()},
    )


def save_ctf(path, matrix: CtfMatrix, extractor_header: Mapping[str, object] = (),
             config_hash=""):
    """Serialize as `addr<TAB>idx1,idx2,...` with a metadata header."""
    extras = " ".join(f"{k}={v}" for k, v in dict(extractor_header).items())
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# num_transactions={matrix.num_transactions} "
                 f"config_hash={config_hash} {extras}".rstrip() + "\n")
        for address in sorted(matrix.rows):
            vec = matrix.rows[address]
            fh.write(f"{address}\t{','.join(map(str, vec.bits))}\n")


def load_ctf(path):
    header: dict[str, str] = {}
    rows: dict[int, CtfVector] = {}
    num_transactions = 0
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
                num_transactions = int(header.get("num_transactions", 0))
                continue
            addr_text, bits_text = line.split("\t")
            bits = tuple(int(b) for b in bits_text.split(",")) if bits_text else ()
            rows[int(addr_text)] = CtfVector(bits, dim=num_transactions)
    return CtfMatrix(num_transactions=num_transactions, rows=rows), header
