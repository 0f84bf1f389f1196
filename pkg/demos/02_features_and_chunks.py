"""
Transaction-membership features and locality-aware chunking
===========================================================

Inverting the transaction log gives each datum a sparse binary vector
over transaction indices (bit j set iff the datum was in transaction j).
Data that always travel together have nearly identical vectors, so a
small symmetric-difference distance is evidence of a real access
relationship.

Chunking first pre-blocks data into (address bin x log-frequency bin)
areas, then greedily merges the closest strongly-related pair inside each
area until no pair qualifies.
"""

from ctgroup.chunking import ChunkerConfig, chunk_all
from ctgroup.features import build_ctf, distance, strong_relation
from ctgroup.synthetic import SyntheticSpec, synthesize_trace
from ctgroup.transactions import ExtractorConfig, extract_transactions

# Three planted groups of four data each, always accessed together.
spec = SyntheticSpec(
    num_data=15,
    num_accesses=1200,
    group_structure=[(4, 1.0), (4, 1.0), (4, 1.0)],
    rng_seed=2,
)
trace, truth = synthesize_trace(spec)

# The window must be smaller than the working set (15 data x 4 KiB) or
# nothing is ever evicted and no transaction completes.
txns = extract_transactions(trace, ExtractorConfig(window_bytes=16384))
matrix = build_ctf(txns)
print(f"{len(matrix.rows)} data across {matrix.num_transactions} transactions")

# Vectors of two same-group data vs. two cross-group data.
a, b = truth.groups[0][0], truth.groups[0][1]
c = truth.groups[1][0]
print(f"d(same group)  = {distance(matrix[a], matrix[b])}")
print(f"d(cross group) = {distance(matrix[a], matrix[c])}")
print(f"strongly related at sigma=0.5? same={strong_relation(matrix[a], matrix[b], 0.5)}"
      f" cross={strong_relation(matrix[a], matrix[c], 0.5)}")

# Cluster within pre-blocked areas. sigma bounds the allowed distance as a
# fraction of the pair's mean access frequency; a window this small drifts
# in and out of phase with the group runs, so some tolerance is needed.
chunkset = chunk_all(matrix, ChunkerConfig(q=16, p=2.0, sigma=0.5))
print(f"\n{len(chunkset)} chunks:")
for chunk in chunkset.chunks:
    print(f"  chunk {chunk.id} area={chunk.area} members={list(chunk.members)}")
print(f"planted groups: {[list(g) for g in truth.groups]}")

# Chunking is deliberately conservative: it only merges within one area
# and under the distance bound. Fragments of a planted group left over
# here are reassembled by the co-occurrence grouping stage (see the
# grouping demo).
