"""Shared fixtures, most importantly the 17-vertex reference graph.

The reference graph is hand-built so that vertex 0's bucket structure, the
re-weighted link between vertices 0 and 1, and the top-degree seed set are
all known by construction.  Vertex numbering below is 0-based; REF comments
use v1..v17 aliases (vK = vertex K-1) for readability.
"""

from __future__ import annotations

import pytest

from skelsearch.graph import Graph

# v1..v17 -> 0..16
V = {k: k - 1 for k in range(1, 18)}

# Spine reaching out from v1: v8 at 1 hop; v2, v7, v9 at 2; v3, v14, v10,
# v11 at 3; v5, v15 at 6 via v3; v17 at 9 via v5.  The direct v1-v2 edge
# (weight 5) is longer than the 2-hop route through v8 (weight 4).
REF_SPINE = [
    (1, 8, 2.0),
    (8, 2, 2.0),
    (1, 2, 5.0),
    (8, 7, 1.0),
    (8, 9, 1.0),
    (2, 3, 1.0),
    (7, 14, 2.0),
    (7, 11, 1.0),
    (9, 10, 1.0),
    (3, 4, 1.0),
    (4, 6, 1.0),
    (6, 5, 1.0),
    (4, 16, 1.0),
    (16, 15, 1.0),
    (5, 12, 1.0),
    (12, 13, 1.0),
    (13, 17, 1.0),
]

# Heavy chords that raise the degrees of v7, v12, v13 above everything else
# (and v8 to fourth place) without disturbing any shortest path from v1:
# every alternative route through one of these costs at least 10 extra.
REF_CHORDS = [
    (7, 10, 10.0),
    (7, 16, 10.0),
    (12, 9, 10.0),
    (12, 15, 10.0),
    (12, 10, 10.0),
    (13, 14, 10.0),
    (13, 11, 10.0),
    (13, 6, 10.0),
]

REF_BUCKETS_B3 = {
    1: {V[8]},
    2: {V[2], V[7], V[9]},
    3: {V[3], V[14], V[10], V[11]},
    6: {V[5], V[15]},
    9: {V[17]},
}

REF_TOP4_DEGREE = {V[7], V[8], V[12], V[13]}


def build_ref_graph() -> Graph:
    edges = [(V[a], V[b], w) for a, b, w in REF_SPINE + REF_CHORDS]
    return Graph.from_edges(17, edges)


@pytest.fixture(scope="session")
def ref_graph() -> Graph:
    return build_ref_graph()
