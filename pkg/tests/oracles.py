"""Independent brute-force oracles used to check the fast implementations.

These deliberately avoid the package's Dijkstra internals wherever an
alternative algorithm exists (Floyd-Warshall for distances, exhaustive
enumeration for buckets), so a shared bug cannot cancel out.
"""

from __future__ import annotations

import math

import numpy as np

from skelsearch.graph import Graph, dijkstra

FLOYD_WARSHALL_CAP = 500


def floyd_warshall(g: Graph) -> np.ndarray:
    """All-pairs distances by repeated relaxation; O(n^3), capped for tests."""
    n = g.vertex_count
    if n > FLOYD_WARSHALL_CAP:
        raise ValueError(f"floyd_warshall capped at {FLOYD_WARSHALL_CAP} vertices")
    dist = np.full((n, n), math.inf)
    np.fill_diagonal(dist, 0.0)
    for u, v, w in g.edges():
        dist[u, v] = min(dist[u, v], w)
        dist[v, u] = min(dist[v, u], w)
    for k in range(n):
        dist = np.minimum(dist, dist[:, k:k + 1] + dist[k:k + 1, :])
    return dist


def all_pairs_oracle(g: Graph) -> tuple[np.ndarray, np.ndarray]:
    """(dist, hop) matrices from one oracle run per source."""
    n = g.vertex_count
    dist = np.full((n, n), math.inf)
    hop = np.zeros((n, n), dtype=np.int64)
    for s in range(n):
        res = dijkstra(g, s)
        dist[s] = res.dist
        hop[s] = res.hop
    return dist, hop


def expected_buckets(g: Graph, source: int, bucket_hops: tuple[int, ...]) -> dict[int, set[int]]:
    """Brute-force bucket contents from the oracle's hop counts.

    Degree-1 sources keep only their 1-hop bucket, matching the label
    contract for such vertices.
    """
    if g.degree(source) == 1:
        return {1: {g.adjacency[source][0][0]}}
    res = dijkstra(g, source)
    out: dict[int, set[int]] = {}
    for v in range(g.vertex_count):
        if v == source or not math.isfinite(res.dist[v]):
            continue
        if res.hop[v] in bucket_hops:
            out.setdefault(res.hop[v], set()).add(v)
    return out


def path_is_valid(g: Graph, vertices, distance: float, rel_tol: float = 1e-9) -> bool:
    """The path exists in the graph and its weight matches the claim."""
    if len(vertices) == 1:
        return distance == 0.0
    try:
        weight = g.path_weight(vertices)
    except KeyError:
        return False
    return math.isclose(weight, distance, rel_tol=rel_tol, abs_tol=1e-12)
