"""Multi-tier hop-bucket labels and the shortest-distance graph they induce.

A label for vertex v collects, for every bucket hop n = k * base**tier
(1 <= k <= base, 0 <= tier <= max_tier), the vertices whose deterministic
shortest path from v has exactly n hops, together with the chain ancestor
sitting one bucket closer and the exact shortest distance.  Connecting every
vertex to its label entries yields a denser graph whose edge weights are all
exact shortest distances; that graph is what the prediction model trains on.
"""

from __future__ import annotations

import heapq
import struct
from dataclasses import dataclass
from typing import NamedTuple

from .graph import INF, Graph
from . import storage

LABELS_MAGIC = b"SLBL"
LABELS_VERSION = 1


@dataclass(frozen=True)
class SkeletonConfig:
    """Bucket geometry: hops k * base**tier for k in 1..base, tier in 0..max_tier."""

    base: int
    max_tier: int

    def __post_init__(self):
        if self.base < 2:
            raise ValueError("base must be >= 2")
        if self.max_tier < 0:
            raise ValueError("max_tier must be >= 0")

    @property
    def hop_bound(self) -> int:
        """Largest bucket hop; expansion past it cannot add label entries."""
        return self.base ** (self.max_tier + 1)

    def tier_hops(self, tier: int) -> tuple[int, ...]:
        if not (0 <= tier <= self.max_tier):
            raise ValueError(f"tier {tier} out of range 0..{self.max_tier}")
        return tuple(k * self.base**tier for k in range(1, self.base + 1))

    def bucket_hops(self) -> tuple[int, ...]:
        hops = {h for t in range(self.max_tier + 1) for h in self.tier_hops(t)}
        return tuple(sorted(hops))

    def hop_tier(self, hop: int) -> int:
        """Tier whose k>1 position covers this hop (tier 0 for hop 1).

        Bucket hops shared between the last slot of one tier and the first
        slot of the next resolve to the lower tier, making the link step
        (base**tier) unambiguous.
        """
        if hop == 1:
            return 0
        step = 1
        for tier in range(self.max_tier + 1):
            if hop % step == 0:
                k = hop // step
                if 2 <= k <= self.base:
                    return tier
            step *= self.base
        raise ValueError(f"{hop} is not a bucket hop for base={self.base}, max_tier={self.max_tier}")

    def link_step(self, hop: int) -> int:
        """Prev-chain walk length from an entry at this hop to its linked vertex."""
        return self.base ** self.hop_tier(hop)


class LabelEntry(NamedTuple):
    vertex: int
    linked_prev: int
    dist: float


class SkeletonLabels:
    """All per-vertex labels built with one config."""

    def __init__(self, config: SkeletonConfig, vertex_count: int,
                 buckets: list[dict[int, list[LabelEntry]]]):
        self.config = config
        self.vertex_count = vertex_count
        self.buckets = buckets

    def bucket(self, owner: int, hop: int) -> list[LabelEntry]:
        return self.buckets[owner].get(hop, [])

    def bucket_vertices(self, owner: int, hop: int) -> set[int]:
        return {e.vertex for e in self.bucket(owner, hop)}

    def tier_neighbors(self, owner: int, tier: int) -> set[int]:
        """Aggregation neighbor set for one tier.

        Tier 0 takes every tier-0 bucket; higher tiers drop their first
        bucket (hop base**tier), which duplicates the last bucket of the
        tier below and would otherwise be aggregated twice.
        """
        cfg = self.config
        hops = cfg.tier_hops(tier)
        if tier > 0:
            hops = hops[1:]
        out: set[int] = set()
        for hop in hops:
            out.update(e.vertex for e in self.bucket(owner, hop))
        return out

    def entry_count(self) -> int:
        return sum(len(lst) for per in self.buckets for lst in per.values())

    def __eq__(self, other) -> bool:
        if not isinstance(other, SkeletonLabels):
            return NotImplemented
        return (self.config == other.config
                and self.vertex_count == other.vertex_count
                and self.buckets == other.buckets)


def find_linked_vertex(prev: list[int], vertex: int, steps: int) -> int:
    """Walk the prev chain back exactly `steps` edges."""
    v = vertex
    for _ in range(steps):
        v = prev[v]
        if v < 0:
            raise RuntimeError(f"broken prev chain while linking vertex {vertex}")
    return v


def build_labels(g: Graph, cfg: SkeletonConfig) -> SkeletonLabels:
    """Run the bounded label expansion from every vertex.

    Per source this is the deterministic Dijkstra with two extras: vertices
    are dropped into their hop bucket as they settle, and expansion stops
    once no unsettled vertex can still land within the hop bound.  Degree-1
    vertices short-circuit to a single 1-hop entry.
    """
    n = g.vertex_count
    bound = cfg.hop_bound
    bucket_hops = set(cfg.bucket_hops())
    link_steps = {hop: cfg.link_step(hop) for hop in bucket_hops}
    adjacency = g.adjacency

    dist = [INF] * n
    hop = [0] * n
    prev = [-1] * n
    settled = [False] * n

    all_buckets: list[dict[int, list[LabelEntry]]] = []
    for source in range(n):
        if len(adjacency[source]) == 1:
            nb, w = adjacency[source][0]
            all_buckets.append({1: [LabelEntry(nb, source, w)]})
            continue

        touched = [source]
        dist[source] = 0.0
        buckets: dict[int, list[LabelEntry]] = {}
        heap: list[tuple[float, int]] = [(0.0, source)]
        # Unsettled vertices currently relaxed to a hop within the bound.
        # Settles past the bound must still expand (cutting them off leaves
        # stale distances that can masquerade as bucket hops); once this
        # counter drains, no future settle can land within the bound and the
        # expansion stops.
        pending_in_bound = 1
        hop_min = 0
        while heap:
            if hop_min > bound:
                break
            d, v = heapq.heappop(heap)
            if d > dist[v]:
                continue
            settled[v] = True
            hv = hop[v]
            if hv <= bound:
                pending_in_bound -= 1
            elif pending_in_bound == 0:
                break
            if v != source and hv in bucket_hops:
                linked = find_linked_vertex(prev, v, link_steps[hv])
                buckets.setdefault(hv, []).append(LabelEntry(v, linked, d))
            base_d = dist[v]
            nh = hv + 1
            for u, w in adjacency[v]:
                nd = base_d + w
                if nd < dist[u]:
                    if not settled[u]:
                        was_in = dist[u] < INF and hop[u] <= bound
                        now_in = nh <= bound
                        if now_in and not was_in:
                            pending_in_bound += 1
                        elif was_in and not now_in:
                            pending_in_bound -= 1
                    if dist[u] == INF:
                        touched.append(u)
                    dist[u] = nd
                    hop[u] = nh
                    prev[u] = v
                    heapq.heappush(heap, (nd, u))
                    if nh < hop_min:
                        hop_min = nh
        for v in touched:
            dist[v] = INF
            hop[v] = 0
            prev[v] = -1
            settled[v] = False
        all_buckets.append(buckets)
    return SkeletonLabels(cfg, n, all_buckets)


# ---------------------------------------------------------------------------
# Combined skeleton graph
# ---------------------------------------------------------------------------


@dataclass
class SkeletonGraph:
    """Graph over the original vertices whose edges are label links.

    Every weight is an exact shortest distance; an original edge heavier
    than the shortest distance between its endpoints is replaced by the
    shorter value.  tier/hop record the bucket each edge came from.
    """

    vertex_count: int
    adjacency: list[list[tuple[int, float, int, int]]]  # (neighbor, weight, tier, hop)

    @property
    def edge_count(self) -> int:
        return sum(len(a) for a in self.adjacency) // 2

    def edge(self, u: int, v: int) -> tuple[float, int, int] | None:
        for x, w, tier, hop in self.adjacency[u]:
            if x == v:
                return w, tier, hop
        return None


def build_skeleton_graph(g: Graph, labels: SkeletonLabels) -> SkeletonGraph:
    """Connect every vertex to all entries of its label and symmetrize.

    When both endpoints emit the link their distances must agree (the
    expansion is deterministic and exact); the minimum is kept and a
    mismatch beyond float noise is an internal error.
    """
    n = labels.vertex_count
    cfg = labels.config
    best: list[dict[int, tuple[float, int, int]]] = [{} for _ in range(n)]
    for owner in range(n):
        for hop, entries in labels.buckets[owner].items():
            tier = cfg.hop_tier(hop)
            for e in entries:
                old = best[owner].get(e.vertex)
                if old is not None and abs(old[0] - e.dist) > 1e-9 * max(1.0, abs(e.dist)):
                    raise AssertionError(
                        f"label link ({owner}, {e.vertex}) has conflicting distances "
                        f"{old[0]} vs {e.dist}")
                if old is None or e.dist < old[0]:
                    best[owner][e.vertex] = (e.dist, tier, hop)
                rev = best[e.vertex].get(owner)
                if rev is None or e.dist < rev[0]:
                    best[e.vertex][owner] = (e.dist, tier, hop)
    adjacency = [sorted((v, w, tier, hop) for v, (w, tier, hop) in best[u].items())
                 for u in range(n)]
    return SkeletonGraph(n, adjacency)


def export_skeleton_edges(sg: SkeletonGraph, path: str) -> None:
    """Inspection dump: one 'u v weight tier hop' line per undirected edge."""
    with open(path, "w", encoding="utf8") as fh:
        fh.write("# u v weight tier hop\n")
        for u in range(sg.vertex_count):
            for v, w, tier, hop in sg.adjacency[u]:
                if u < v:
                    fh.write(f"{u} {v} {w!r} {tier} {hop}\n")


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def save_labels(path: str, labels: SkeletonLabels) -> None:
    with open(path, "wb") as fh:
        storage.write_header(fh, LABELS_MAGIC, LABELS_VERSION)
        storage.write_u32(fh, labels.config.base)
        storage.write_u32(fh, labels.config.max_tier)
        storage.write_u32(fh, labels.vertex_count)
        for per_vertex in labels.buckets:
            storage.write_u32(fh, len(per_vertex))
            for hop in sorted(per_vertex):
                entries = per_vertex[hop]
                storage.write_u32(fh, hop)
                storage.write_u32(fh, len(entries))
                for e in entries:
                    fh.write(struct.pack("<IId", e.vertex, e.linked_prev, e.dist))


def load_labels(path: str) -> SkeletonLabels:
    with open(path, "rb") as fh:
        storage.check_header(fh, LABELS_MAGIC, LABELS_VERSION)
        base = storage.read_u32(fh)
        max_tier = storage.read_u32(fh)
        n = storage.read_u32(fh)
        cfg = SkeletonConfig(base, max_tier)
        buckets: list[dict[int, list[LabelEntry]]] = []
        for _ in range(n):
            bucket_count = storage.read_u32(fh)
            per_vertex: dict[int, list[LabelEntry]] = {}
            for _ in range(bucket_count):
                hop = storage.read_u32(fh)
                entry_count = storage.read_u32(fh)
                entries = []
                for _ in range(entry_count):
                    vertex, linked, dist = struct.unpack("<IId", storage.read_exact(fh, 16))
                    entries.append(LabelEntry(vertex, linked, dist))
                per_vertex[hop] = entries
            buckets.append(per_vertex)
    return SkeletonLabels(cfg, n, buckets)


def labels_to_text(labels: SkeletonLabels) -> str:
    """Human-readable dump for debugging."""
    lines = [f"base={labels.config.base} max_tier={labels.config.max_tier} "
             f"vertices={labels.vertex_count}"]
    for owner in range(labels.vertex_count):
        per = labels.buckets[owner]
        if not per:
            continue
        lines.append(f"vertex {owner}:")
        for hop in sorted(per):
            parts = ", ".join(f"{e.vertex}<-{e.linked_prev} d={e.dist:g}" for e in per[hop])
            lines.append(f"  hop {hop}: {parts}")
    return "\n".join(lines) + "\n"


def default_config_for(g: Graph, max_tier: int = 2) -> SkeletonConfig:
    """Density heuristic: sparse graphs (avg degree <= 3) get base 3, else 2.

    Low-degree graphs have long hop radii, so a larger base keeps distant
    vertices inside the label range; dense graphs saturate quickly and a
    small base suffices.
    """
    n = max(g.vertex_count, 1)
    avg_degree = 2 * g.edge_count / n
    base = 3 if avg_degree <= 3.0 else 2
    return SkeletonConfig(base=base, max_tier=max_tier)
