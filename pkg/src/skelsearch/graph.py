"""Undirected weighted graphs, the exact Dijkstra oracle, and the landmark baseline.

Everything downstream (labels, training targets, guided search, hierarchical
indexes) is defined against the deterministic Dijkstra implemented here: ties
in the priority queue break toward the smaller vertex id and relaxation is
strict, so the dist/hop/prev arrays are a pure function of the graph.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

INF = math.inf


class EdgeListError(ValueError):
    """Malformed edge-list input; carries the 1-based offending line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class OracleEntry(NamedTuple):
    dist: float
    hop: int
    prev: int | None


@dataclass(eq=False)
class Graph:
    """Immutable undirected graph with sorted per-vertex adjacency lists.

    Invariants: symmetric adjacency, no self-loops, at most one edge per
    unordered pair, all weights strictly positive.  Safe to share across
    threads once built.
    """

    vertex_count: int
    adjacency: list[list[tuple[int, float]]]

    @classmethod
    def from_edges(cls, vertex_count: int, edges: Iterable[tuple[int, int, float]]) -> "Graph":
        """Build a graph from (u, v, w) triples.

        Edges are symmetrized; duplicates keep the minimum weight; self-loops
        and non-positive weights are rejected.
        """
        best: dict[tuple[int, int], float] = {}
        for u, v, w in edges:
            if not (0 <= u < vertex_count and 0 <= v < vertex_count):
                raise ValueError(f"edge ({u}, {v}) outside vertex range 0..{vertex_count - 1}")
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            if not (w > 0):
                raise ValueError(f"edge ({u}, {v}) has non-positive weight {w}")
            key = (u, v) if u < v else (v, u)
            old = best.get(key)
            if old is None or w < old:
                best[key] = float(w)
        adjacency: list[list[tuple[int, float]]] = [[] for _ in range(vertex_count)]
        for (u, v), w in best.items():
            adjacency[u].append((v, w))
            adjacency[v].append((u, w))
        for lst in adjacency:
            lst.sort()
        return cls(vertex_count, adjacency)

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    @cached_property
    def degrees(self) -> list[int]:
        return [len(a) for a in self.adjacency]

    @cached_property
    def neighbor_sets(self) -> list[set[int]]:
        return [{u for u, _ in a} for a in self.adjacency]

    @property
    def edge_count(self) -> int:
        return sum(len(a) for a in self.adjacency) // 2

    def edges(self) -> Iterable[tuple[int, int, float]]:
        """Yield each undirected edge once, as (u, v, w) with u < v."""
        for u in range(self.vertex_count):
            for v, w in self.adjacency[u]:
                if u < v:
                    yield u, v, w

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.neighbor_sets[u]

    def edge_weight(self, u: int, v: int) -> float:
        for x, w in self.adjacency[u]:
            if x == v:
                return w
        raise KeyError(f"no edge ({u}, {v})")

    def path_weight(self, vertices: Sequence[int]) -> float:
        """Sum of edge weights along the path; raises if not adjacent."""
        total = 0.0
        for a, b in zip(vertices, vertices[1:]):
            total += self.edge_weight(a, b)
        return total

    def induced_subgraph(self, vertices: Sequence[int]) -> tuple["Graph", list[int]]:
        """Subgraph on `vertices` with compact local ids.

        Returns (subgraph, locals_to_global) where local id i maps to
        locals_to_global[i]; locals follow the sorted order of `vertices`.
        """
        ordered = sorted(vertices)
        local = {g: i for i, g in enumerate(ordered)}
        edges = []
        for g in ordered:
            for h, w in self.adjacency[g]:
                if g < h and h in local:
                    edges.append((local[g], local[h], w))
        return Graph.from_edges(len(ordered), edges), ordered


@dataclass(frozen=True)
class PathResult:
    """A concrete path with its weight, hop length, and search counters.

    An unreachable query is a first-class value (empty vertices, infinite
    distance), never an exception.
    """

    vertices: tuple[int, ...]
    distance: float
    hops: int
    popped: int = 0
    pruned: int = 0

    @property
    def reachable(self) -> bool:
        return math.isfinite(self.distance)

    @classmethod
    def unreachable(cls, popped: int = 0, pruned: int = 0) -> "PathResult":
        return cls((), INF, 0, popped, pruned)


@dataclass
class DijkstraResult:
    """Single-source arrays: exact distances, hop counts, and prev chain."""

    source: int
    dist: list[float]
    hop: list[int]
    prev: list[int]  # -1 for none
    popped: int = 0

    def entry(self, v: int) -> OracleEntry:
        p = self.prev[v]
        return OracleEntry(self.dist[v], self.hop[v], None if p < 0 else p)

    def path_to(self, target: int) -> PathResult:
        if not math.isfinite(self.dist[target]):
            return PathResult.unreachable(popped=self.popped)
        chain = [target]
        while chain[-1] != self.source:
            chain.append(self.prev[chain[-1]])
        chain.reverse()
        return PathResult(tuple(chain), self.dist[target], self.hop[target], popped=self.popped)


def dijkstra(g: Graph, source: int) -> DijkstraResult:
    """Exact single-source shortest paths with deterministic tie-breaking.

    Heap keys are (dist, vertex), so equal distances pop the smaller id
    first; relaxation only on strict improvement, so hop/prev record the
    first-found shortest path.
    """
    if not (0 <= source < g.vertex_count):
        raise ValueError(f"source {source} out of range")
    n = g.vertex_count
    dist = [INF] * n
    hop = [0] * n
    prev = [-1] * n
    dist[source] = 0.0
    heap: list[tuple[float, int]] = [(0.0, source)]
    adjacency = g.adjacency
    popped = 0
    while heap:
        d, v = heapq.heappop(heap)
        if d > dist[v]:
            continue
        popped += 1
        base = dist[v]
        hv = hop[v] + 1
        for u, w in adjacency[v]:
            nd = base + w
            if nd < dist[u]:
                dist[u] = nd
                hop[u] = hv
                prev[u] = v
                heapq.heappush(heap, (nd, u))
    return DijkstraResult(source, dist, hop, prev, popped)


def shortest_path(g: Graph, source: int, target: int) -> PathResult:
    """Exact point-to-point query; stops as soon as the target settles."""
    if not (0 <= source < g.vertex_count and 0 <= target < g.vertex_count):
        raise ValueError("vertex out of range")
    if source == target:
        return PathResult((source,), 0.0, 0)
    n = g.vertex_count
    dist = [INF] * n
    hop = [0] * n
    prev = [-1] * n
    dist[source] = 0.0
    heap: list[tuple[float, int]] = [(0.0, source)]
    adjacency = g.adjacency
    popped = 0
    while heap:
        d, v = heapq.heappop(heap)
        if d > dist[v]:
            continue
        popped += 1
        if v == target:
            chain = [target]
            while chain[-1] != source:
                chain.append(prev[chain[-1]])
            chain.reverse()
            return PathResult(tuple(chain), dist[target], hop[target], popped=popped)
        base = dist[v]
        hv = hop[v] + 1
        for u, w in adjacency[v]:
            nd = base + w
            if nd < dist[u]:
                dist[u] = nd
                hop[u] = hv
                prev[u] = v
                heapq.heappush(heap, (nd, u))
    return PathResult.unreachable(popped=popped)


# ---------------------------------------------------------------------------
# Landmark baseline
# ---------------------------------------------------------------------------


@dataclass
class LandmarkIndex:
    """Distances and prev chains from the highest-degree vertices."""

    landmarks: tuple[int, ...]
    dist: np.ndarray  # (len(landmarks), n) float64
    prev: np.ndarray  # (len(landmarks), n) int32, -1 for none


def build_landmarks(g: Graph, count: int) -> LandmarkIndex:
    """Pick `count` highest-degree vertices (ties toward smaller id) and
    store their full distance/prev arrays."""
    if count > g.vertex_count:
        raise ValueError("more landmarks than vertices")
    order = sorted(range(g.vertex_count), key=lambda v: (-g.degree(v), v))
    landmarks = tuple(order[:count])
    dist = np.full((count, g.vertex_count), INF)
    prev = np.full((count, g.vertex_count), -1, dtype=np.int32)
    for i, lm in enumerate(landmarks):
        res = dijkstra(g, lm)
        dist[i] = res.dist
        prev[i] = res.prev
    return LandmarkIndex(landmarks, dist, prev)


def _landmark_leg(idx: LandmarkIndex, row: int, landmark: int, v: int) -> list[int]:
    """Path landmark -> v from the stored prev chain."""
    chain = [v]
    prev = idx.prev[row]
    while chain[-1] != landmark:
        chain.append(int(prev[chain[-1]]))
    chain.reverse()
    return chain


def _remove_loops(vertices: list[int]) -> list[int]:
    """Cut out repeated-vertex cycles, keeping the first visit of each vertex."""
    seen: dict[int, int] = {}
    out: list[int] = []
    for v in vertices:
        if v in seen:
            del_from = seen[v] + 1
            for dead in out[del_from:]:
                del seen[dead]
            del out[del_from:]
        else:
            out.append(v)
            seen[v] = len(out) - 1
    return out


def landmark_query(g: Graph, idx: LandmarkIndex, s: int, t: int) -> PathResult:
    """Approximate query: best landmark detour d(s,L) + d(L,t).

    The landmark minimizing the detour estimate is selected; the reported
    path is the concatenation of the two stored legs with repeated-vertex
    cycles removed, and the reported distance is that path's actual weight
    (at most the detour estimate, still an upper bound on the true distance).
    """
    if s == t:
        return PathResult((s,), 0.0, 0)
    estimates = idx.dist[:, s] + idx.dist[:, t]
    best_row = int(np.argmin(estimates))
    if not math.isfinite(estimates[best_row]):
        return PathResult.unreachable()
    lm = idx.landmarks[best_row]
    leg_s = _landmark_leg(idx, best_row, lm, s)  # lm .. s
    leg_t = _landmark_leg(idx, best_row, lm, t)  # lm .. t
    joined = list(reversed(leg_s)) + leg_t[1:]
    path = _remove_loops(joined)
    return PathResult(tuple(path), g.path_weight(path), len(path) - 1)


# ---------------------------------------------------------------------------
# Edge-list I/O
# ---------------------------------------------------------------------------


def parse_edge_list(lines: Iterable[str]) -> tuple[Graph, list[int]]:
    """Parse whitespace-separated "u v [w]" lines into a compacted graph.

    Comment lines starting with '#' and blank lines are skipped.  Vertex ids
    may be arbitrary integers; they are compacted to 0..n-1 in ascending
    order and the original ids are returned (index = compact id).
    """
    raw_edges: list[tuple[int, int, float]] = []
    ids: set[int] = set()
    for line_no, line in enumerate(lines, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        parts = text.split()
        if len(parts) not in (2, 3):
            raise EdgeListError(line_no, f"expected 'u v [w]', got {len(parts)} fields")
        try:
            u = int(parts[0])
            v = int(parts[1])
        except ValueError:
            raise EdgeListError(line_no, f"non-integer vertex id in {text!r}") from None
        if len(parts) == 3:
            try:
                w = float(parts[2])
            except ValueError:
                raise EdgeListError(line_no, f"non-numeric weight in {text!r}") from None
            if math.isnan(w):
                raise EdgeListError(line_no, "weight is NaN")
        else:
            w = 1.0
        if w <= 0:
            raise EdgeListError(line_no, f"weight {w} must be > 0")
        if u == v:
            raise EdgeListError(line_no, f"self-loop at vertex {u}")
        raw_edges.append((u, v, w))
        ids.add(u)
        ids.add(v)
    originals = sorted(ids)
    compact = {orig: i for i, orig in enumerate(originals)}
    edges = [(compact[u], compact[v], w) for u, v, w in raw_edges]
    return Graph.from_edges(len(originals), edges), originals


def load_edge_list(path: str) -> tuple[Graph, list[int]]:
    with open(path, "r", encoding="utf8") as fh:
        return parse_edge_list(fh)


def save_id_map(path: str, originals: Sequence[int]) -> None:
    """Two-column text file: original id, compact id."""
    with open(path, "w", encoding="utf8") as fh:
        for i, orig in enumerate(originals):
            fh.write(f"{orig} {i}\n")


def load_id_map(path: str) -> list[int]:
    originals = []
    with open(path, "r", encoding="utf8") as fh:
        for line in fh:
            parts = line.split()
            if parts:
                originals.append(int(parts[0]))
    return originals
