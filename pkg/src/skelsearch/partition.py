"""Balanced seed-grown graph partitioning with boundary refinement.

Seeds are the highest-degree vertices; regions grow one vertex at a time in
round-robin breadth-first order, then a greedy pass moves boundary vertices
wherever that strictly cuts the number of cross edges, and undersized leaves
merge into their best-connected neighbor.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass


@dataclass
class Partitioning:
    assignment: list[int]  # vertex -> leaf id
    leaves: list[list[int]]  # leaf id -> sorted vertices
    cross_edges: list[tuple[int, int, float]]  # u < v, different leaves
    moves_applied: int = 0
    cross_before_refine: int = 0

    @property
    def leaf_count(self) -> int:
        return len(self.leaves)

    def leaf_sizes(self) -> list[int]:
        return [len(leaf) for leaf in self.leaves]


def _cross_edge_count(g, assignment) -> int:
    count = 0
    for u in range(g.vertex_count):
        for v, _ in g.adjacency[u]:
            if u < v and assignment[u] != assignment[v]:
                count += 1
    return count


def _grow_regions(g, seeds) -> list[int]:
    assignment = [-1] * g.vertex_count
    queues = [deque([seed]) for seed in seeds]
    for leaf, seed in enumerate(seeds):
        assignment[seed] = leaf
    active = True
    while active:
        active = False
        for leaf, queue in enumerate(queues):
            # Claim one unassigned neighbor per turn to keep sizes balanced.
            claimed = False
            while queue and not claimed:
                v = queue[0]
                for u, _ in g.adjacency[v]:
                    if assignment[u] < 0:
                        assignment[u] = leaf
                        queue.append(u)
                        claimed = True
                        break
                else:
                    queue.popleft()
            if claimed:
                active = True
    return assignment


def _attach_orphans(g, assignment, sizes) -> None:
    """Components not reached from any seed join the currently smallest leaf."""
    for start in range(g.vertex_count):
        if assignment[start] >= 0:
            continue
        component = [start]
        seen = {start}
        queue = deque([start])
        while queue:
            v = queue.popleft()
            for u, _ in g.adjacency[v]:
                if u not in seen and assignment[u] < 0:
                    seen.add(u)
                    component.append(u)
                    queue.append(u)
        target = min(range(len(sizes)), key=lambda leaf: (sizes[leaf], leaf))
        for v in component:
            assignment[v] = target
        sizes[target] += len(component)


def _refine(g, assignment, sizes, min_leaf_size) -> int:
    """First-improvement boundary moves; returns number of moves applied.

    A vertex moves to the neighboring leaf with the most adjacent edges when
    that strictly reduces the cross-edge count and leaves its old leaf at or
    above the minimum size.  Capped at one move per vertex count to bound
    the loop.
    """
    moves = 0
    cap = g.vertex_count
    improved = True
    while improved and moves < cap:
        improved = False
        for v in range(g.vertex_count):
            if moves >= cap:
                break
            here = assignment[v]
            if sizes[here] - 1 < min_leaf_size:
                continue
            counts: dict[int, int] = {}
            for u, _ in g.adjacency[v]:
                counts[assignment[u]] = counts.get(assignment[u], 0) + 1
            own = counts.get(here, 0)
            best_leaf, best_count = here, own
            for leaf in sorted(counts):
                if leaf != here and counts[leaf] > best_count:
                    best_leaf, best_count = leaf, counts[leaf]
            if best_leaf != here and best_count > own:
                assignment[v] = best_leaf
                sizes[here] -= 1
                sizes[best_leaf] += 1
                moves += 1
                improved = True
    return moves


def _merge_undersized(g, assignment, min_leaf_size) -> None:
    while True:
        sizes: dict[int, int] = {}
        for leaf in assignment:
            sizes[leaf] = sizes.get(leaf, 0) + 1
        if len(sizes) <= 1:
            return
        undersized = sorted(leaf for leaf, size in sizes.items() if size < min_leaf_size)
        if not undersized:
            return
        victim = undersized[0]
        shared: dict[int, int] = {}
        for u in range(g.vertex_count):
            if assignment[u] != victim:
                continue
            for v, _ in g.adjacency[u]:
                leaf = assignment[v]
                if leaf != victim:
                    shared[leaf] = shared.get(leaf, 0) + 1
        if shared:
            target = max(sorted(shared), key=lambda leaf: (shared[leaf], -leaf))
        else:
            target = min(leaf for leaf in sizes if leaf != victim)
        for v in range(g.vertex_count):
            if assignment[v] == victim:
                assignment[v] = target


def partition(g, min_leaf_size: int, seed_count: int) -> Partitioning:
    """Split the graph into balanced leaves of at least min_leaf_size vertices.

    Graphs too small to host two leaves collapse to a single-leaf
    partitioning (hierarchical search then degrades to a flat search).
    """
    if min_leaf_size < 2:
        raise ValueError("min_leaf_size must be >= 2")
    if seed_count < 2:
        raise ValueError("seed_count must be >= 2")
    n = g.vertex_count
    if n < 2 * min_leaf_size:
        assignment = [0] * n
        return _finalize(g, assignment, moves=0, cross_before=0)

    order = sorted(range(n), key=lambda v: (-g.degree(v), v))
    seeds = order[:seed_count]
    assignment = _grow_regions(g, seeds)
    sizes = [0] * seed_count
    for leaf in assignment:
        if leaf >= 0:
            sizes[leaf] += 1
    _attach_orphans(g, assignment, sizes)
    cross_before = _cross_edge_count(g, assignment)
    moves = _refine(g, assignment, sizes, min_leaf_size)
    _merge_undersized(g, assignment, min_leaf_size)
    return _finalize(g, assignment, moves, cross_before)


def _finalize(g, assignment, moves, cross_before) -> Partitioning:
    used = sorted(set(assignment))
    remap = {old: new for new, old in enumerate(used)}
    assignment = [remap[a] for a in assignment]
    leaves: list[list[int]] = [[] for _ in used]
    for v, leaf in enumerate(assignment):
        leaves[leaf].append(v)
    cross = [(u, v, w) for u, v, w in g.edges() if assignment[u] != assignment[v]]
    return Partitioning(assignment=assignment, leaves=leaves, cross_edges=cross,
                        moves_applied=moves, cross_before_refine=cross_before)


def top_degree_seeds(g, seed_count: int) -> list[int]:
    """The seeds partition() would use, exposed for inspection."""
    return sorted(range(g.vertex_count), key=lambda v: (-g.degree(v), v))[:seed_count]


def save_partition(path: str, part: Partitioning) -> None:
    with open(path, "w", encoding="utf8") as fh:
        fh.write("# vertex leaf\n")
        for v, leaf in enumerate(part.assignment):
            fh.write(f"{v} {leaf}\n")


def load_partition(path: str, g) -> Partitioning:
    assignment_map: dict[int, int] = {}
    with open(path, "r", encoding="utf8") as fh:
        for line in fh:
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            v, leaf = text.split()
            assignment_map[int(v)] = int(leaf)
    if sorted(assignment_map) != list(range(g.vertex_count)):
        raise ValueError("partition file does not cover every vertex exactly once")
    assignment = [assignment_map[v] for v in range(g.vertex_count)]
    return _finalize(g, assignment, moves=0, cross_before=0)
