"""Partition tree with per-leaf models and access-vertex distance matrices.

Leaves hold an induced subgraph, a trained prediction model, and exact
distances from every leaf vertex to the leaf's access vertices (vertices
with an edge crossing the leaf boundary).  Non-leaf nodes group at least
`fanout` well-connected children and precompute exact distances and explicit
paths between all their children's access vertices, restricted to the node's
own territory.  Cross-partition queries climb to the lowest common ancestor,
compose the matrices on both sides, and stitch stored paths around two flat
searches inside the endpoint leaves.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .graph import INF, Graph, PathResult, dijkstra, shortest_path
from .partition import Partitioning
from .search import SearchConfig, SgnnPredictor, lsearch
from .sgnn import SgnnModel, TrainingConfig, train
from .skeleton import SkeletonConfig, build_labels, default_config_for
from . import sgnn as sgnn_mod
from . import storage

INDEX_MAGIC = b"SHIX"
INDEX_VERSION = 1


@dataclass
class HierNode:
    id: int
    parent: int = -1
    children: list[int] = field(default_factory=list)
    vertices: list[int] = field(default_factory=list)  # sorted global ids
    access: list[int] = field(default_factory=list)  # sorted global ids
    depth: int = 0
    # leaf payload
    leaf_graph: Graph | None = None
    locals_to_global: list[int] | None = None
    dist_matrix: np.ndarray | None = None  # (|vertices|, |access|)
    model: SgnnModel | None = None
    # non-leaf payload
    matrix_access: list[int] = field(default_factory=list)
    pair_dist: np.ndarray | None = None  # (|matrix_access|, |matrix_access|)
    pair_paths: dict[tuple[int, int], tuple[int, ...]] = field(default_factory=dict)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def local_id(self, vertex: int) -> int:
        pos = bisect.bisect_left(self.vertices, vertex)
        if pos == len(self.vertices) or self.vertices[pos] != vertex:
            raise KeyError(f"vertex {vertex} not in node {self.id}")
        return pos

    def matrix_row(self, vertex: int) -> int:
        return self._matrix_index[vertex]

    def finalize_matrix_index(self) -> None:
        self._matrix_index = {v: i for i, v in enumerate(self.matrix_access)}

    def path_between(self, a: int, b: int) -> tuple[int, ...]:
        """Stored path a -> b between matrix access vertices."""
        if a == b:
            return (a,)
        key = (a, b) if a < b else (b, a)
        path = self.pair_paths.get(key)
        if path is None:
            return ()
        return path if path[0] == a else tuple(reversed(path))


@dataclass
class HierIndex:
    nodes: list[HierNode]
    root: int
    leaf_of: list[int]  # vertex -> leaf node id
    fanout: int

    def __post_init__(self):
        self._predictors: dict[int, SgnnPredictor] = {}

    @property
    def leaf_ids(self) -> list[int]:
        return [n.id for n in self.nodes if n.is_leaf]

    def leaf(self, vertex: int) -> HierNode:
        return self.nodes[self.leaf_of[vertex]]

    def ancestors(self, node_id: int) -> list[int]:
        chain = [node_id]
        while self.nodes[chain[-1]].parent >= 0:
            chain.append(self.nodes[chain[-1]].parent)
        return chain

    def lca(self, a: int, b: int) -> int:
        na, nb = self.nodes[a], self.nodes[b]
        while na.depth > nb.depth:
            na = self.nodes[na.parent]
        while nb.depth > na.depth:
            nb = self.nodes[nb.parent]
        while na.id != nb.id:
            na = self.nodes[na.parent]
            nb = self.nodes[nb.parent]
        return na.id

    def child_toward(self, ancestor: int, leaf_id: int) -> int:
        """The child of `ancestor` whose subtree contains `leaf_id`."""
        node = leaf_id
        while self.nodes[node].parent != ancestor:
            node = self.nodes[node].parent
            if node < 0:
                raise ValueError(f"{ancestor} is not a proper ancestor of {leaf_id}")
        return node

    def predictor(self, leaf_id: int) -> SgnnPredictor:
        cached = self._predictors.get(leaf_id)
        if cached is None:
            node = self.nodes[leaf_id]
            if node.model is None:
                raise ValueError(f"leaf {leaf_id} carries no trained model")
            cfg = SkeletonConfig(node.model.base, node.model.max_tier)
            labels = build_labels(node.leaf_graph, cfg)
            cached = SgnnPredictor.build(node.leaf_graph, labels, node.model)
            self._predictors[leaf_id] = cached
        return cached


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


def _group_level(level: list[int], weights: dict[tuple[int, int], int],
                 fanout: int) -> list[list[int]]:
    """Greedy agglomeration into groups of >= fanout members (the final
    group absorbs any remainder so only it may exceed 2*fanout - 1)."""
    remaining = sorted(level)
    groups: list[list[int]] = []
    while remaining:
        if len(remaining) < 2 * fanout:
            groups.append(remaining)
            break
        group = [remaining.pop(0)]
        while len(group) < fanout and remaining:
            best, best_w = None, -1
            for cand in remaining:
                w = sum(weights.get((min(cand, m), max(cand, m)), 0) for m in group)
                if w > best_w:
                    best, best_w = cand, w
            group.append(best)
            remaining.remove(best)
        groups.append(group)
    return groups


def _territory_matrices(g: Graph, node: HierNode) -> None:
    """Exact pairwise distances and paths between the node's matrix access
    vertices, computed on the subgraph induced by the node's territory."""
    sub, locals_to_global = g.induced_subgraph(node.vertices)
    local = {v: i for i, v in enumerate(locals_to_global)}
    acc = node.matrix_access
    size = len(acc)
    node.pair_dist = np.full((size, size), INF)
    node.pair_paths = {}
    for i, a in enumerate(acc):
        res = dijkstra(sub, local[a])
        node.pair_dist[i, i] = 0.0
        for j in range(size):
            if j == i:
                continue
            b = acc[j]
            lb = local[b]
            node.pair_dist[i, j] = res.dist[lb]
            if i < j and math.isfinite(res.dist[lb]):
                chain = [lb]
                while chain[-1] != local[a]:
                    chain.append(res.prev[chain[-1]])
                chain.reverse()
                node.pair_paths[(min(a, b), max(a, b))] = (
                    tuple(locals_to_global[x] for x in chain) if a < b
                    else tuple(locals_to_global[x] for x in reversed(chain)))
    node.finalize_matrix_index()


def build_hier_index(g: Graph, part: Partitioning, fanout: int = 5,
                     train_cfg: TrainingConfig | None = None,
                     skeleton_cfg: SkeletonConfig | None = None,
                     log: Callable[[str], None] | None = None) -> HierIndex:
    """Assemble the full index: leaves with models and distance matrices,
    then levels of grouped non-leaf nodes up to a single root.

    With train_cfg None the leaves carry no models (flat-search-only index);
    each leaf otherwise trains on its induced subgraph with a seed offset by
    its leaf id.
    """
    say = log or (lambda _msg: None)
    leaf_count = part.leaf_count
    nodes: list[HierNode] = []
    cross_by_leaf: dict[int, set[int]] = {leaf: set() for leaf in range(leaf_count)}
    for u, v, _w in part.cross_edges:
        cross_by_leaf[part.assignment[u]].add(u)
        cross_by_leaf[part.assignment[v]].add(v)

    for leaf_id in range(leaf_count):
        vertices = sorted(part.leaves[leaf_id])
        node = HierNode(id=leaf_id, vertices=vertices,
                        access=sorted(cross_by_leaf[leaf_id]))
        node.leaf_graph, node.locals_to_global = g.induced_subgraph(vertices)
        local = {v: i for i, v in enumerate(node.locals_to_global)}
        node.dist_matrix = np.full((len(vertices), len(node.access)), INF)
        for col, a in enumerate(node.access):
            res = dijkstra(node.leaf_graph, local[a])
            node.dist_matrix[:, col] = res.dist
        if train_cfg is not None:
            say(f"training leaf {leaf_id} ({len(vertices)} vertices)")
            cfg = skeleton_cfg or default_config_for(node.leaf_graph)
            labels = build_labels(node.leaf_graph, cfg)
            leaf_train = replace(train_cfg, seed=train_cfg.seed + 7919 * (leaf_id + 1))
            node.model, _, _ = train(node.leaf_graph, labels, leaf_train)
        nodes.append(node)

    # Pair weights between top-level nodes = number of crossing edges.
    top_of_leaf = list(range(leaf_count))
    level = list(range(leaf_count))
    while len(level) > 1:
        weights: dict[tuple[int, int], int] = {}
        for u, v, _w in part.cross_edges:
            a = top_of_leaf[part.assignment[u]]
            b = top_of_leaf[part.assignment[v]]
            if a != b:
                key = (min(a, b), max(a, b))
                weights[key] = weights.get(key, 0) + 1
        groups = _group_level(level, weights, fanout)
        new_level = []
        for members in groups:
            node = HierNode(id=len(nodes), children=list(members))
            vertices: list[int] = []
            matrix_access: list[int] = []
            for child_id in members:
                child = nodes[child_id]
                child.parent = node.id
                vertices.extend(child.vertices)
                matrix_access.extend(child.access)
            node.vertices = sorted(vertices)
            node.matrix_access = sorted(matrix_access)
            territory = set(node.vertices)
            node.access = sorted(
                u for u in node.matrix_access
                if any(v not in territory for v, _ in g.adjacency[u]))
            say(f"building node {node.id} "
                f"({len(members)} children, {len(node.matrix_access)} access vertices)")
            _territory_matrices(g, node)
            nodes.append(node)
            new_level.append(node.id)
            for leaf_id in range(leaf_count):
                if top_of_leaf[leaf_id] in members:
                    top_of_leaf[leaf_id] = node.id
        level = new_level

    root = level[0]
    _assign_depths(nodes, root)
    leaf_of = [part.assignment[v] for v in range(g.vertex_count)]
    return HierIndex(nodes=nodes, root=root, leaf_of=leaf_of, fanout=fanout)


def _assign_depths(nodes: list[HierNode], root: int) -> None:
    stack = [(root, 0)]
    while stack:
        node_id, depth = stack.pop()
        nodes[node_id].depth = depth
        for child in nodes[node_id].children:
            stack.append((child, depth + 1))


# ---------------------------------------------------------------------------
# Queries
# ---------------------------------------------------------------------------


def _access_distances(idx: HierIndex, vertex: int, target_node: int):
    """Distances from `vertex` to every access vertex of `target_node`,
    composed from the leaf matrix and the pair matrices along the ascent.

    Returns (dists, ascent) where dists maps access vertex -> distance and
    ascent is a list of (node_id, backpointers) recording the minimizing
    chain for path reconstruction.
    """
    leaf = idx.leaf(vertex)
    row = leaf.local_id(vertex)
    dists = {a: float(leaf.dist_matrix[row, col]) for col, a in enumerate(leaf.access)}
    ascent: list[tuple[int, dict[int, int]]] = []
    node = leaf
    while node.id != target_node:
        parent = idx.nodes[node.parent]
        new_dists: dict[int, float] = {}
        back: dict[int, int] = {}
        sources = [(u, d, parent.matrix_row(u))
                   for u, d in sorted(dists.items()) if math.isfinite(d)]
        for v in parent.access:
            vi = parent.matrix_row(v)
            best, best_u = INF, -1
            for u, d, ui in sources:
                total = d + parent.pair_dist[ui, vi]
                if total < best:
                    best, best_u = total, u
            if best_u >= 0:
                new_dists[v] = best
                back[v] = best_u
        ascent.append((parent.id, back))
        dists = new_dists
        node = parent
    return dists, ascent


def _chain_path(idx: HierIndex, ascent, end_vertex: int) -> tuple[list[int], int]:
    """Walk the recorded backpointers from `end_vertex` down to the leaf
    access vertex; returns (segments flattened leaf->end, leaf access vertex)."""
    chain = [end_vertex]
    for node_id, back in reversed(ascent):
        chain.append(back[chain[-1]])
    chain.reverse()  # leaf access vertex first
    path: list[int] = []
    for (a, b), (node_id, _back) in zip(zip(chain, chain[1:]), ascent):
        segment = idx.nodes[node_id].path_between(a, b)
        if not segment:
            return [], chain[0]
        path.extend(segment if not path else segment[1:])
    if not path:
        path = [end_vertex]
    return path, chain[0]


def _splice(*parts: Sequence[int]) -> list[int]:
    out: list[int] = []
    for part in parts:
        if not part:
            continue
        if out and out[-1] == part[0]:
            out.extend(part[1:])
        else:
            out.extend(part)
    return out


def _finish(g: Graph, vertices: list[int], popped: int, pruned: int) -> PathResult:
    distance = g.path_weight(vertices)
    return PathResult(tuple(vertices), distance, len(vertices) - 1,
                      popped=popped, pruned=pruned)


def _hier_search(g: Graph, idx: HierIndex, s: int, t: int, cfg: SearchConfig,
                 leaf_runner, literal_objective: bool) -> PathResult:
    if not (0 <= s < g.vertex_count and 0 <= t < g.vertex_count):
        raise ValueError("vertex out of range")
    if s == t:
        return PathResult((s,), 0.0, 0)
    ln_s, ln_t = idx.leaf_of[s], idx.leaf_of[t]
    if ln_s == ln_t:
        leaf = idx.nodes[ln_s]
        res = leaf_runner(leaf, leaf.local_id(s), leaf.local_id(t))
        if not res.reachable:
            return PathResult.unreachable(popped=res.popped, pruned=res.pruned)
        to_global = leaf.locals_to_global
        return PathResult(tuple(to_global[v] for v in res.vertices),
                          res.distance, res.hops, res.popped, res.pruned)

    lca = idx.lca(ln_s, ln_t)
    n_s = idx.child_toward(lca, ln_s)
    n_t = idx.child_toward(lca, ln_t)
    h_s, ascent_s = _access_distances(idx, s, n_s)
    h_t, ascent_t = _access_distances(idx, t, n_t)
    lca_node = idx.nodes[lca]

    best_total = best_select = INF
    best_pair: tuple[int, int] | None = None
    for vi in sorted(h_s):
        for vj in sorted(h_t):
            mid = float(lca_node.pair_dist[lca_node.matrix_row(vi),
                                           lca_node.matrix_row(vj)])
            total = h_s[vi] + mid + h_t[vj]
            select = h_s[vi] + h_t[vj] if literal_objective else total
            if select < best_select and math.isfinite(total):
                best_select = select
                best_total = total
                best_pair = (vi, vj)
    if best_pair is None:
        return PathResult.unreachable()
    v_cs, v_ct = best_pair

    mid_path = list(lca_node.path_between(v_cs, v_ct))
    s_climb, v_ls = _chain_path(idx, ascent_s, v_cs)
    t_climb, v_lt = _chain_path(idx, ascent_t, v_ct)
    if (not mid_path) or (not s_climb) or (not t_climb):
        return PathResult.unreachable()

    leaf_s = idx.nodes[ln_s]
    leaf_t = idx.nodes[ln_t]
    res_s = leaf_runner(leaf_s, leaf_s.local_id(s), leaf_s.local_id(v_ls))
    res_t = leaf_runner(leaf_t, leaf_t.local_id(t), leaf_t.local_id(v_lt))
    if not (res_s.reachable and res_t.reachable):
        return PathResult.unreachable(popped=res_s.popped + res_t.popped,
                                      pruned=res_s.pruned + res_t.pruned)
    gs = [leaf_s.locals_to_global[v] for v in res_s.vertices]
    gt = [leaf_t.locals_to_global[v] for v in res_t.vertices]
    full = _splice(gs, s_climb, mid_path, list(reversed(t_climb)), list(reversed(gt)))
    return _finish(g, full, res_s.popped + res_t.popped, res_s.pruned + res_t.pruned)


def hlsearch(g: Graph, idx: HierIndex, s: int, t: int,
             cfg: SearchConfig = SearchConfig(),
             leaf_models: Callable[[int], object] | None = None,
             literal_objective: bool = False) -> PathResult:
    """Cross-partition guided search.

    Intra-leaf segments run the guided search with the leaf's own model
    (overridable per leaf via `leaf_models`); everything between access
    vertices comes from the precomputed matrices.  literal_objective picks
    the access pair by endpoint distances alone, ignoring the distance
    between the two access vertices; it is kept for comparison but is not
    exact, so the corrected objective is the default.
    """

    def runner(leaf: HierNode, local_s: int, local_t: int) -> PathResult:
        model = leaf_models(leaf.id) if leaf_models is not None else idx.predictor(leaf.id)
        return lsearch(leaf.leaf_graph, model, local_s, local_t, cfg)

    return _hier_search(g, idx, s, t, cfg, runner, literal_objective)


def hsearch(g: Graph, idx: HierIndex, s: int, t: int,
            literal_objective: bool = False) -> PathResult:
    """Non-learned variant: intra-leaf segments use the exact search on the
    leaf subgraph; matrix composition is identical to hlsearch."""

    def runner(leaf: HierNode, local_s: int, local_t: int) -> PathResult:
        return shortest_path(leaf.leaf_graph, local_s, local_t)

    return _hier_search(g, idx, s, t, SearchConfig(), runner, literal_objective)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def save_index(path: str, idx: HierIndex) -> None:
    with open(path, "wb") as fh:
        storage.write_header(fh, INDEX_MAGIC, INDEX_VERSION)
        storage.write_u32(fh, len(idx.nodes))
        storage.write_u32(fh, idx.root)
        storage.write_u32(fh, idx.fanout)
        storage.write_array(fh, np.asarray(idx.leaf_of, dtype=np.int64))
        for node in idx.nodes:
            storage.write_i32(fh, node.parent)
            storage.write_array(fh, np.asarray(node.children, dtype=np.int64))
            storage.write_array(fh, np.asarray(node.vertices, dtype=np.int64))
            storage.write_array(fh, np.asarray(node.access, dtype=np.int64))
            if node.is_leaf:
                storage.write_array(fh, node.dist_matrix)
                fh.write(b"M" if node.model is not None else b"-")
                if node.model is not None:
                    sgnn_mod.write_model(fh, node.model)
            else:
                storage.write_array(fh, np.asarray(node.matrix_access, dtype=np.int64))
                storage.write_array(fh, node.pair_dist)
                storage.write_u32(fh, len(node.pair_paths))
                for (a, b), p in sorted(node.pair_paths.items()):
                    storage.write_u32(fh, a)
                    storage.write_u32(fh, b)
                    storage.write_array(fh, np.asarray(p, dtype=np.int64))


def load_index(path: str, g: Graph) -> HierIndex:
    """Rebuild the index; leaf subgraphs are derived from the graph, so the
    same graph used at build time must be supplied."""
    with open(path, "rb") as fh:
        storage.check_header(fh, INDEX_MAGIC, INDEX_VERSION)
        node_count = storage.read_u32(fh)
        root = storage.read_u32(fh)
        fanout = storage.read_u32(fh)
        leaf_of = storage.read_array(fh).tolist()
        nodes = []
        for node_id in range(node_count):
            parent = storage.read_i32(fh)
            children = storage.read_array(fh).tolist()
            vertices = storage.read_array(fh).tolist()
            access = storage.read_array(fh).tolist()
            node = HierNode(id=node_id, parent=parent, children=children,
                            vertices=vertices, access=access)
            if node.is_leaf:
                node.dist_matrix = storage.read_array(fh)
                flag = storage.read_exact(fh, 1)
                if flag == b"M":
                    node.model = sgnn_mod.read_model(fh)
                elif flag != b"-":
                    raise storage.FormatError(f"bad model flag {flag!r}")
                node.leaf_graph, node.locals_to_global = g.induced_subgraph(vertices)
            else:
                node.matrix_access = storage.read_array(fh).tolist()
                node.pair_dist = storage.read_array(fh)
                path_count = storage.read_u32(fh)
                for _ in range(path_count):
                    a = storage.read_u32(fh)
                    b = storage.read_u32(fh)
                    node.pair_paths[(a, b)] = tuple(storage.read_array(fh).tolist())
                node.finalize_matrix_index()
            nodes.append(node)
    idx = HierIndex(nodes=nodes, root=root, leaf_of=leaf_of, fanout=fanout)
    _assign_depths(nodes, root)
    return idx
