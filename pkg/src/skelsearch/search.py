"""Model-guided best-first path search with conservative vertex skipping.

The queue key for a vertex whose current hop count exceeds the protection
threshold beta is dist-so-far plus the predicted remaining distance; within
the first beta hops the plain distance is used and no pruning happens.  A
popped vertex past the threshold is skipped without expansion only when both
its distance slack and its hop slack exceed the model's scaled error buffers,
so an exact predictor never skips anything on a shortest path.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .graph import INF, Graph, PathResult, build_landmarks, dijkstra, landmark_query, shortest_path
from .sgnn import SgnnModel, normalize_features, tier_adjacencies, extract_features
from .skeleton import SkeletonLabels


@dataclass(frozen=True)
class SearchConfig:
    alpha: float = 0.2
    beta: float = 0  # protection hops; math.inf disables the heuristic entirely

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError("alpha must be in [0, 1]")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")


class NullModel:
    """Predicts zero with infinite buffers: key falls back to plain distance
    and the skip rule can never fire, so the search degrades to Dijkstra."""

    e_d = INF
    e_h = INF

    def predict_distance(self, s: int, t: int) -> float:
        return 0.0

    def predict_hop(self, s: int, t: int) -> float:
        return 0.0


class OracleModel:
    """Exact predictor backed by the Dijkstra oracle, with zero buffers."""

    e_d = 0.0
    e_h = 0.0

    def __init__(self, g: Graph, cache_size: int = 4096):
        self._run = lru_cache(maxsize=cache_size)(lambda s: dijkstra(g, s))

    def predict_distance(self, s: int, t: int) -> float:
        return self._run(s).dist[t]

    def predict_hop(self, s: int, t: int) -> float:
        return float(self._run(s).hop[t])


class SgnnPredictor:
    """Search-facing view of a trained model: precomputed embeddings plus
    the model's error buffers."""

    def __init__(self, model: SgnnModel, embeddings: np.ndarray):
        self.model = model
        self.z = embeddings
        self.e_d = model.e_d
        self.e_h = model.e_h

    @classmethod
    def build(cls, g: Graph, labels: SkeletonLabels, model: SgnnModel) -> "SgnnPredictor":
        raw = extract_features(g, labels)
        feats, _, _ = normalize_features(raw, model.feat_mean, model.feat_std)
        z = model.embeddings(feats, tier_adjacencies(labels))
        return cls(model, z)

    def predict_distance(self, s: int, t: int) -> float:
        return self.model.predict_pair(self.z, s, t)[0]

    def predict_hop(self, s: int, t: int) -> float:
        return self.model.predict_pair(self.z, s, t)[1]


def lsearch(g: Graph, model, s: int, t: int, cfg: SearchConfig = SearchConfig()) -> PathResult:
    """Guided point-to-point search; exact when the model is exact or null.

    Terminates when the target pops or a popped key reaches the target's
    current distance; with an inexact heuristic the inflated key makes that
    an approximation, which is the accepted trade-off.
    """
    n = g.vertex_count
    if not (0 <= s < n and 0 <= t < n):
        raise ValueError("vertex out of range")
    if s == t:
        return PathResult((s,), 0.0, 0)
    alpha, beta = cfg.alpha, cfg.beta
    skip_enabled = math.isfinite(model.e_d) and math.isfinite(model.e_h)
    dist_buffer = alpha * model.e_d if skip_enabled else INF
    hop_buffer = alpha * math.ceil(model.e_h) if skip_enabled else INF

    to_target: dict[int, float] = {}
    from_source: dict[int, tuple[float, float]] = {}

    def predict_to_target(v: int) -> float:
        est = to_target.get(v)
        if est is None:
            est = model.predict_distance(v, t)
            to_target[v] = est
        return est

    def predict_from_source(v: int) -> tuple[float, float]:
        est = from_source.get(v)
        if est is None:
            est = (model.predict_distance(s, v), model.predict_hop(s, v))
            from_source[v] = est
        return est

    dist = [INF] * n
    hop = [0] * n
    prev = [-1] * n
    dist[s] = 0.0
    heap: list[tuple[float, int, float]] = [(predict_to_target(s), s, 0.0)]
    adjacency = g.adjacency
    popped = pruned = 0

    def target_path() -> PathResult:
        chain = [t]
        while chain[-1] != s:
            chain.append(prev[chain[-1]])
        chain.reverse()
        return PathResult(tuple(chain), dist[t], hop[t], popped=popped, pruned=pruned)

    while heap:
        key, v, pushed_dist = heapq.heappop(heap)
        if pushed_dist > dist[v]:
            continue
        popped += 1
        if v == t or key >= dist[t]:
            return target_path()
        hop_v = hop[v]
        if hop_v > beta and skip_enabled:
            est_d, est_h = predict_from_source(v)
            if dist[v] - est_d > dist_buffer and abs(hop_v - est_h) > hop_buffer:
                pruned += 1
                continue
        base = dist[v]
        nh = hop_v + 1
        for u, w in adjacency[v]:
            nd = base + w
            if nd < dist[u]:
                dist[u] = nd
                hop[u] = nh
                prev[u] = v
                if nh > beta:
                    heapq.heappush(heap, (nd + predict_to_target(u), u, nd))
                else:
                    heapq.heappush(heap, (nd, u, nd))
    if math.isfinite(dist[t]):
        return target_path()
    return PathResult.unreachable(popped=popped, pruned=pruned)


# ---------------------------------------------------------------------------
# Side-by-side comparison of search methods
# ---------------------------------------------------------------------------


SEARCH_STATE_ARRAYS = {"dijkstra": 3, "lsearch": 4}  # dist/hop/prev (+dist^t)
_HEAP_ENTRY_BYTES = 24


def search_state_bytes(method: str, n: int, peak_queue: int) -> int:
    """Deterministic memory proxy: persistent per-vertex arrays plus the
    peak number of live queue entries.  Not an OS measurement."""
    arrays = SEARCH_STATE_ARRAYS.get(method, 0)
    return arrays * 8 * n + peak_queue * _HEAP_ENTRY_BYTES


@dataclass
class MethodStats:
    method: str
    results: list[PathResult]
    mean_micros: float
    memory_proxy_bytes: int
    acc: float
    hit: float
    total_popped: int
    total_pruned: int


def compare_searches(g: Graph, model, queries: list[tuple[int, int]],
                     cfg: SearchConfig = SearchConfig(),
                     landmark_count: int = 16,
                     repeats: int = 1) -> dict[str, MethodStats]:
    """Run dijkstra, landmark, and lsearch over the same queries.

    Ground truth comes from the exact point-to-point search; accuracy and
    hit rate are computed against it (so dijkstra scores 100% by
    construction).  Mean query time drops the first repeat as warm-up when
    repeats > 1.
    """
    from .evaluate import compute_metrics  # local import to avoid a cycle

    if not queries:
        raise ValueError("queries must be nonempty")
    truth = [shortest_path(g, s, t) for s, t in queries]
    lm_index = build_landmarks(g, min(landmark_count, g.vertex_count))

    runners = {
        "dijkstra": lambda s, t: shortest_path(g, s, t),
        "landmark": lambda s, t: landmark_query(g, lm_index, s, t),
        "lsearch": lambda s, t: lsearch(g, model, s, t, cfg),
    }
    out: dict[str, MethodStats] = {}
    for method, run in runners.items():
        results: list[PathResult] = []
        micros: list[float] = []
        for s, t in queries:
            times = []
            res = None
            for _ in range(max(repeats, 1)):
                t0 = time.perf_counter()
                res = run(s, t)
                times.append((time.perf_counter() - t0) * 1e6)
            kept = times[1:] if len(times) > 1 else times
            micros.append(sum(kept) / len(kept))
            results.append(res)
        metrics = compute_metrics(truth, results)
        peak_queue = max(r.popped for r in results)
        out[method] = MethodStats(
            method=method,
            results=results,
            mean_micros=sum(micros) / len(micros),
            memory_proxy_bytes=search_state_bytes(method, g.vertex_count, peak_queue),
            acc=metrics.acc,
            hit=metrics.hit,
            total_popped=sum(r.popped for r in results),
            total_pruned=sum(r.pruned for r in results),
        )
    return out
