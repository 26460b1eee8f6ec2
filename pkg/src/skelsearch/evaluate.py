"""Search-quality metrics, query workload sampling, and experiment runs."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, asdict
from typing import Sequence

import numpy as np

from .graph import Graph, PathResult, dijkstra, shortest_path, build_landmarks, landmark_query
from .search import SearchConfig, lsearch, search_state_bytes


@dataclass
class MetricsReport:
    mape_d: float
    mape_h: float
    rmse_d: float
    rmse_h: float
    acc: float  # percentage, <= 100
    hit: float  # fraction in [0, 1]
    query_time_micros: float = math.nan
    memory_proxy_bytes: int = 0
    excluded_pairs: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _paths_equal(a: PathResult, b: PathResult) -> bool:
    if not a.reachable or not b.reachable:
        return a.reachable == b.reachable
    return a.vertices == b.vertices or a.vertices == tuple(reversed(b.vertices))


def compute_metrics(truth: Sequence[PathResult], found: Sequence[PathResult]) -> MetricsReport:
    """Error and exactness metrics of found paths against ground truth.

    Pairs whose ground-truth distance is zero (or infinite) are excluded
    from the ratio metrics and counted in excluded_pairs; hit counts exact
    vertex-sequence matches, treating a path and its reverse as equal.
    """
    if len(truth) != len(found):
        raise ValueError("truth and found must have equal lengths")
    if not truth:
        raise ValueError("no pairs to score")
    d_err, d_rel, h_err, h_rel = [], [], [], []
    hits = 0
    excluded = 0
    for ref, got in zip(truth, found):
        if _paths_equal(ref, got):
            hits += 1
        if not (ref.reachable and got.reachable) or ref.distance <= 0:
            excluded += 1
            continue
        d_err.append(got.distance - ref.distance)
        d_rel.append(abs(got.distance - ref.distance) / ref.distance)
        h_err.append(got.hops - ref.hops)
        if ref.hops > 0:
            h_rel.append(abs(got.hops - ref.hops) / ref.hops)
    if d_err:
        mape_d = float(np.mean(d_rel))
        mape_h = float(np.mean(h_rel)) if h_rel else 0.0
        rmse_d = float(np.sqrt(np.mean(np.square(d_err))))
        rmse_h = float(np.sqrt(np.mean(np.square(h_err))))
        acc = 100.0 * float(np.mean([1.0 - r for r in d_rel]))
    else:
        mape_d = mape_h = rmse_d = rmse_h = 0.0
        acc = 100.0
    return MetricsReport(mape_d=mape_d, mape_h=mape_h, rmse_d=rmse_d, rmse_h=rmse_h,
                         acc=acc, hit=hits / len(truth), excluded_pairs=excluded)


# ---------------------------------------------------------------------------
# Workload generation
# ---------------------------------------------------------------------------


@dataclass
class EvalConfig:
    query_count: int = 100
    repeats: int = 10
    rho: int | None = 350  # hop-band center; None disables the band filter
    hop_halfwidth: int = 50
    eta: float | None = None  # cross-leaf rate; needs an index
    seed: int = 0


class WorkloadError(ValueError):
    pass


def generate_queries(g: Graph, cfg: EvalConfig, leaf_of: Sequence[int] | None = None,
                     oracle_cache: dict | None = None) -> list[tuple[int, int]]:
    """Sample (s, t) pairs whose true hop count falls in the configured band.

    With a leaf assignment and eta set, exactly ceil(eta * query_count) of
    the pairs cross leaves.  Raises WorkloadError listing the achievable hop
    range when the band (or the cross-leaf split) cannot be filled.
    """
    rng = np.random.default_rng([cfg.seed, 90])
    if cfg.eta is not None and leaf_of is None:
        raise WorkloadError("eta given but no leaf assignment to classify pairs")
    lo, hi = 0, math.inf
    if cfg.rho is not None:
        lo, hi = cfg.rho - cfg.hop_halfwidth, cfg.rho + cfg.hop_halfwidth
    want_cross = math.ceil(cfg.eta * cfg.query_count) if cfg.eta is not None else None
    cache = oracle_cache if oracle_cache is not None else {}

    cross: list[tuple[int, int]] = []
    same: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    max_hop_seen = 0
    sources = rng.permutation(g.vertex_count)
    for src in sources:
        src = int(src)
        if src not in cache:
            cache[src] = dijkstra(g, src)
        res = cache[src]
        targets = rng.permutation(g.vertex_count)
        for tgt in targets:
            tgt = int(tgt)
            if tgt == src or not math.isfinite(res.dist[tgt]):
                continue
            max_hop_seen = max(max_hop_seen, res.hop[tgt])
            if not (lo <= res.hop[tgt] <= hi):
                continue
            key = (src, tgt) if src < tgt else (tgt, src)
            if key in seen:
                continue
            is_cross = leaf_of is not None and leaf_of[src] != leaf_of[tgt]
            bucket = cross if is_cross else same
            if want_cross is None:
                if len(cross) + len(same) < cfg.query_count:
                    seen.add(key)
                    bucket.append((src, tgt))
            else:
                limit = want_cross if is_cross else cfg.query_count - want_cross
                if len(bucket) < limit:
                    seen.add(key)
                    bucket.append((src, tgt))
        done = (len(cross) + len(same) == cfg.query_count
                and (want_cross is None or len(cross) == want_cross))
        if done:
            break
    queries = cross + same
    if len(queries) < cfg.query_count or (want_cross is not None and len(cross) < want_cross):
        band = f"[{lo}, {hi}]" if cfg.rho is not None else "(unbounded)"
        raise WorkloadError(
            f"could only sample {len(queries)} queries ({len(cross)} cross-leaf) for "
            f"hop band {band}; largest reachable hop count is {max_hop_seen}")
    order = rng.permutation(len(queries))
    return [queries[i] for i in order]


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


@dataclass
class QueryRecord:
    method: str
    query_id: int
    result: PathResult
    truth: PathResult
    micros: float

    def csv_row(self) -> dict:
        return {
            "method": self.method,
            "query_id": self.query_id,
            "distance": self.result.distance,
            "truth_distance": self.truth.distance,
            "hops": self.result.hops,
            "hit": int(_paths_equal(self.truth, self.result)),
            "micros": self.micros,
            "pops": self.result.popped,
            "prunes": self.result.pruned,
        }


def run_method(g: Graph, method: str, queries: list[tuple[int, int]],
               truth: list[PathResult], repeats: int, runner) -> tuple[list[QueryRecord], MetricsReport]:
    """Execute one method over the workload; first repeat is warm-up."""
    records = []
    results = []
    peak_queue = 0
    for qid, (s, t) in enumerate(queries):
        times = []
        res = None
        for _ in range(max(repeats, 1)):
            t0 = time.perf_counter()
            res = runner(s, t)
            times.append((time.perf_counter() - t0) * 1e6)
        kept = times[1:] if len(times) > 1 else times
        micros = sum(kept) / len(kept)
        results.append(res)
        peak_queue = max(peak_queue, res.popped)
        records.append(QueryRecord(method, qid, res, truth[qid], micros))
    metrics = compute_metrics(truth, results)
    metrics.query_time_micros = sum(r.micros for r in records) / len(records)
    metrics.memory_proxy_bytes = search_state_bytes(
        "lsearch" if method in ("lsearch", "hlsearch") else "dijkstra",
        g.vertex_count, peak_queue)
    return records, metrics


def _trend_non_decreasing(series: Sequence[float], tolerance: float = 1e-9) -> bool:
    return all(b >= a - tolerance for a, b in zip(series, series[1:]))


def run_experiment(exp: dict, out_dir: str) -> dict:
    """Run the experiment described by a JSON-style dict and emit reports.

    Artifacts referenced by the spec are validated before anything runs.
    Writes results.csv, summary.json, and per-sweep CSV + PNG figures into
    out_dir; returns the summary dict.
    """
    import os

    from . import storage, skeleton as skeleton_mod, sgnn as sgnn_mod, reporting
    from .search import SgnnPredictor
    from .hierarchy import HierIndex, hlsearch, hsearch, load_index

    methods = exp.get("methods", ["dijkstra"])
    sweeps = exp.get("sweeps", {})
    needed = {"graph"}
    if "lsearch" in methods:
        needed.update(("model", "labels"))
    if ("hlsearch" in methods or "hsearch" in methods
            or exp.get("eta") is not None or "eta" in sweeps):
        needed.add("index")
    missing = [key for key in needed
               if not exp.get(key) or not os.path.exists(exp[key])]
    if missing:
        raise FileNotFoundError(
            "experiment spec is missing artifacts: "
            + ", ".join(f"{k}={exp.get(k)!r}" for k in missing))

    g = storage.load_graph(exp["graph"])
    predictor = None
    if "lsearch" in methods:
        labels = skeleton_mod.load_labels(exp["labels"])
        model = sgnn_mod.load_model(exp["model"])
        predictor = SgnnPredictor.build(g, labels, model)
    index: HierIndex | None = None
    if "index" in needed:
        index = load_index(exp["index"], g)

    cfg = EvalConfig(
        query_count=exp.get("query_count", 100),
        repeats=exp.get("repeats", 10),
        rho=exp.get("rho"),
        hop_halfwidth=exp.get("hop_halfwidth", 50),
        eta=exp.get("eta"),
        seed=exp.get("seed", 0),
    )
    scfg = SearchConfig(alpha=exp.get("alpha", 0.2), beta=exp.get("beta", 0))
    leaf_of = index.leaf_of if index is not None else None
    queries = generate_queries(g, cfg, leaf_of=leaf_of)
    truth = [shortest_path(g, s, t) for s, t in queries]

    landmark_index = None

    def make_runner(method: str, cfg_override: SearchConfig):
        nonlocal landmark_index
        if method == "dijkstra":
            return lambda s, t: shortest_path(g, s, t)
        if method == "landmark":
            if landmark_index is None:
                landmark_index = build_landmarks(g, min(exp.get("landmarks", 16), g.vertex_count))
            return lambda s, t: landmark_query(g, landmark_index, s, t)
        if method == "lsearch":
            if predictor is None:
                raise FileNotFoundError("lsearch requested without model/labels artifacts")
            return lambda s, t: lsearch(g, predictor, s, t, cfg_override)
        if method == "hsearch":
            return lambda s, t: hsearch(g, index, s, t)
        if method == "hlsearch":
            return lambda s, t: hlsearch(g, index, s, t, cfg_override)
        raise ValueError(f"unknown method {method!r}")

    os.makedirs(out_dir, exist_ok=True)
    all_records: list[QueryRecord] = []
    summary: dict = {"settings": {**exp, "alpha": scfg.alpha, "beta": scfg.beta},
                     "methods": {}, "sweeps": {}}
    for method in methods:
        records, metrics = run_method(g, method, queries, truth, cfg.repeats,
                                      make_runner(method, scfg))
        all_records.extend(records)
        summary["methods"][method] = {
            **metrics.to_dict(),
            "total_pops": sum(r.result.popped for r in records),
            "total_prunes": sum(r.result.pruned for r in records),
        }

    reporting.write_results_csv(os.path.join(out_dir, "results.csv"),
                                [r.csv_row() for r in all_records])

    sweep_method = next((m for m in ("hlsearch", "hsearch", "lsearch",
                                     "landmark", "dijkstra") if m in methods),
                        "dijkstra")
    for param, values in sweeps.items():
        if param in ("alpha", "beta"):
            acc_series, hit_series = [], []
            for value in values:
                swept = SearchConfig(
                    alpha=value if param == "alpha" else scfg.alpha,
                    beta=value if param == "beta" else scfg.beta)
                _, metrics = run_method(g, sweep_method, queries, truth, 1,
                                        make_runner(sweep_method, swept))
                acc_series.append(metrics.acc)
                hit_series.append(metrics.hit)
        elif param in ("rho", "eta"):
            # workload-level sweep: a fresh query set per value
            acc_series, hit_series = [], []
            for value in values:
                swept_cfg = EvalConfig(
                    query_count=cfg.query_count, repeats=1,
                    rho=value if param == "rho" else cfg.rho,
                    hop_halfwidth=cfg.hop_halfwidth,
                    eta=value if param == "eta" else cfg.eta,
                    seed=cfg.seed)
                swept_queries = generate_queries(g, swept_cfg, leaf_of=leaf_of)
                swept_truth = [shortest_path(g, s, t) for s, t in swept_queries]
                _, metrics = run_method(g, sweep_method, swept_queries, swept_truth,
                                        1, make_runner(sweep_method, scfg))
                acc_series.append(metrics.acc)
                hit_series.append(metrics.hit)
        else:
            raise ValueError(f"unknown sweep parameter {param!r}")
        rows = [{"value": v, "acc": a, "hit": h}
                for v, a, h in zip(values, acc_series, hit_series)]
        reporting.write_results_csv(os.path.join(out_dir, f"sweep_{param}.csv"), rows)
        reporting.render_sweep_figure(os.path.join(out_dir, f"fig_{param}.png"),
                                      param, values, acc_series, hit_series)
        summary["sweeps"][param] = {
            "values": list(values),
            "acc": acc_series,
            "hit": hit_series,
            "acc_non_decreasing": _trend_non_decreasing(acc_series),
            "hit_non_decreasing": _trend_non_decreasing(hit_series),
        }

    reporting.write_summary_json(os.path.join(out_dir, "summary.json"), summary)
    return summary
