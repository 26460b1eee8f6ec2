"""Acceptance suite: every criterion at its stated tolerance, one line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the PASS lines as
they complete.  The trained-model criteria share one 1,000-vertex model and
the hierarchy criteria share one 2,000-vertex index, so the file takes a few
minutes end to end.
"""

import math
import time

import numpy as np
import pytest

from skelsearch.graph import dijkstra, shortest_path
from skelsearch.evaluate import EvalConfig, compute_metrics, generate_queries
from skelsearch.hierarchy import build_hier_index, hlsearch, hsearch
from skelsearch.partition import partition
from skelsearch.search import NullModel, OracleModel, SearchConfig, SgnnPredictor, lsearch
from skelsearch.sgnn import TrainingConfig, train
from skelsearch.skeleton import SkeletonConfig, build_labels, build_skeleton_graph, default_config_for
from skelsearch.synth import power_law_graph, random_connected_graph
from skelsearch.cli import main as cli_main

from tests.conftest import V, REF_BUCKETS_B3, build_ref_graph
from tests.oracles import expected_buckets


def report(line: str) -> None:
    print(f"\n{line}")


# ---------------------------------------------------------------------------
# Shared fixtures
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def label_corpus():
    """50 seeded random connected graphs with labels, cycling the configs."""
    corpus = []
    sizes = [40, 80, 120, 160, 200]
    configs = [(2, 1), (2, 2), (3, 1), (3, 2)]
    for i in range(50):
        n = sizes[i % len(sizes)]
        base, max_tier = configs[i % len(configs)]
        g = random_connected_graph(n, n // 2, seed=1000 + i)
        cfg = SkeletonConfig(base, max_tier)
        corpus.append((g, cfg, build_labels(g, cfg)))
    return corpus


@pytest.fixture(scope="module")
def trained_setup():
    """Criterion-6 graph and model, reused by criteria 7 and 8."""
    g = power_law_graph(1000, attach=2, seed=7, weight_low=1.0, weight_high=10.0)
    cfg = default_config_for(g)
    labels = build_labels(g, cfg)
    tcfg = TrainingConfig(epochs=200, seed=7, pair_sample_budget=200_000)
    model, train_report, buffers = train(g, labels, tcfg)
    predictor = SgnnPredictor.build(g, labels, model)
    queries = generate_queries(g, EvalConfig(query_count=100, rho=None, seed=1))
    truth = [shortest_path(g, s, t) for s, t in queries]
    return {
        "graph": g, "labels": labels, "model": model, "report": train_report,
        "predictor": predictor, "queries": queries, "truth": truth,
    }


@pytest.fixture(scope="module")
def hier_setup():
    """Criterion-9 graph and two-level index, reused by criterion 10.

    Integer weights keep every distance an exact float64 integer, so
    "matches exactly" is exact comparison.  The partition parameters give
    fewer than 2*fanout leaves, hence a single root whose territory is the
    whole graph; cross-leaf composition is then provably exact.
    """
    g = random_connected_graph(2000, 600, seed=77, weight_kind="int")
    part = partition(g, min_leaf_size=150, seed_count=8)
    idx = build_hier_index(g, part, fanout=5, train_cfg=None)
    assert sorted(idx.nodes[idx.root].children) == sorted(idx.leaf_ids)
    queries = generate_queries(
        g, EvalConfig(query_count=100, rho=None, eta=1.0, seed=21),
        leaf_of=idx.leaf_of)
    truth = [shortest_path(g, s, t) for s, t in queries]
    return {"graph": g, "part": part, "index": idx,
            "queries": queries, "truth": truth}


# ---------------------------------------------------------------------------
# Criteria
# ---------------------------------------------------------------------------


def test_criterion_01_label_oracle_equivalence(label_corpus):
    started = time.perf_counter()
    graphs = buckets_checked = 0
    for g, cfg, labels in label_corpus:
        hops = cfg.bucket_hops()
        for source in range(g.vertex_count):
            want = expected_buckets(g, source, hops)
            got = {hop: {e.vertex for e in entries}
                   for hop, entries in labels.buckets[source].items() if entries}
            assert got == want, f"graph {graphs}, source {source}"
            buckets_checked += len(want)
        graphs += 1
    elapsed = time.perf_counter() - started
    assert elapsed < 60.0
    report(f"PASS criterion-1: {buckets_checked} buckets across {graphs} graphs "
           f"exactly match the hop oracle ({elapsed:.1f}s < 60s)")


def test_criterion_02_skeleton_graph_weights(label_corpus):
    edges_checked = 0
    for g, cfg, labels in label_corpus:
        sg = build_skeleton_graph(g, labels)
        oracle = {s: dijkstra(g, s) for s in range(g.vertex_count)}
        for u in range(g.vertex_count):
            for v, w, _tier, _hop in sg.adjacency[u]:
                assert w == oracle[u].dist[v]
                edges_checked += 1
    # hand-encoded worked example: buckets and the re-weighted direct edge
    ref = build_ref_graph()
    labels = build_labels(ref, SkeletonConfig(base=3, max_tier=1))
    for hop, want in REF_BUCKETS_B3.items():
        assert labels.bucket_vertices(V[1], hop) == want
    sg = build_skeleton_graph(ref, labels)
    assert ref.edge_weight(V[1], V[2]) == 5.0
    assert sg.edge(V[1], V[2])[0] == 4.0
    report(f"PASS criterion-2: {edges_checked} skeleton edge weights equal oracle "
           f"distances; worked-example buckets and 5->4 re-weighting reproduced")


def test_criterion_03_null_model_reduction():
    model = NullModel()
    cfg = SearchConfig(alpha=0.2, beta=math.inf)
    pairs = 0
    for seed in range(5):
        g = random_connected_graph(100, 150, seed=2000 + seed)
        for s in range(g.vertex_count):
            truth = dijkstra(g, s)
            for t in range(s + 1, g.vertex_count):
                res = lsearch(g, model, s, t, cfg)
                assert res.distance == truth.dist[t], (seed, s, t)
                pairs += 1
    report(f"PASS criterion-3: null model + infinite protection reproduces "
           f"dijkstra on all {pairs} pairs of 5 graphs (exact)")


def test_criterion_04_oracle_heuristic_exactness():
    cfg = SearchConfig(alpha=0.0, beta=0)
    pairs = 0
    for seed in range(5):
        g = random_connected_graph(200, 300, seed=3000 + seed)
        model = OracleModel(g)
        for s in range(g.vertex_count):
            truth = dijkstra(g, s)
            for t in range(s + 1, g.vertex_count):
                res = lsearch(g, model, s, t, cfg)
                assert res.distance == truth.dist[t], (seed, s, t)
                pairs += 1
    report(f"PASS criterion-4: exact-heuristic search matches dijkstra on all "
           f"{pairs} pairs of 5 graphs (exact)")


def test_criterion_05_gradient_check():
    started = time.perf_counter()
    from skelsearch.sgnn import (SgnnModel, extract_features, normalize_features,
                                 pair_ground_truth, sample_pairs, tier_adjacencies)

    g = random_connected_graph(20, 26, seed=27)
    cfg = SkeletonConfig(2, 1)
    labels = build_labels(g, cfg)
    adjs = tier_adjacencies(labels)
    feats, _, _ = normalize_features(extract_features(g, labels))
    model = SgnnModel.initialize(cfg, TrainingConfig(embedding_dim=5, head_hidden=(6,),
                                                     gamma=0.4),
                                 np.random.default_rng(28))
    s, t = sample_pairs(g, 40, np.random.default_rng(1))
    yd, yh = pair_ground_truth(g, s, t)
    yd = yd / yd.max()
    yh = yh / yh.max()
    _, _, _, grads = model.loss_and_grads(feats, adjs, s, t, yd, yh)
    step = 1e-5
    params_checked = 0
    worst = 0.0
    for name, p in model.named_params():
        flat = p.reshape(-1)
        analytic = grads[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = model.loss_and_grads(feats, adjs, s, t, yd, yh)[0]
            flat[i] = orig - step
            down = model.loss_and_grads(feats, adjs, s, t, yd, yh)[0]
            flat[i] = orig
            fd = (up - down) / (2 * step)
            a = analytic[i]
            if max(abs(a), abs(fd)) < 1e-6:
                assert abs(a - fd) <= 1e-6, f"{name}[{i}]"
            else:
                rel = abs(a - fd) / max(abs(a), abs(fd))
                worst = max(worst, rel)
                assert rel <= 1e-4, f"{name}[{i}]: {a} vs {fd}"
            params_checked += 1
    elapsed = time.perf_counter() - started
    assert elapsed < 120.0
    report(f"PASS criterion-5: {params_checked} parameters match central "
           f"differences (worst rel err {worst:.2e} <= 1e-4, {elapsed:.1f}s < 120s)")


def test_criterion_06_training_quality(trained_setup):
    rep = trained_setup["report"]
    assert rep.epochs <= 200
    assert rep.train_seconds < 1800.0
    assert rep.mape_d <= 0.20, f"MAPE_d {rep.mape_d:.4f}"
    assert rep.mape_h <= 0.20, f"MAPE_h {rep.mape_h:.4f}"
    report(f"PASS criterion-6: held-out MAPE_d={rep.mape_d:.3f} "
           f"MAPE_h={rep.mape_h:.3f} (both <= 0.20) in {rep.epochs} epochs, "
           f"{rep.train_seconds:.0f}s < 30min")


def test_criterion_07_search_effectiveness(trained_setup):
    g = trained_setup["graph"]
    predictor = trained_setup["predictor"]
    queries = trained_setup["queries"]
    truth = trained_setup["truth"]
    found = [lsearch(g, predictor, s, t, SearchConfig(alpha=0.2, beta=0))
             for s, t in queries]
    metrics = compute_metrics(truth, found)
    lsearch_pops = sum(r.popped for r in found)
    dijkstra_pops = sum(r.popped for r in truth)
    assert metrics.acc >= 95.0, f"acc {metrics.acc:.2f}"
    assert metrics.hit >= 0.70, f"hit {metrics.hit:.2f}"
    assert lsearch_pops < dijkstra_pops
    report(f"PASS criterion-7: acc={metrics.acc:.2f}% (>=95) hit={metrics.hit:.2f} "
           f"(>=0.70) pops {lsearch_pops} < dijkstra {dijkstra_pops}")


def test_criterion_08_beta_monotonicity(trained_setup):
    g = trained_setup["graph"]
    predictor = trained_setup["predictor"]
    queries = trained_setup["queries"]
    truth = trained_setup["truth"]
    scores = {}
    for beta in (0, 4):
        found = [lsearch(g, predictor, s, t, SearchConfig(alpha=0.2, beta=beta))
                 for s, t in queries]
        m = compute_metrics(truth, found)
        scores[beta] = (m.acc, m.hit)
    assert scores[4][0] >= scores[0][0] - 1e-9, scores
    assert scores[4][1] >= scores[0][1] - 1e-9, scores
    report(f"PASS criterion-8: beta=4 (acc={scores[4][0]:.2f}%, hit={scores[4][1]:.2f}) "
           f">= beta=0 (acc={scores[0][0]:.2f}%, hit={scores[0][1]:.2f})")


def test_criterion_09_hsearch_exactness(hier_setup):
    g = hier_setup["graph"]
    idx = hier_setup["index"]
    part = hier_setup["part"]
    mismatches = 0
    for (s, t), truth in zip(hier_setup["queries"], hier_setup["truth"]):
        assert part.assignment[s] != part.assignment[t]
        res = hsearch(g, idx, s, t)
        if res.distance != truth.distance:
            mismatches += 1
    assert mismatches == 0
    report(f"PASS criterion-9: 100 cross-leaf queries on a "
           f"{part.leaf_count}-leaf 2000-vertex index match dijkstra exactly "
           f"(corrected objective; literal objective kept behind a flag)")


def test_criterion_10_hlsearch_full_cross_rate(hier_setup):
    g = hier_setup["graph"]
    idx = hier_setup["index"]
    queries = hier_setup["queries"]
    truth = hier_setup["truth"]

    # exact predictors first: accuracy must be exactly 100%
    oracle_cache = {}

    def oracle_leaf(leaf_id):
        if leaf_id not in oracle_cache:
            oracle_cache[leaf_id] = OracleModel(idx.nodes[leaf_id].leaf_graph)
        return oracle_cache[leaf_id]

    found = [hlsearch(g, idx, s, t, SearchConfig(0.2, 0), leaf_models=oracle_leaf)
             for s, t in queries]
    oracle_metrics = compute_metrics(truth, found)
    assert oracle_metrics.acc == 100.0

    # trained leaf models at leaf scale
    leaf_cfg = TrainingConfig(epochs=150, seed=7, pair_sample_budget=20_000)
    trained_idx = build_hier_index(g, hier_setup["part"], fanout=5, train_cfg=leaf_cfg)
    found = [hlsearch(g, trained_idx, s, t, SearchConfig(0.2, 0)) for s, t in queries]
    trained_metrics = compute_metrics(truth, found)
    assert trained_metrics.acc >= 95.0, f"acc {trained_metrics.acc:.2f}"
    report(f"PASS criterion-10: eta=100% workload acc={trained_metrics.acc:.2f}% "
           f"(>=95) with trained leaves; exactly 100.00% with oracle leaves")


def test_criterion_11_determinism(tmp_path):
    import json
    import os

    sample = os.path.join(os.path.dirname(__file__), "..", "data", "sample30.edges")
    gp = str(tmp_path / "g.bin")
    assert cli_main(["ingest", sample, "-o", gp]) == 0
    model_blobs = []
    for tag in ("a", "b"):
        lp = str(tmp_path / f"l{tag}.bin")
        mp = str(tmp_path / f"m{tag}.bin")
        assert cli_main(["skeleton", "-g", gp, "-b", "2", "-m", "1", "-o", lp]) == 0
        assert cli_main(["train", "-g", gp, "-l", lp, "--epochs", "15", "--emb", "8",
                         "--batch", "64", "--seed", "42", "-o", mp]) == 0
        model_blobs.append(open(mp, "rb").read())
    assert model_blobs[0] == model_blobs[1]

    payloads = []
    for threads in ("1", "1", "4"):
        out = str(tmp_path / f"r{len(payloads)}.json")
        assert cli_main(["--threads", threads, "search", "dijkstra", "-g", gp,
                         "-s", "2", "-t", "27", "--out", out]) == 0
        payload = json.load(open(out))
        for row in payload["results"]:
            row.pop("micros")
        payloads.append(payload)
    assert payloads[0] == payloads[1] == payloads[2]
    report("PASS criterion-11: same seed gives byte-identical model files; "
           "search outputs identical across runs and thread counts")


def test_criterion_12_partition_invariants():
    graphs = 0
    for seed in range(20):
        n = 150 + 20 * seed
        g = random_connected_graph(n, n // 2, seed=4000 + seed)
        min_leaf = 15
        part = partition(g, min_leaf_size=min_leaf, seed_count=6)
        seen = set()
        for leaf in part.leaves:
            assert not (seen & set(leaf))
            seen.update(leaf)
        assert seen == set(range(n))
        assert all(len(leaf) >= min_leaf for leaf in part.leaves)
        assert len(part.cross_edges) <= part.cross_before_refine
        graphs += 1
    report(f"PASS criterion-12: disjoint cover, min leaf size, and monotone "
           f"refinement hold on {graphs} seeded graphs")
