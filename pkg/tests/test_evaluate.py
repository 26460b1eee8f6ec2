import json
import math
import os

import numpy as np
import pytest

from skelsearch.evaluate import (
    EvalConfig,
    WorkloadError,
    compute_metrics,
    generate_queries,
    run_experiment,
)
from skelsearch.graph import PathResult, dijkstra
from skelsearch.partition import partition
from skelsearch.hierarchy import build_hier_index, save_index
from skelsearch.sgnn import TrainingConfig, train, save_model
from skelsearch.skeleton import SkeletonConfig, build_labels, save_labels
from skelsearch.synth import random_connected_graph
from skelsearch import storage


def pr(vertices, distance, hops=None):
    return PathResult(tuple(vertices), distance, len(vertices) - 1 if hops is None else hops)


class TestComputeMetrics:
    def test_identical_paths_are_perfect(self):
        truth = [pr([0, 1, 2], 5.0), pr([3, 4], 2.0)]
        report = compute_metrics(truth, list(truth))
        assert report.mape_d == 0.0 and report.rmse_d == 0.0
        assert report.acc == 100.0 and report.hit == 1.0
        assert report.excluded_pairs == 0

    def test_worked_example(self):
        truth = [pr([0, 1], 2.0), pr([2, 3], 4.0)]
        found = [pr([0, 9, 1], 1.0), pr([2, 8, 3], 5.0)]
        report = compute_metrics(truth, found)
        assert report.mape_d == pytest.approx(0.375)  # mean(1/2, 1/4)
        assert report.rmse_d == pytest.approx(1.0)
        assert report.acc == pytest.approx(62.5)
        assert report.hit == 0.0

    def test_same_distance_different_path(self):
        truth = [pr([0, 1, 2], 4.0)]
        found = [pr([0, 3, 2], 4.0)]
        report = compute_metrics(truth, found)
        assert report.acc == 100.0
        assert report.hit == 0.0

    def test_reversed_path_counts_as_hit(self):
        truth = [pr([0, 1, 2], 4.0)]
        found = [pr([2, 1, 0], 4.0)]
        assert compute_metrics(truth, found).hit == 1.0

    def test_zero_distance_pairs_excluded_with_counter(self):
        truth = [pr([0], 0.0), pr([0, 1], 2.0)]
        found = [pr([0], 0.0), pr([0, 1], 2.0)]
        report = compute_metrics(truth, found)
        assert report.excluded_pairs == 1
        assert report.acc == 100.0

    def test_hop_errors_tracked_separately(self):
        truth = [pr([0, 1, 2], 4.0)]
        found = [pr([0, 5, 6, 2], 4.0)]
        report = compute_metrics(truth, found)
        assert report.mape_d == 0.0
        assert report.mape_h == pytest.approx(0.5)
        assert report.rmse_h == pytest.approx(1.0)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(0)
        truth = [pr([0, i + 1], float(rng.integers(1, 9))) for i in range(12)]
        found = [pr([0, 7, i + 1], t.distance + float(rng.integers(0, 3)))
                 for i, t in enumerate(truth)]
        base = compute_metrics(truth, found)
        order = rng.permutation(12)
        shuffled = compute_metrics([truth[i] for i in order], [found[i] for i in order])
        assert base.acc == pytest.approx(shuffled.acc)
        assert base.mape_d == pytest.approx(shuffled.mape_d)
        assert base.hit == shuffled.hit

    def test_hit_implies_full_accuracy_contribution(self):
        truth = [pr([0, 1, 2], 4.0)] * 5
        found = [pr([0, 1, 2], 4.0)] * 5
        report = compute_metrics(truth, found)
        assert report.hit == 1.0 and report.acc == 100.0

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            compute_metrics([pr([0, 1], 1.0)], [])


class TestGenerateQueries:
    def test_band_filter(self):
        g = random_connected_graph(200, 260, seed=100)
        cfg = EvalConfig(query_count=30, rho=3, hop_halfwidth=1, seed=1)
        queries = generate_queries(g, cfg)
        assert len(queries) == 30
        for s, t in queries:
            hop = dijkstra(g, s).hop[t]
            assert 2 <= hop <= 4

    def test_no_band(self):
        g = random_connected_graph(50, 70, seed=101)
        cfg = EvalConfig(query_count=10, rho=None, seed=2)
        assert len(generate_queries(g, cfg)) == 10

    def test_adjacent_pairs_admissible_in_wide_band(self):
        g = random_connected_graph(40, 60, seed=102)
        cfg = EvalConfig(query_count=5, rho=1, hop_halfwidth=50, seed=3)
        queries = generate_queries(g, cfg)
        assert len(queries) == 5

    def test_infeasible_band_reports_reachable_hops(self):
        g = random_connected_graph(30, 40, seed=103)
        cfg = EvalConfig(query_count=5, rho=500, hop_halfwidth=10, seed=4)
        with pytest.raises(WorkloadError) as err:
            generate_queries(g, cfg)
        assert "largest reachable hop" in str(err.value)

    def test_exact_cross_leaf_rate(self):
        g = random_connected_graph(300, 420, seed=104)
        part = partition(g, 40, 6)
        cfg = EvalConfig(query_count=40, rho=None, eta=0.6, seed=5)
        queries = generate_queries(g, cfg, leaf_of=part.assignment)
        cross = sum(1 for s, t in queries if part.assignment[s] != part.assignment[t])
        assert cross == math.ceil(0.6 * 40)

    def test_eta_zero_all_same_leaf(self):
        g = random_connected_graph(200, 300, seed=105)
        part = partition(g, 50, 4)
        cfg = EvalConfig(query_count=20, rho=None, eta=0.0, seed=6)
        queries = generate_queries(g, cfg, leaf_of=part.assignment)
        assert all(part.assignment[s] == part.assignment[t] for s, t in queries)

    def test_eta_full_all_cross_leaf(self):
        g = random_connected_graph(200, 300, seed=106)
        part = partition(g, 50, 4)
        cfg = EvalConfig(query_count=20, rho=None, eta=1.0, seed=7)
        queries = generate_queries(g, cfg, leaf_of=part.assignment)
        assert all(part.assignment[s] != part.assignment[t] for s, t in queries)

    def test_eta_without_assignment_rejected(self):
        g = random_connected_graph(30, 40, seed=107)
        with pytest.raises(WorkloadError):
            generate_queries(g, EvalConfig(eta=0.5, rho=None))

    def test_deterministic(self):
        g = random_connected_graph(80, 120, seed=108)
        cfg = EvalConfig(query_count=15, rho=None, seed=9)
        assert generate_queries(g, cfg) == generate_queries(g, cfg)


@pytest.fixture(scope="module")
def artifacts(tmp_path_factory):
    root = tmp_path_factory.mktemp("exp")
    g = random_connected_graph(120, 180, seed=110, weight_kind="float")
    gp = str(root / "g.bin")
    storage.save_graph(gp, g)
    labels = build_labels(g, SkeletonConfig(2, 1))
    lp = str(root / "labels.bin")
    save_labels(lp, labels)
    model, _, _ = train(g, labels, TrainingConfig(
        epochs=50, embedding_dim=8, head_hidden=(16,), seed=12, batch_size=512))
    mp = str(root / "model.bin")
    save_model(mp, model)
    part = partition(g, 25, 4)
    idx = build_hier_index(g, part, train_cfg=None)
    ip = str(root / "index.bin")
    save_index(ip, idx)
    return {"root": root, "graph": gp, "labels": lp, "model": mp, "index": ip}


class TestRunExperiment:
    def test_missing_artifact_fails_before_running(self, artifacts, tmp_path):
        exp = {"graph": str(artifacts["root"] / "nope.bin"), "methods": ["dijkstra"]}
        with pytest.raises(FileNotFoundError) as err:
            run_experiment(exp, str(tmp_path / "out"))
        assert "nope.bin" in str(err.value)
        assert not os.path.exists(str(tmp_path / "out"))

    def test_single_method_single_query(self, artifacts, tmp_path):
        out = str(tmp_path / "out")
        exp = {"graph": artifacts["graph"], "methods": ["dijkstra"],
               "query_count": 1, "repeats": 1, "rho": None, "seed": 3}
        summary = run_experiment(exp, out)
        assert summary["methods"]["dijkstra"]["acc"] == pytest.approx(100.0)
        rows = open(os.path.join(out, "results.csv")).read().splitlines()
        assert rows[0] == "method,query_id,distance,truth_distance,hops,hit,micros,pops,prunes"
        assert len(rows) == 2

    def test_full_run_with_sweeps_and_figures(self, artifacts, tmp_path):
        out = str(tmp_path / "out")
        exp = {
            "graph": artifacts["graph"], "labels": artifacts["labels"],
            "model": artifacts["model"],
            "methods": ["dijkstra", "landmark", "lsearch"],
            "query_count": 12, "repeats": 2, "rho": None, "seed": 4,
            "alpha": 0.2, "beta": 0, "landmarks": 6,
            "sweeps": {"alpha": [0.2, 0.6, 1.0], "beta": [0, 2, 4]},
        }
        summary = run_experiment(exp, out)
        for name in ("results.csv", "summary.json", "sweep_alpha.csv",
                     "sweep_beta.csv", "fig_alpha.png", "fig_beta.png"):
            assert os.path.exists(os.path.join(out, name)), name
        loaded = json.load(open(os.path.join(out, "summary.json")))
        assert set(loaded["methods"]) == {"dijkstra", "landmark", "lsearch"}
        assert loaded["methods"]["dijkstra"]["hit"] == 1.0
        assert len(loaded["sweeps"]["alpha"]["acc"]) == 3
        assert isinstance(loaded["sweeps"]["alpha"]["acc_non_decreasing"], bool)
        # figures are real PNG files
        with open(os.path.join(out, "fig_alpha.png"), "rb") as fh:
            assert fh.read(8) == b"\x89PNG\r\n\x1a\n"

    def test_hierarchical_methods_with_eta(self, artifacts, tmp_path):
        out = str(tmp_path / "out")
        exp = {
            "graph": artifacts["graph"], "index": artifacts["index"],
            "methods": ["dijkstra", "hsearch"],
            "query_count": 10, "repeats": 1, "rho": None, "eta": 1.0, "seed": 5,
        }
        summary = run_experiment(exp, out)
        assert summary["methods"]["hsearch"]["acc"] == pytest.approx(100.0)

    def test_unknown_method_rejected(self, artifacts, tmp_path):
        exp = {"graph": artifacts["graph"], "methods": ["teleport"],
               "query_count": 1, "repeats": 1, "rho": None}
        with pytest.raises(ValueError):
            run_experiment(exp, str(tmp_path / "out"))


class TestWorkloadSweeps:
    def test_rho_and_eta_sweeps_regenerate_workloads(self, artifacts, tmp_path):
        out = str(tmp_path / "out")
        exp = {
            "graph": artifacts["graph"], "index": artifacts["index"],
            "methods": ["hsearch"],
            "query_count": 8, "repeats": 1, "rho": None, "eta": 0.5, "seed": 6,
            "sweeps": {"rho": [2, 3], "eta": [0.25, 1.0]},
        }
        summary = run_experiment(exp, out)
        assert len(summary["sweeps"]["rho"]["acc"]) == 2
        assert len(summary["sweeps"]["eta"]["hit"]) == 2
        for name in ("sweep_rho.csv", "fig_rho.png", "sweep_eta.csv", "fig_eta.png"):
            assert os.path.exists(os.path.join(out, name))

    def test_eta_sweep_without_index_fails_upfront(self, artifacts, tmp_path):
        exp = {"graph": artifacts["graph"], "methods": ["dijkstra"],
               "query_count": 2, "repeats": 1, "rho": None,
               "sweeps": {"eta": [0.5]}}
        with pytest.raises(FileNotFoundError):
            run_experiment(exp, str(tmp_path / "out"))
