"""Command-line entry point wiring ingest, labels, training, search, and eval.

Artifacts are plain files addressed by explicit paths; every stochastic step
is controlled by --seed, so identical invocations produce byte-identical
outputs.  Exit codes: 0 success, 1 runtime failure, 2 usage error (including
missing input files).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

from . import evaluate as evaluate_mod
from . import hierarchy as hierarchy_mod
from .partition import partition as build_partition, save_partition
from . import reporting
from . import sgnn as sgnn_mod
from . import skeleton as skeleton_mod
from . import storage
from .graph import load_edge_list, save_id_map, shortest_path, build_landmarks, landmark_query
from .search import SearchConfig, SgnnPredictor, lsearch
from .sgnn import TrainingConfig


class UsageError(Exception):
    pass


def _require_file(path: str, what: str) -> str:
    if not os.path.exists(path):
        raise UsageError(f"{what} not found: {path}")
    return path


def _load_graph_arg(path: str):
    return storage.load_graph(_require_file(path, "graph"))


def _load_queries(path: str) -> list[tuple[int, int]]:
    queries = []
    with open(_require_file(path, "query file"), "r", encoding="utf8") as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            if len(parts) != 2:
                raise UsageError(f"query file line {line_no}: expected 's t'")
            queries.append((int(parts[0]), int(parts[1])))
    if not queries:
        raise UsageError("query file holds no queries")
    return queries


def _result_row(s: int, t: int, res, micros: float) -> dict:
    return {
        "s": s,
        "t": t,
        "distance": res.distance if res.reachable else None,
        "reachable": res.reachable,
        "hops": res.hops,
        "path": list(res.vertices),
        "pops": res.popped,
        "prunes": res.pruned,
        "micros": micros,
    }


def cmd_ingest(args) -> int:
    g, originals = load_edge_list(_require_file(args.edges, "edge list"))
    storage.save_graph(args.out, g)
    save_id_map(args.out + ".ids", originals)
    print(f"ingested {g.vertex_count} vertices, {g.edge_count} edges -> {args.out}")
    return 0


def cmd_skeleton(args) -> int:
    g = _load_graph_arg(args.graph)
    if args.base is not None or args.max_tier is not None:
        base = args.base if args.base is not None else 2
        max_tier = args.max_tier if args.max_tier is not None else 2
        cfg = skeleton_mod.SkeletonConfig(base, max_tier)
    else:
        cfg = skeleton_mod.default_config_for(g)
    labels = skeleton_mod.build_labels(g, cfg)
    skeleton_mod.save_labels(args.out, labels)
    print(f"labels: base={cfg.base} max_tier={cfg.max_tier} "
          f"entries={labels.entry_count()} -> {args.out}")
    if args.dump_text:
        with open(args.dump_text, "w", encoding="utf8") as fh:
            fh.write(skeleton_mod.labels_to_text(labels))
    if args.export_edges:
        sg = skeleton_mod.build_skeleton_graph(g, labels)
        skeleton_mod.export_skeleton_edges(sg, args.export_edges)
    return 0


def cmd_train(args) -> int:
    g = _load_graph_arg(args.graph)
    labels = skeleton_mod.load_labels(_require_file(args.labels, "labels"))
    cfg = TrainingConfig(
        learning_rate=args.lr,
        batch_size=args.batch,
        epochs=args.epochs,
        embedding_dim=args.emb,
        gamma=args.gamma,
        seed=args.seed,
        train_fraction=args.train_fraction,
        pair_sample_budget=args.pair_budget,
    )
    log_path = args.log or (args.out + ".train.csv")
    model, report, (e_d, e_h) = sgnn_mod.train(g, labels, cfg, log_path=log_path)
    sgnn_mod.save_model(args.out, model)
    if args.curve:
        reporting.render_training_curve(args.curve, report.loss_total,
                                        report.loss_distance, report.loss_hop)
    print(f"trained {report.epochs} epochs on {report.train_count}/{report.pair_count} pairs "
          f"in {report.train_seconds:.1f}s")
    print(f"test MAPE distance={report.mape_d:.4f} hop={report.mape_h:.4f}  "
          f"RMSE distance={report.rmse_d:.4f} hop={report.rmse_h:.4f}")
    print(f"error buffers: distance={e_d:.4f} hop={e_h:.4f}")
    return 0


def cmd_predict(args) -> int:
    g = _load_graph_arg(args.graph)
    labels = skeleton_mod.load_labels(_require_file(args.labels, "labels"))
    model = sgnn_mod.load_model(_require_file(args.model, "model"))
    predictor = SgnnPredictor.build(g, labels, model)
    dist = predictor.predict_distance(args.source, args.target)
    hops = predictor.predict_hop(args.source, args.target)
    print(f"predicted distance={dist:.6g} hops={hops:.6g}")
    if args.truth:
        truth = shortest_path(g, args.source, args.target)
        if truth.reachable:
            print(f"true distance={truth.distance:.6g} hops={truth.hops}")
        else:
            print("true distance=unreachable")
    return 0


def cmd_partition(args) -> int:
    g = _load_graph_arg(args.graph)
    part = build_partition(g, args.min_leaf, args.seeds)
    save_partition(args.out, part)
    sizes = part.leaf_sizes()
    print(f"{part.leaf_count} leaves, sizes {min(sizes)}..{max(sizes)}, "
          f"{len(part.cross_edges)} cross edges -> {args.out}")
    return 0


def cmd_hindex(args) -> int:
    if args.action != "build":
        raise UsageError(f"unknown hindex action {args.action!r}")
    g = _load_graph_arg(args.graph)
    part = build_partition(g, args.min_leaf, args.seeds)
    train_cfg = None
    if not args.no_models:
        train_cfg = TrainingConfig(
            epochs=args.leaf_epochs,
            embedding_dim=args.emb,
            gamma=args.gamma,
            seed=args.seed,
            pair_sample_budget=args.pair_budget,
        )
    idx = hierarchy_mod.build_hier_index(
        g, part, fanout=args.fanout, train_cfg=train_cfg,
        log=(print if args.verbose else None))
    hierarchy_mod.save_index(args.out, idx)
    print(f"index: {len(idx.nodes)} nodes ({part.leaf_count} leaves), "
          f"root {idx.root} -> {args.out}")
    return 0


def cmd_search(args) -> int:
    g = _load_graph_arg(args.graph)
    method = args.method
    cfg = SearchConfig(alpha=args.alpha,
                       beta=math.inf if args.beta < 0 else args.beta)
    if method == "lsearch":
        labels = skeleton_mod.load_labels(_require_file(args.labels, "labels"))
        model = sgnn_mod.load_model(_require_file(args.model, "model"))
        predictor = SgnnPredictor.build(g, labels, model)
        runner = lambda s, t: lsearch(g, predictor, s, t, cfg)
    elif method == "dijkstra":
        runner = lambda s, t: shortest_path(g, s, t)
    elif method == "landmark":
        index = build_landmarks(g, min(args.landmarks, g.vertex_count))
        runner = lambda s, t: landmark_query(g, index, s, t)
    elif method in ("hsearch", "hlsearch"):
        idx = hierarchy_mod.load_index(_require_file(args.index, "index"), g)
        if method == "hsearch":
            runner = lambda s, t: hierarchy_mod.hsearch(g, idx, s, t)
        else:
            runner = lambda s, t: hierarchy_mod.hlsearch(g, idx, s, t, cfg)
    else:
        raise UsageError(f"unknown search method {method!r}")

    if args.queries:
        queries = _load_queries(args.queries)
    elif args.source is not None and args.target is not None:
        queries = [(args.source, args.target)]
    elif args.eta is not None or args.rho is not None:
        # generate a seeded workload in place of an explicit query list
        from .evaluate import EvalConfig, generate_queries

        leaf_of = None
        if args.eta is not None:
            if method not in ("hsearch", "hlsearch"):
                raise UsageError("--eta needs an index-backed method (hsearch/hlsearch)")
            leaf_of = idx.leaf_of
        queries = generate_queries(
            g, EvalConfig(query_count=args.query_count, rho=args.rho,
                          eta=args.eta, seed=args.seed),
            leaf_of=leaf_of)
    else:
        raise UsageError("need --queries, --source/--target, or --eta/--rho")

    import time

    rows = []
    for s, t in queries:
        t0 = time.perf_counter()
        res = runner(s, t)
        micros = (time.perf_counter() - t0) * 1e6
        rows.append(_result_row(s, t, res, micros))
    payload = {"method": method, "alpha": cfg.alpha,
               "beta": "inf" if math.isinf(cfg.beta) else cfg.beta,
               "results": rows}
    if args.out:
        with open(args.out, "w", encoding="utf8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
        print(f"{len(rows)} queries -> {args.out}")
    else:
        json.dump(payload, sys.stdout, indent=2)
        print()
    return 0


def cmd_eval(args) -> int:
    with open(_require_file(args.spec, "experiment spec"), "r", encoding="utf8") as fh:
        exp = json.load(fh)
    summary = evaluate_mod.run_experiment(exp, args.out)
    for method, stats in summary["methods"].items():
        print(f"{method}: acc={stats['acc']:.2f}% hit={stats['hit']:.2f} "
              f"time={stats['query_time_micros']:.0f}us pops={stats['total_pops']}")
    print(f"reports -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    # Global flags accepted before or after the subcommand; SUPPRESS keeps a
    # late occurrence from being clobbered by the subparser default.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="RNG seed controlling all stochastic behavior (default 0)")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                        help="cap on internal parallelism; 0 = all cores (default 0; "
                             "execution is sequential and deterministic either way)")
    common.add_argument("--data-dir", default=argparse.SUPPRESS,
                        help="base directory for relative paths (default .)")

    parser = argparse.ArgumentParser(
        prog="skelsearch",
        description="Skeleton-guided learned shortest-path search toolkit",
        parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_parser(name, **kwargs):
        return sub.add_parser(name, parents=[common], **kwargs)

    p = add_parser("ingest", help="parse an edge list into a graph artifact")
    p.add_argument("edges", help="edge-list text file: 'u v [w]' per line")
    p.add_argument("-o", "--out", required=True, help="output graph file")
    p.set_defaults(func=cmd_ingest)

    p = add_parser("skeleton", help="build hop-bucket labels")
    p.add_argument("-g", "--graph", required=True)
    p.add_argument("-b", "--base", type=int, default=None,
                   help="bucket base (default: 3 if avg degree <= 3 else 2)")
    p.add_argument("-m", "--max-tier", type=int, default=None, help="highest tier (default 2)")
    p.add_argument("-o", "--out", required=True, help="output labels file")
    p.add_argument("--dump-text", default=None, help="also write a readable dump here")
    p.add_argument("--export-edges", default=None,
                   help="also write the induced distance graph as edge-list text")
    p.set_defaults(func=cmd_skeleton)

    p = add_parser("train", help="train the prediction model")
    p.add_argument("-g", "--graph", required=True)
    p.add_argument("-l", "--labels", required=True)
    p.add_argument("--epochs", type=int, default=200, help="training epochs (default 200)")
    p.add_argument("--lr", type=float, default=0.01, help="learning rate (default 0.01)")
    p.add_argument("--batch", type=int, default=10000, help="batch size (default 10000)")
    p.add_argument("--emb", type=int, default=32, help="embedding size (default 32)")
    p.add_argument("--gamma", type=float, default=0.5,
                   help="distance-loss weight in the joint loss (default 0.5)")
    p.add_argument("--train-fraction", type=float, default=0.9,
                   help="fraction of pairs used for training (default 0.9)")
    p.add_argument("--pair-budget", type=int, default=200_000,
                   help="max training pairs sampled (default 200000)")
    p.add_argument("--log", default=None, help="per-epoch CSV log (default <out>.train.csv)")
    p.add_argument("--curve", default=None, help="optional loss-curve PNG")
    p.add_argument("-o", "--out", required=True, help="output model file")
    p.set_defaults(func=cmd_train)

    p = add_parser("predict", help="predict distance/hops for one pair")
    p.add_argument("-m", "--model", required=True)
    p.add_argument("-g", "--graph", required=True)
    p.add_argument("-l", "--labels", required=True)
    p.add_argument("-s", "--source", type=int, required=True)
    p.add_argument("-t", "--target", type=int, required=True)
    p.add_argument("--truth", action="store_true", help="also print the exact answer")
    p.set_defaults(func=cmd_predict)

    p = add_parser("partition", help="split the graph into balanced leaves")
    p.add_argument("-g", "--graph", required=True)
    p.add_argument("--min-leaf", type=int, required=True,
                   help="minimum vertices per leaf (required)")
    p.add_argument("--seeds", type=int, default=8, help="seed count (default 8)")
    p.add_argument("-o", "--out", required=True, help="output assignment file")
    p.set_defaults(func=cmd_partition)

    p = add_parser("hindex", help="build the hierarchical index")
    p.add_argument("action", choices=["build"])
    p.add_argument("-g", "--graph", required=True)
    p.add_argument("--min-leaf", type=int, required=True,
                   help="minimum vertices per leaf (required)")
    p.add_argument("--seeds", type=int, default=8, help="seed count (default 8)")
    p.add_argument("--fanout", type=int, default=5,
                   help="minimum children per grouped node (default 5)")
    p.add_argument("--no-models", action="store_true",
                   help="skip per-leaf training (index then serves hsearch only)")
    p.add_argument("--leaf-epochs", type=int, default=100,
                   help="training epochs per leaf model (default 100)")
    p.add_argument("--emb", type=int, default=32, help="embedding size (default 32)")
    p.add_argument("--gamma", type=float, default=0.5,
                   help="distance-loss weight (default 0.5)")
    p.add_argument("--pair-budget", type=int, default=20_000,
                   help="max training pairs per leaf (default 20000)")
    p.add_argument("--verbose", action="store_true", help="log per-leaf progress")
    p.add_argument("-o", "--out", required=True, help="output index file")
    p.set_defaults(func=cmd_hindex)

    p = add_parser("search", help="answer point-to-point queries")
    p.add_argument("method", choices=["dijkstra", "landmark", "lsearch", "hsearch", "hlsearch"])
    p.add_argument("-g", "--graph", required=True)
    p.add_argument("-m", "--model", default=None, help="model file (lsearch)")
    p.add_argument("-l", "--labels", default=None, help="labels file (lsearch)")
    p.add_argument("--index", default=None, help="index file (hsearch/hlsearch)")
    p.add_argument("--alpha", type=float, default=0.2,
                   help="skip-buffer scale in [0,1] (default 0.2)")
    p.add_argument("--beta", type=float, default=0,
                   help="protection hops; negative means infinite (default 0)")
    p.add_argument("--landmarks", type=int, default=16,
                   help="landmark count for the landmark method (default 16)")
    p.add_argument("--queries", default=None, help="file of 's t' lines")
    p.add_argument("-s", "--source", type=int, default=None, help="single-query source")
    p.add_argument("-t", "--target", type=int, default=None, help="single-query target")
    p.add_argument("--eta", type=float, default=None,
                   help="generate a workload with this cross-leaf rate (needs --index; "
                        "default: off)")
    p.add_argument("--rho", type=int, default=None,
                   help="generate a workload with true hops in [rho-50, rho+50] "
                        "(default: off)")
    p.add_argument("--query-count", type=int, default=100,
                   help="generated workload size (default 100)")
    p.add_argument("--out", default=None, help="JSON results file (default stdout)")
    p.set_defaults(func=cmd_search)

    p = add_parser("eval", help="run an experiment spec and emit reports")
    p.add_argument("--spec", required=True, help="JSON experiment description")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.seed = getattr(args, "seed", 0)
    args.threads = getattr(args, "threads", 0)
    args.data_dir = getattr(args, "data_dir", ".")
    if args.data_dir and args.data_dir != ".":
        os.chdir(args.data_dir)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - one-line diagnostic contract
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
