"""Command-line pipeline: synth, featurize, train, infer, eval, benchmark.

Every command is a deterministic function of (inputs, config, seed); all
artifact files are plain text with lossless float serialization so reruns
reproduce them byte-for-byte.
"""

from __future__ import annotations

import argparse
import glob
import math
import os
import re
import sys

import numpy as np

from . import gnn, inference, metrics, synthgen
from .dataset import load_csv, standardize
from .featuregraph import (LogisticPrior, UniformPrior,
                           base_edge_feature_vector, build_feature_graph,
                           load_feature_graph, row_pairs, save_feature_graph)
from .graphs import Dag, read_edge_list, write_edge_list

METHODS = ("pg", "mlg", "pdag", "mldag")


def _parse_int_list(s: str) -> tuple[int, ...]:
    return tuple(int(v) for v in s.split(",") if v.strip())


def _ids_in(dir_path: str, pattern: str) -> list[int]:
    rx = re.compile(pattern)
    out = []
    for p in sorted(glob.glob(os.path.join(dir_path, "*"))):
        m = rx.fullmatch(os.path.basename(p))
        if m:
            out.append(int(m.group(1)))
    return sorted(out)


def cmd_synth(args: argparse.Namespace) -> int:
    spec = synthgen.CorpusSpec(
        node_counts=_parse_int_list(args.nodes),
        edge_multipliers=_parse_int_list(args.edge_mults),
        sample_counts=_parse_int_list(args.samples),
        graph_models=tuple(args.models.split(",")),
        graphs_total=args.graphs_total,
        seed=args.seed,
    )
    items = synthgen.gen_corpus(spec)
    synthgen.write_corpus(items, args.out)
    print(f"wrote {len(items)} graphs to {args.out}")
    return 0


def _fit_logistic_prior(corpus_dir: str) -> LogisticPrior:
    ids = _ids_in(corpus_dir, r"data_(\d+)\.csv")
    vecs, labels = [], []
    for gid in ids:
        data = load_csv(os.path.join(corpus_dir, f"data_{gid:04d}.csv"), has_header=True)
        d, edges = read_edge_list(os.path.join(corpus_dir, f"truth_{gid:04d}.txt"))
        dag = Dag(d, edges)
        lab = gnn.edge_labels_from_dag(dag)
        sdata = standardize(data)
        for r, (i, j) in enumerate(row_pairs(d)):
            vecs.append(base_edge_feature_vector(sdata.values[:, i], sdata.values[:, j]))
            labels.append(int(lab[r]))
    return LogisticPrior().fit(np.stack(vecs), np.array(labels))


def cmd_featurize(args: argparse.Namespace) -> int:
    if args.prior == "logistic":
        if not args.prior_corpus:
            print("--prior logistic requires --prior-corpus", file=sys.stderr)
            return 2
        provider = _fit_logistic_prior(args.prior_corpus)
    else:
        provider = UniformPrior()
    os.makedirs(args.out, exist_ok=True)
    ids = _ids_in(args.data, r"data_(\d+)\.csv")
    if not ids:
        print(f"no data_*.csv files in {args.data}", file=sys.stderr)
        return 2
    for gid in ids:
        data = load_csv(os.path.join(args.data, f"data_{gid:04d}.csv"), has_header=True)
        if args.standardize:
            data = standardize(data)
        fg = build_feature_graph(data, provider)
        save_feature_graph(fg, os.path.join(args.out, f"features_{gid:04d}.txt"))
    print(f"featurized {len(ids)} datasets into {args.out}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    ids = _ids_in(args.features, r"features_(\d+)\.txt")
    if not ids:
        print(f"no features_*.txt files in {args.features}", file=sys.stderr)
        return 2
    corpus = []
    for gid in ids:
        fg = load_feature_graph(os.path.join(args.features, f"features_{gid:04d}.txt"))
        d, edges = read_edge_list(os.path.join(args.truth, f"truth_{gid:04d}.txt"))
        corpus.append((fg, gnn.edge_labels_from_dag(Dag(d, edges))))
    cfg = gnn.ModelConfig(num_layers=args.layers, hidden_dim=args.hidden_dim,
                          class_weights_mode=args.class_weights, seed=args.seed)
    opt = gnn.OptimizerSettings(learning_rate=args.lr, epochs=args.epochs)
    params, log = gnn.train(corpus, cfg, opt)
    gnn.save_params(params, args.out)
    with open(args.out + ".log", "w", encoding="utf-8") as fh:
        for epoch, val in enumerate(log):
            fh.write(f"epoch={epoch} loss={val!r}\n")
    print(f"trained on {len(corpus)} graphs; "
          f"loss {log[0]:.4f} -> {log[-1]:.4f}; model at {args.out}")
    return 0


def infer_graphs(params: gnn.ModelParams, fg, method: str, n_samples: int,
                 seed: int) -> tuple[inference.EdgeProbabilities, list]:
    """Run one inference method; returns (probs, list of graphs)."""
    probs = gnn.forward(params, fg)
    if method == "pg":
        rng = np.random.default_rng(np.random.SeedSequence((seed, 0)))
        graphs = [inference.sample_digraph(probs, rng) for _ in range(n_samples)]
    elif method == "mlg":
        graphs = [inference.ml_digraph(probs)]
    elif method == "pdag":
        order = inference.ml_ordering(probs)
        rng = np.random.default_rng(np.random.SeedSequence((seed, 1)))
        graphs = [inference.sample_dag(probs, order, rng) for _ in range(n_samples)]
    elif method == "mldag":
        graphs = [inference.ml_dag(probs, inference.ml_ordering(probs))]
    else:
        raise ValueError(f"unknown method {method!r}")
    return probs, graphs


def cmd_infer(args: argparse.Namespace) -> int:
    params = gnn.load_params(args.model)
    os.makedirs(args.out, exist_ok=True)
    if os.path.isdir(args.features):
        ids = _ids_in(args.features, r"features_(\d+)\.txt")
        paths = [(gid, os.path.join(args.features, f"features_{gid:04d}.txt"))
                 for gid in ids]
    else:
        paths = [(0, args.features)]
    for gid, path in paths:
        fg = load_feature_graph(path)
        probs, graphs = infer_graphs(params, fg, args.method, args.samples,
                                     args.seed + gid)
        inference.save_edge_probabilities(
            probs, os.path.join(args.out, f"probs_{gid:04d}.txt"))
        if len(graphs) == 1:
            write_edge_list(os.path.join(args.out, f"pred_{gid:04d}.txt"),
                            fg.d, graphs[0].edges)
        else:
            for k, g in enumerate(graphs):
                write_edge_list(
                    os.path.join(args.out, f"pred_{gid:04d}_s{k:04d}.txt"),
                    fg.d, g.edges)
    print(f"inferred {len(paths)} datasets with method {args.method} into {args.out}")
    return 0


def _nanmean(vals: list[float]) -> float:
    vals = [v for v in vals if not math.isnan(v)]
    return sum(vals) / len(vals) if vals else math.nan


def eval_predictions(pred_dir: str, truth_dir: str) -> list[dict]:
    """Per-graph metrics; sampled methods average over their sample files."""
    ids = _ids_in(truth_dir, r"truth_(\d+)\.txt")
    records = []
    for gid in ids:
        d, tedges = read_edge_list(os.path.join(truth_dir, f"truth_{gid:04d}.txt"))
        truth = Dag(d, tedges)
        single = os.path.join(pred_dir, f"pred_{gid:04d}.txt")
        if os.path.exists(single):
            pred_paths = [single]
        else:
            pred_paths = sorted(
                glob.glob(os.path.join(pred_dir, f"pred_{gid:04d}_s*.txt")))
        if not pred_paths:
            raise FileNotFoundError(f"no predictions for graph {gid} in {pred_dir}")
        per = {"shd": [], "shd_per_d": [], "tpr": [], "fpr": [],
               "predicted": [], "correct": [], "reversed": [], "extra": [],
               "missing": []}
        for path in pred_paths:
            pd_, pedges = read_edge_list(path)
            from .graphs import Digraph
            pred = Digraph(pd_, pedges)
            b = metrics.edge_breakdown(pred, truth)
            per["shd"].append(metrics.shd(pred, truth))
            per["shd_per_d"].append(metrics.shd_per_d(pred, truth))
            per["tpr"].append(metrics.tpr(pred, truth))
            per["fpr"].append(metrics.fpr(pred, truth))
            per["predicted"].append(b.predicted)
            per["correct"].append(b.correct)
            per["reversed"].append(b.reversed)
            per["extra"].append(b.extra)
            per["missing"].append(b.missing)
        rec = {"id": gid, "n_samples": len(pred_paths)}
        rec.update({k: _nanmean(v) for k, v in per.items()})
        records.append(rec)
    return records


_REC_KEYS = ("shd", "shd_per_d", "tpr", "fpr", "predicted", "correct",
             "reversed", "extra", "missing")


def write_report(records: list[dict], path: str, groups: dict[int, str] | None = None
                 ) -> None:
    """One record per graph plus aggregate mean +- standard error, grouped
    by graph model when a manifest mapping is given.
    """
    lines = []
    for rec in records:
        parts = [f"id={rec['id']}", f"samples={rec['n_samples']}"]
        parts += [f"{k}={rec[k]!r}" for k in _REC_KEYS]
        lines.append(" ".join(parts))

    def _agg(recs: list[dict], label: str) -> None:
        for k in _REC_KEYS:
            vals = [r[k] for r in recs if not math.isnan(r[k])]
            if not vals:
                lines.append(f"aggregate[{label}] {k} mean=nan se=nan n=0")
                continue
            mean = sum(vals) / len(vals)
            if len(vals) > 1:
                var = sum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
                se = math.sqrt(var / len(vals))
            else:
                se = 0.0
            lines.append(
                f"aggregate[{label}] {k} mean={mean!r} se={se!r} n={len(vals)}")

    _agg(records, "all")
    if groups:
        for model in sorted(set(groups.values())):
            recs = [r for r in records if groups.get(r["id"]) == model]
            if recs:
                _agg(recs, model)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def cmd_eval(args: argparse.Namespace) -> int:
    records = eval_predictions(args.pred, args.truth)
    groups = None
    if args.manifest:
        groups = {rec["id"]: rec["model"]
                  for rec in synthgen.read_manifest(args.manifest)}
    write_report(records, args.out, groups)
    print(f"evaluated {len(records)} graphs; report at {args.out}")
    return 0


PRESETS = {
    # nodes, edge multipliers, samples, models, train graphs, test graphs,
    # epochs, hidden_dim, layers
    "tiny": dict(nodes=(6,), mults=(1,), samples=(200,), models=("ER", "SF"),
                 train=6, test=2, epochs=30, hidden_dim=16, layers=2),
    "desk": dict(nodes=(10,), mults=(1, 4), samples=(500,), models=("ER", "SF"),
                 train=40, test=20, epochs=300, hidden_dim=64, layers=2),
}


def run_benchmark(out_dir: str, seed: int, preset: str = "desk",
                  n_infer_samples: int = 100, standardize_data: bool = True,
                  lr: float = 1e-3) -> dict[str, list[dict]]:
    """synth -> featurize -> train -> infer -> eval for all four methods.

    Returns {method: per-graph metric records on the test split}; all
    artifacts are written under out_dir.
    """
    cfg = PRESETS[preset]
    total = cfg["train"] + cfg["test"]
    spec = synthgen.CorpusSpec(
        node_counts=cfg["nodes"], edge_multipliers=cfg["mults"],
        sample_counts=cfg["samples"], graph_models=cfg["models"],
        graphs_total=total, seed=seed)
    items = synthgen.gen_corpus(spec)
    train_items = items[:cfg["train"]]
    test_items = items[cfg["train"]:]

    train_dir = os.path.join(out_dir, "train")
    test_dir = os.path.join(out_dir, "test")
    synthgen.write_corpus(train_items, train_dir)
    synthgen.write_corpus(test_items, test_dir)

    provider = UniformPrior()

    def _featurize(corpus_items):
        out = []
        for it in corpus_items:
            data = standardize(it.data) if standardize_data else it.data
            out.append(build_feature_graph(data, provider))
        return out

    train_fgs = _featurize(train_items)
    test_fgs = _featurize(test_items)
    feat_dir = os.path.join(out_dir, "features")
    os.makedirs(feat_dir, exist_ok=True)
    for it, fg in zip(train_items + test_items, train_fgs + test_fgs):
        save_feature_graph(fg, os.path.join(feat_dir, f"features_{it.index:04d}.txt"))

    corpus = [(fg, gnn.edge_labels_from_dag(it.dag))
              for it, fg in zip(train_items, train_fgs)]
    model_cfg = gnn.ModelConfig(num_layers=cfg["layers"],
                                hidden_dim=cfg["hidden_dim"], seed=seed)
    opt = gnn.OptimizerSettings(learning_rate=lr, epochs=cfg["epochs"])
    params, log = gnn.train(corpus, model_cfg, opt)
    gnn.save_params(params, os.path.join(out_dir, "model.txt"))
    with open(os.path.join(out_dir, "model.txt.log"), "w", encoding="utf-8") as fh:
        for epoch, val in enumerate(log):
            fh.write(f"epoch={epoch} loss={val!r}\n")

    results: dict[str, list[dict]] = {}
    groups = {it.index: it.model for it in test_items}
    for method in METHODS:
        pred_dir = os.path.join(out_dir, f"pred_{method}")
        os.makedirs(pred_dir, exist_ok=True)
        for it, fg in zip(test_items, test_fgs):
            probs, graphs = infer_graphs(params, fg, method, n_infer_samples,
                                         seed + it.index)
            inference.save_edge_probabilities(
                probs, os.path.join(pred_dir, f"probs_{it.index:04d}.txt"))
            if len(graphs) == 1:
                write_edge_list(os.path.join(pred_dir, f"pred_{it.index:04d}.txt"),
                                fg.d, graphs[0].edges)
            else:
                for k, g in enumerate(graphs):
                    write_edge_list(
                        os.path.join(pred_dir, f"pred_{it.index:04d}_s{k:04d}.txt"),
                        fg.d, g.edges)
        records = eval_predictions(pred_dir, test_dir)
        write_report(records, os.path.join(out_dir, f"report_{method}.txt"), groups)
        results[method] = records

    _write_summary(results, groups, os.path.join(out_dir, "summary.txt"))
    return results


def _write_summary(results: dict[str, list[dict]], groups: dict[int, str],
                   path: str) -> None:
    """Table-shaped summary: per graph model, one row per method with
    SHD/d, TPR, FPR mean +- standard error.
    """
    lines = ["model method shd_per_d tpr fpr"]
    for model in sorted(set(groups.values())) + ["ALL"]:
        for method in METHODS:
            recs = results[method]
            if model != "ALL":
                recs = [r for r in recs if groups.get(r["id"]) == model]
            cells = []
            for k in ("shd_per_d", "tpr", "fpr"):
                vals = [r[k] for r in recs if not math.isnan(r[k])]
                if not vals:
                    cells.append("nan")
                    continue
                mean = sum(vals) / len(vals)
                se = 0.0
                if len(vals) > 1:
                    var = sum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
                    se = math.sqrt(var / len(vals))
                cells.append(f"{mean:.4f}+-{se:.4f}")
            lines.append(f"{model} GNN-{method.upper()} " + " ".join(cells))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def cmd_benchmark(args: argparse.Namespace) -> int:
    run_benchmark(args.out, args.seed, preset=args.preset,
                  n_infer_samples=args.samples,
                  standardize_data=args.standardize, lr=args.lr)
    with open(os.path.join(args.out, "summary.txt"), encoding="utf-8") as fh:
        print(fh.read(), end="")
    return 0


def _load_config_defaults(path: str) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for ln in fh:
            ln = ln.strip()
            if not ln or ln.startswith("#"):
                continue
            if "=" not in ln:
                raise ValueError(f"{path}: malformed config line {ln!r}")
            key, val = ln.split("=", 1)
            out[key.strip().replace("-", "_")] = val.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="causalgnn",
        description="Probabilistic causal structure learning pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="key=value config file; flags override")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--nodes", default="10,20,50,100")
    p.add_argument("--edge-mults", default="1,2,4")
    p.add_argument("--samples", default="500,1000,2000")
    p.add_argument("--models", default="ER,SF")
    p.add_argument("--graphs-total", type=int, default=200)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("featurize", help="build feature graphs from data CSVs")
    add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--standardize", action=argparse.BooleanOptionalAction,
                   default=True)
    p.add_argument("--prior", choices=("uniform", "logistic"), default="uniform")
    p.add_argument("--prior-corpus",
                   help="corpus dir (data_*.csv + truth_*.txt) to fit the "
                        "logistic causal-pairs prior")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", help="train the edge classifier")
    add_common(p)
    p.add_argument("--features", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--hidden-dim", type=int, default=64)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--class-weights", choices=("uniform", "inverse-frequency"),
                   default="inverse-frequency")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="extract graphs from a trained model")
    add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True,
                   help="features_*.txt file or directory of them")
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--samples", type=int, default=100,
                   help="sample count for pg/pdag")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    add_common(p)
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest", help="corpus manifest for grouping by model")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("benchmark", help="end-to-end synth/train/infer/eval run")
    add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--preset", choices=tuple(PRESETS), default="desk")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--standardize", action=argparse.BooleanOptionalAction,
                   default=True)
    p.add_argument("--lr", type=float, default=1e-3)
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args, _ = parser.parse_known_args(argv)
    if getattr(args, "config", None):
        try:
            defaults = _load_config_defaults(args.config)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        sub_actions = parser._subparsers._group_actions[0]  # type: ignore[union-attr]
        sp = sub_actions.choices[args.command]
        converted = {}
        for action in sp._actions:
            if action.dest in defaults:
                raw = defaults[action.dest]
                if isinstance(action, argparse.BooleanOptionalAction):
                    converted[action.dest] = raw.lower() in ("1", "true", "yes")
                elif action.type is not None:
                    converted[action.dest] = action.type(raw)
                else:
                    converted[action.dest] = raw
        sp.set_defaults(**converted)
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # structured error, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
