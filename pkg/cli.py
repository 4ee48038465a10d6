#!/usr/bin/env python3
"""
Command-line front end for TrajKernel

Subcommands: gen, embed, detect, subtraj, mine, eval, bench. Exit codes are
0 on success, 1 on validation, configuration or usage errors and 2 on I/O
errors. Diagnostics go to stderr; results go to files and stdout.
"""

import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional

from anomaly import DetectorParams, auto_search, detect, read_score_file
from config import (
    DETECTOR_CONFIG,
    KERNEL_CONFIG,
    MINING_CONFIG,
    NYSTROM_CONFIG,
    DATASET_PRESETS,
    PERFORMANCE_CONFIG,
    SUBTRAJ_CONFIG,
    setup_logging,
)
from embedding import SchemeParams, embed_trajectories, export_embeddings, save_model
from evaluation import jaccard_spans, roc_auc, scaleup_bench
from patterns import mine_patterns
from subtrajectory import detect_subtraj, ground_truth_labeler
from synthgen import GENERATOR_KINDS, GeneratorSpec, gen_cross_style, gen_separable_singleton, generate
from trajectory import (
    IngestionOptions,
    LabeledDataset,
    load_clusters,
    load_dataset,
    load_labels,
    normalize,
    save_dataset,
    scale_like,
)
from utils import ConfigurationError, ParameterError, TrajKernelError, export_results_to_json, import_results_from_json

logger = logging.getLogger("trajkernel")

# keys that never reach the recorded run configuration
UNRECORDED = {"workers", "config", "log_level", "command"}


class UsageError(TrajKernelError):
    """Bad command line."""


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file mirroring the flags; flags override it")
    parser.add_argument("--workers", type=int, default=PERFORMANCE_CONFIG["workers"],
                        help="parallel workers, 0 = all cores")
    parser.add_argument("--log-level", default=None, help="logging level (default from LOG_LEVEL)")
    parser.add_argument("--seed", type=int, default=KERNEL_CONFIG["seed"])


def _data_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", required=True, help="trajectory CSV or JSON")
    parser.add_argument("--labels", default=None, help="(id, label) CSV")
    parser.add_argument("--no-normalize", action="store_true", help="keep raw coordinates")
    parser.add_argument("--include-time", action="store_true", help="use time as an extra dimension")
    parser.add_argument("--preset", choices=sorted(DATASET_PRESETS), default=None,
                        help="named per-dataset parameter settings")


def _kernel_flags(parser: argparse.ArgumentParser, cells: str = KERNEL_CONFIG["cells"]) -> None:
    parser.add_argument("--psi", type=int, default=KERNEL_CONFIG["psi"])
    parser.add_argument("--t", type=int, default=KERNEL_CONFIG["t"])
    parser.add_argument("--cells", choices=["voronoi", "ball"], default=cells)


def _scheme_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scheme", choices=DETECTOR_CONFIG["schemes"], default=DETECTOR_CONFIG["scheme"])
    _kernel_flags(parser)
    parser.add_argument("--sigma", type=float, default=NYSTROM_CONFIG["sigma"])
    parser.add_argument("--components", type=int, default=NYSTROM_CONFIG["n_components"])


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="trajkernel", description="Distributional-kernel trajectory mining")
    sub = parser.add_subparsers(dest="command", parser_class=ArgumentParser)
    sub.required = True

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    _common(p)
    p.add_argument("--kind", choices=GENERATOR_KINDS, required=True)
    p.add_argument("--n", type=int, default=None, help="trajectory count where the kind takes one")
    p.add_argument("--separation", type=float, default=5.0)
    p.add_argument("--anomaly-fraction", type=float, default=0.02)
    p.add_argument("--out", required=True)

    p = sub.add_parser("embed", help="export kernel mean maps")
    _common(p)
    _data_flags(p)
    _scheme_flags(p)
    p.add_argument("--out", required=True, help="CSV or .npz")
    p.add_argument("--model-out", default=None, help="save the fitted feature map (JSON or .npz)")

    p = sub.add_parser("detect", help="rank trajectories by anomalousness")
    _common(p)
    _data_flags(p)
    _scheme_flags(p)
    p.add_argument("--detector", choices=DETECTOR_CONFIG["detectors"], default=DETECTOR_CONFIG["detector"])
    p.add_argument("--k", type=int, default=DETECTOR_CONFIG["lof_k"])
    p.add_argument("--psi2", type=int, default=None)
    p.add_argument("--t2", type=int, default=None)
    p.add_argument("--cells2", choices=["voronoi", "ball"], default=DETECTOR_CONFIG["cells2"])
    p.add_argument("--sigma2", type=float, default=None)
    p.add_argument("--components2", type=int, default=None)
    p.add_argument("--search", action="store_true", help="grid-search parameters by ROC-AUC")
    p.add_argument("--score-file", default=None, help="rank external (id, score) scores instead")
    p.add_argument("--polarity", choices=["similarity", "anomaly"], default=None)
    p.add_argument("--out", default=None, help="ranking CSV (id, score, rank)")

    p = sub.add_parser("subtraj", help="find anomalous sub-trajectories of a query")
    _common(p)
    _data_flags(p)
    _kernel_flags(p, cells=SUBTRAJ_CONFIG["cells"])
    p.add_argument("--query", required=True, help="query trajectory id")
    p.add_argument("--query-data", default=None, help="file holding the query (default: --data)")
    p.add_argument("--tau", type=float, default=SUBTRAJ_CONFIG["tau"])
    p.add_argument("--min-len", type=int, default=SUBTRAJ_CONFIG["min_len"])
    p.add_argument("--radius", type=float, default=SUBTRAJ_CONFIG["radius"])
    p.add_argument("--truth", action="store_true", help="also label by radius and report the Jaccard index")
    p.add_argument("--out", required=True, help="JSON report")
    p.add_argument("--plot-out", default=None, help="per-point CSV")

    p = sub.add_parser("mine", help="mine frequent sub-trajectory patterns")
    _common(p)
    _data_flags(p)
    _kernel_flags(p)
    p.add_argument("--clusters", default=None, help="(id, cluster) CSV")
    p.add_argument("--gamma", type=float, default=MINING_CONFIG["gamma"])
    p.add_argument("--min-len", type=int, default=MINING_CONFIG["min_len"])
    p.add_argument("--out", required=True, help="JSON patterns")

    p = sub.add_parser("eval", help="ROC-AUC of a ranking against labels")
    _common(p)
    p.add_argument("--ranking", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--polarity", choices=["similarity", "anomaly"], default=None)
    p.add_argument("--out", default=None, help="JSON report")

    p = sub.add_parser("bench", help="scaleup timing of prep and detect phases")
    _common(p)
    p.add_argument("--kind", choices=["cross-style", "separable-singleton"], default="cross-style")
    p.add_argument("--sizes", type=int, nargs="+", default=[100, 1000])
    p.add_argument("--methods", nargs="+", default=["ik-idk2", "dtw-lof"])
    p.add_argument("--repeats", type=int, default=PERFORMANCE_CONFIG["bench_repeats"])
    p.add_argument("--out", required=True, help="CSV (method, n, prep, detect)")
    parser.commands = sub.choices
    return parser


def parse_args(argv: List[str]) -> argparse.Namespace:
    """Parse argv with defaults < preset < config file < flags."""
    parser = build_parser()
    args = parser.parse_args(argv)
    sub = parser.commands[args.command]
    known = {a.dest for a in sub._actions}

    layered: Dict[str, Any] = {}
    if getattr(args, "preset", None):
        layered.update({k: v for k, v in DATASET_PRESETS[args.preset].items() if k in known})
    if args.config:
        values = import_results_from_json(args.config)
        if not isinstance(values, dict):
            raise ConfigurationError(f"{args.config}: expected a JSON object")
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigurationError(f"{args.config}: unknown setting(s) {unknown}")
        layered.update(values)
    if layered:
        sub.set_defaults(**layered)
        args = parser.parse_args(argv)
    return args


def run_config(args: argparse.Namespace) -> Dict[str, Any]:
    """The resolved configuration recorded in result files."""
    config = {k: v for k, v in sorted(vars(args).items()) if k not in UNRECORDED}
    config["command"] = args.command
    return config


def _load(args: argparse.Namespace, path: Optional[str] = None) -> LabeledDataset:
    dataset = load_dataset(path or args.data, options=IngestionOptions(include_time=args.include_time))
    if getattr(args, "labels", None):
        dataset = dataset.with_labels(load_labels(args.labels))
    if not args.no_normalize:
        dataset = normalize(dataset, include_time=args.include_time)
    return dataset


def _scheme(args: argparse.Namespace) -> SchemeParams:
    return SchemeParams(scheme=args.scheme, psi=args.psi, t=args.t, cells=args.cells,
                        n_components=args.components, sigma=args.sigma, seed=args.seed)


def _emit(summary: Dict[str, Any]) -> None:
    sys.stdout.write(json.dumps(summary, sort_keys=True) + "\n")


def cmd_gen(args: argparse.Namespace) -> None:
    spec = GeneratorSpec(kind=args.kind, seed=args.seed, n=args.n, separation=args.separation,
                         anomaly_fraction=args.anomaly_fraction)
    dataset = generate(spec)
    save_dataset(dataset, args.out)
    _emit({"out": args.out, "trajectories": len(dataset), "points": dataset.n_points})


def cmd_embed(args: argparse.Namespace) -> None:
    dataset = _load(args)
    model, embedded = embed_trajectories(dataset, _scheme(args), args.workers)
    export_embeddings(embedded, args.out, run_config(args))
    if args.model_out:
        save_model(model, args.model_out)
    _emit({"out": args.out, "trajectories": len(embedded), "dim": embedded.dim, "scheme": embedded.scheme})


def cmd_detect(args: argparse.Namespace) -> None:
    config = run_config(args)
    if args.score_file:
        ranking = read_score_file(args.score_file, args.polarity)
        labels = load_labels(args.labels) if args.labels else load_dataset(args.data).labels
    else:
        dataset = _load(args)
        labels = dataset.labels
        level1 = _scheme(args)
        if args.search:
            result = auto_search(dataset, args.detector, level1, workers=args.workers)
            ranking = result.ranking
            config["search"] = {"best": result.best_params, "auc": result.best_auc}
        else:
            params = DetectorParams(detector=args.detector, psi2=args.psi2, t2=args.t2, cells2=args.cells2,
                                    sigma2=args.sigma2, n_components2=args.components2, k=args.k)
            ranking = detect(dataset, level1, params, args.workers)

    summary: Dict[str, Any] = {"trajectories": len(ranking), "top": ranking.ranked_ids[:10]}
    if labels is not None:
        summary["auc"] = roc_auc(ranking, labels)
    if args.out:
        ranking.to_csv(args.out, config)
        summary["out"] = args.out
    _emit(summary)


def cmd_subtraj(args: argparse.Namespace) -> None:
    dataset = _load(args)
    if args.query_data:
        # the query file is scaled with the data's record so both share one frame
        query_set = load_dataset(args.query_data)
        query = query_set.get(args.query)
        if not args.no_normalize:
            query = scale_like(query, dataset)
    else:
        query = dataset.get(args.query)

    report = detect_subtraj(dataset, query, args.psi, args.t, args.tau, args.min_len, args.seed, args.cells)
    result = report.to_dict()
    result["config"] = run_config(args)
    summary = {"query_id": query.id, "spans": len(report.spans)}
    if args.truth:
        truth = ground_truth_labeler(dataset, query, args.radius, args.min_len)
        result["truth"] = [span.to_dict() for span in truth]
        result["jaccard"] = jaccard_spans(report.spans, truth, len(query))
        summary["jaccard"] = result["jaccard"]
    export_results_to_json(result, args.out)
    if args.plot_out:
        report.to_plot_csv(query, args.plot_out, run_config(args))
    _emit(summary)


def cmd_mine(args: argparse.Namespace) -> None:
    dataset = _load(args)
    if args.clusters:
        dataset = dataset.with_clusters(load_clusters(args.clusters))
    patterns = mine_patterns(dataset, args.psi, args.t, args.gamma, args.min_len, args.seed, args.cells,
                             args.workers)
    result = patterns.to_dict()
    result["config"] = run_config(args)
    export_results_to_json(result, args.out)
    count, shortest, longest = patterns.summary()
    _emit({"fp": count, "min_length": shortest, "max_length": longest})


def cmd_eval(args: argparse.Namespace) -> None:
    ranking = read_score_file(args.ranking, args.polarity)
    auc = roc_auc(ranking, load_labels(args.labels))
    report = {"metric": "roc_auc", "value": auc, "config": run_config(args)}
    if args.out:
        export_results_to_json(report, args.out)
    _emit({"metric": "roc_auc", "value": auc})


def cmd_bench(args: argparse.Namespace) -> None:
    if args.kind == "cross-style":
        def generator(n, seed):
            return normalize(gen_cross_style(n, seed))
    else:
        def generator(n, seed):
            return normalize(gen_separable_singleton(n, seed))
    report = scaleup_bench(generator, args.sizes, args.methods, args.repeats, args.seed)
    report.to_csv(args.out, run_config(args))
    _emit({"out": args.out, "ratios": report.ratios})


COMMANDS = {
    "gen": cmd_gen,
    "embed": cmd_embed,
    "detect": cmd_detect,
    "subtraj": cmd_subtraj,
    "mine": cmd_mine,
    "eval": cmd_eval,
    "bench": cmd_bench,
}


def run(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand; returns the process exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
        setup_logging(args.log_level)
        if args.workers < 0:
            raise ParameterError(f"--workers must be >= 0, got {args.workers}")
        COMMANDS[args.command](args)
        return 0
    except SystemExit as e:
        # --help
        return int(e.code or 0)
    except TrajKernelError as e:
        logger.error(f"error: {e}")
        return 1
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return 2


if __name__ == "__main__":
    sys.exit(run())
