"""Command-line entry point.

Exit codes: 0 success, 1 internal error, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from pathlib import Path

from .fidelity import fidelity_report
from .graph import GraphValidationError, NodeMap, read_graphs, write_graphs
from .ingest import IngestError
from .metrics import CSV_COLUMNS
from .pipeline import (ConfigError, PipelineConfig, ReportError, StageError, evaluate_model,
                       evaluate_ranker, ingest_dataset, load_split, make_split, report,
                       run_pipeline, train_graphs)
from .recommender import ModelParams, RandomRanker, TopPop, train
from .samplers import SamplerKind, sample_pipeline

logger = logging.getLogger("recsample")

INPUT_ERRORS = (ConfigError, IngestError, GraphValidationError, FileNotFoundError, ReportError,
                json.JSONDecodeError)


def _add_config_flags(parser: argparse.ArgumentParser, skip=()):
    parser.add_argument("--config", help="flat 'key = value' config file")
    group = parser.add_argument_group("config overrides")
    for key in PipelineConfig.keys():
        if key in skip:
            continue
        flags = [f"--{key}"]
        if "_" in key:
            flags.append(f"--{key.replace('_', '-')}")
        group.add_argument(*flags, dest=f"cfg_{key}", default=None, metavar=key.upper())


def _config(args, **forced) -> PipelineConfig:
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}
    overrides.update(forced)
    if args.config:
        return PipelineConfig.from_file(args.config, overrides)
    return PipelineConfig.from_mapping(overrides)


def _write_json(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=1))


def cmd_ingest(args):
    config = _config(args)
    cg, kg, info = ingest_dataset(config)
    write_graphs(args.out, cg, kg, extra={"ingest": info})
    print(json.dumps(info["counts"]))


def cmd_split(args):
    config = _config(args)
    bundle = read_graphs(args.input)
    split = make_split(bundle.cg, config)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    split.save(args.out)
    if args.train_out:
        tcg, tkg, tmap = train_graphs(split, bundle.kg)
        write_graphs(args.train_out, tcg, tkg, tmap)
    print(json.dumps({"train_edges": len(split.train_edges), "val_users": len(split.val),
                      "test_users": len(split.test)}))


def cmd_sample(args):
    config = _config(args)
    bundle = read_graphs(args.input)
    spec = config.sample_spec(SamplerKind(args.method), args.ratio, args.seed)
    result = sample_pipeline(bundle.cg, bundle.kg, spec)
    extra = {"kg_node_map": result.kg_map.to_json()}
    if bundle.node_map is not None:
        extra["reference_node_map"] = result.cg_map.then(bundle.node_map).to_json()
    write_graphs(args.out, result.cg_sample, result.kg_sample, result.cg_map, extra=extra)
    summary = result.summary()
    _write_json(Path(args.out) / "sample.json", summary)
    print(json.dumps({k: summary[k] for k in ("achieved_ratio_cg", "achieved_ratio_kg", "wall_seconds")}))


def cmd_fidelity(args):
    original = read_graphs(args.original)
    sample = read_graphs(args.sample)
    kg_map = sample.extra.get("kg_node_map")
    rep = fidelity_report((original.cg, original.kg), (sample.cg, sample.kg),
                          NodeMap.from_json(kg_map) if kg_map else None)
    _write_json(args.out, rep.to_json())
    print(json.dumps(rep.d_statistics))


def _reference_map(bundle) -> NodeMap | None:
    ref = bundle.extra.get("reference_node_map")
    return NodeMap.from_json(ref) if ref else bundle.node_map


def cmd_train(args):
    config = _config(args)
    bundle = read_graphs(args.input)
    tconf = config.train_config(args.seed)
    t0 = time.perf_counter()
    result = train(bundle.cg, tconf, _reference_map(bundle))
    seconds = time.perf_counter() - t0
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    result.params.save(args.out, tconf, {"loss_trace": result.loss_trace, "train_seconds": seconds})
    print(json.dumps({"train_seconds": seconds, "final_loss": result.loss_trace[-1] if result.loss_trace else None}))


def cmd_evaluate(args):
    config = _config(args)
    split = load_split(args.data, args.split)
    if args.method == "inmo":
        if not args.model:
            raise ConfigError("--model is required for method inmo")
        metrics = evaluate_model(ModelParams.load(args.model), split, config.window, config.ks)
    elif args.method == "toppop":
        metrics = evaluate_ranker(TopPop(split.train).rank, split, config.window, config.ks)
    else:
        ranker = RandomRanker(split.graph.num_items, args.random_seed)
        metrics = evaluate_ranker(ranker.rank, split, config.window, config.ks)
    _write_json(args.out, metrics.to_json())
    print(json.dumps({f"{m}@{k}" if k else m: round(v, 6) for (m, k), v in sorted(
        metrics.means.items(), key=lambda kv: (kv[0][0], kv[0][1] or 0))}))


def cmd_pipeline(args):
    config = _config(args)
    result = run_pipeline(config)
    summary = report(result.workdir)
    print(json.dumps({"workdir": str(result.workdir), "runs": len(result.records),
                      "report": str(result.workdir / "report.csv"), "skipped": summary["skipped"]}))


def cmd_report(args):
    summary = report(args.workdir)
    print(json.dumps({"records": summary["records"], "skipped": summary["skipped"],
                      "columns": list(CSV_COLUMNS)}))
    if summary["skipped"]:
        print(f"warning: skipped {summary['skipped']} corrupt record(s)", file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="recsample",
                                     description="Graph sampling benchmark for inductive recommenders.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load ratings (+KG) or generate synthetic data")
    p.add_argument("--out", required=True, help="output graph directory")
    _add_config_flags(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("split", help="temporal split with per-user context/targets")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True, help="split.json path")
    p.add_argument("--train-out", help="also write the compacted train graph here")
    _add_config_flags(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("sample", help="sample a CG (+KG) graph directory")
    p.add_argument("--method", required=True, choices=[k.value for k in SamplerKind])
    p.add_argument("--ratio", required=True, type=float)
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("fidelity", help="degree/time fidelity of a sample")
    p.add_argument("--original", required=True)
    p.add_argument("--sample", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fidelity)

    p = sub.add_parser("train", help="train the recommender on a graph directory")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--out", required=True, help="checkpoint path (.npz)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="rank all items for held-out users")
    p.add_argument("--data", required=True, help="full graph directory the split refers to")
    p.add_argument("--split", required=True)
    p.add_argument("--model")
    p.add_argument("--method", choices=("inmo", "toppop", "random"), default="inmo")
    p.add_argument("--random-seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pipeline", help="run the whole grid and write the report")
    _add_config_flags(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("report", help="consolidate run records into CSV + JSON")
    p.add_argument("--workdir", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def _is_input_error(exc: BaseException) -> bool:
    if isinstance(exc, StageError):
        return _is_input_error(exc.cause)
    return isinstance(exc, INPUT_ERRORS)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except Exception as exc:
        code = 2 if _is_input_error(exc) else 1
        print(f"error: {exc}", file=sys.stderr)
        if code == 1:
            logger.debug("internal error", exc_info=True)
        return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
