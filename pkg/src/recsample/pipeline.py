"""End-to-end orchestration: ingest, split, sample, fidelity, train, evaluate, report.

Workdir layout::

    data/                      ingested graphs (reference index space)
    split.json                 train edges and per-user context/target edges
    train/                     compacted train graph, node map into data/
    toppop/metrics.json
    baseline/seed<S>/          model, metrics and record of the full-data run
    runs/<kind>_<ratio>_seed<S>/
        sample/  sample.json  fidelity.json  model.npz  metrics.json  run.json
    report.csv  summary.json
"""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fidelity import fidelity_report
from .graph import CollabGraph, KnowledgeGraph, NodeMap, read_graphs, write_graphs
from .ingest import (EvaluationSplit, SplitRatios, SyntheticSpec, align_kg, compact,
                     filter_min_activity, generate_synthetic, holdout_context, load_ratings,
                     load_triples, restrict_to_kg_items, temporal_split)
from .metrics import CSV_COLUMNS, MetricsReport, evaluate_rankings, relative_delta
from .recommender import InductiveScorer, ModelParams, RandomRanker, TopPop, TrainConfig, train
from .samplers import SamplerKind, SampleSpec, sample_pipeline

logger = logging.getLogger(__name__)

RECORD_VERSION = 1
METHOD = "inmo"
TIME_METRIC = "train_seconds"


class ConfigError(ValueError):
    """Invalid configuration or unreadable input (exit code 2)."""


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


class ReportError(ValueError):
    pass


def _floats(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(float(x) for x in text)
    return tuple(float(x) for x in str(text).replace(",", " ").split())


def _ints(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(int(x) for x in text)
    return tuple(int(x) for x in str(text).replace(",", " ").split())


def _words(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(str(x).strip().lower() for x in text)
    return tuple(w.lower() for w in str(text).replace(",", " ").split())


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


@dataclass
class PipelineConfig:
    """Flat configuration; every field is a ``key = value`` line of a config file.

    List fields take comma- or space-separated values. ``ffb_mean = 0``
    derives the FFB burn-count mean from ``p_f``/``p_b``. ``grid`` (pairs such
    as ``ts:0.5 ff:0.1``) replaces the ``samplers`` x ``ratios`` product
    when set.
    """

    workdir: str = "work"
    dataset: str = "files"
    ratings: str = ""
    kg: str = ""
    links: str = ""
    dedup_policy: str = "latest"
    min_ratings: int = 5
    min_span_days: float = 5.0
    day_unit: float = 86_400.0
    synthetic_users: int = 200
    synthetic_items: int = 100
    synthetic_edges_per_user: int = 10
    synthetic_clusters: int = 2
    synthetic_noise: float = 0.05
    synthetic_degree_exponent: float = 0.0
    synthetic_seed: int = 0
    split_train: float = 0.8
    split_val: float = 0.1
    split_test: float = 0.1
    context_fraction: float = 0.5
    window: str = "test"
    samplers: tuple = tuple(k.value for k in SamplerKind)
    ratios: tuple = (0.05, 0.1, 0.2, 0.5, 1.0)
    grid: tuple = ()
    seeds: tuple = (0, 1, 2)
    ks: tuple = (10, 20)
    p_f: float = 0.35
    p_b: float = 0.2
    p_c: float = 0.15
    walk_len: int = 10
    walks_per_node: int = 1
    ffb_mean: float = 0.0
    dim: int = 64
    layers: int = 2
    norm_exponent: float = 1.0
    key_fraction: float = 1.0
    learning_rate: float = 10.0
    epochs: int = 30
    batch_size: int = 64
    self_loss_weight: float = 0.1
    negatives_per_positive: int = 1
    with_random: bool = False

    _LISTS = {"samplers": _words, "ratios": _floats, "seeds": _ints, "ks": _ints, "grid": _words}

    def __post_init__(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.name in self._LISTS:
                value = self._LISTS[f.name](value)
            elif f.type == "int":
                value = int(value)
            elif f.type == "float":
                value = float(value)
            elif f.type == "bool":
                value = _bool(value)
            else:
                value = str(value)
            setattr(self, f.name, value)
        self.validate()

    def validate(self):
        if self.dataset not in ("files", "synthetic"):
            raise ConfigError(f"dataset must be 'files' or 'synthetic', got {self.dataset!r}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if not self.ks or min(self.ks) < 1:
            raise ConfigError("ks must be positive")
        if self.window not in ("val", "test"):
            raise ConfigError("window must be 'val' or 'test'")
        for kind, ratio in self.cells():
            if not 0 < ratio <= 1:
                raise ConfigError(f"ratio {ratio} outside (0, 1]")
        try:
            self.split_ratios()
            self.train_config(0)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def keys(cls) -> list:
        return [f.name for f in dataclasses.fields(cls)]

    @classmethod
    def from_mapping(cls, data: dict) -> "PipelineConfig":
        known = set(cls.keys())
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        try:
            return cls(**data)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    @staticmethod
    def parse_text(text: str, source: str = "<config>") -> dict:
        data = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            data[key] = value
        return data

    @classmethod
    def from_file(cls, path, overrides: dict | None = None) -> "PipelineConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        data = cls.parse_text(path.read_text(), str(path))
        data.update(overrides or {})
        return cls.from_mapping(data)

    def to_json(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(self).items()}

    def cells(self) -> list:
        """``(kind, ratio)`` pairs of the sampler grid, in a fixed order."""
        if self.grid:
            out = []
            for item in self.grid:
                kind, _, ratio = item.partition(":")
                if not ratio:
                    raise ConfigError(f"grid entry {item!r} must look like kind:ratio")
                out.append((_kind(kind), float(ratio)))
            return out
        return [(_kind(k), float(r)) for k in self.samplers for r in self.ratios]

    def split_ratios(self) -> SplitRatios:
        return SplitRatios(self.split_train, self.split_val, self.split_test)

    def synthetic_spec(self) -> SyntheticSpec:
        return SyntheticSpec(self.synthetic_users, self.synthetic_items, self.synthetic_edges_per_user,
                             self.synthetic_clusters, self.synthetic_noise,
                             self.synthetic_degree_exponent, seed=self.synthetic_seed)

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(dim=self.dim, layers=self.layers, norm_exponent=self.norm_exponent,
                           key_fraction=self.key_fraction, learning_rate=self.learning_rate,
                           epochs=self.epochs, batch_size=self.batch_size,
                           self_loss_weight=self.self_loss_weight,
                           negatives_per_positive=self.negatives_per_positive, seed=seed)

    def sample_spec(self, kind, ratio: float, seed: int) -> SampleSpec:
        return SampleSpec(kind, ratio, p_f=self.p_f, p_b=self.p_b, p_c=self.p_c,
                          walk_len=self.walk_len, walks_per_node=self.walks_per_node, seed=seed,
                          ffb_mean=self.ffb_mean or None)


def _kind(name: str) -> SamplerKind:
    try:
        return SamplerKind(name.strip().lower())
    except ValueError:
        raise ConfigError(f"unknown sampler {name!r}") from None


# -- stages ---------------------------------------------------------------


def ingest_dataset(config: PipelineConfig):
    """Load or generate the dataset and apply the activity filter.

    Returns ``(cg, kg, info)``; the KG is keyed to the filtered CG's items.
    """
    if config.dataset == "synthetic":
        cg, kg = generate_synthetic(config.synthetic_spec())
        info = {"source": "synthetic", "spec": dataclasses.asdict(config.synthetic_spec())}
    else:
        if not config.ratings:
            raise ConfigError("no ratings path configured")
        for label, path in (("ratings", config.ratings), ("kg", config.kg), ("links", config.links)):
            if path and not Path(path).is_file():
                raise ConfigError(f"{label} file not found: {path}")
        ratings = load_ratings(config.ratings, config.dedup_policy)
        cg = ratings.graph
        info = {"source": "files", "ratings": config.ratings, "kg": config.kg or None,
                "duplicates": ratings.duplicates}
        if config.kg:
            loaded = load_triples(config.kg, ratings.item_ids, config.links or None)
            kg = loaded.graph
            cg, kmap = restrict_to_kg_items(cg, kg)
            kg = align_kg(kg, kmap)
        else:
            kg = KnowledgeGraph.empty()
    cg, fmap = filter_min_activity(cg, config.min_ratings, config.min_span_days, config.day_unit)
    kg = align_kg(kg, fmap)
    if cg.num_edges == 0:
        raise ConfigError("no interactions survive the activity filter")
    info["counts"] = {"users": cg.num_users, "items": cg.num_items, "edges": cg.num_edges,
                      "entities": kg.num_entities, "triples": kg.num_triples}
    return cg, kg, info


def make_split(cg: CollabGraph, config: PipelineConfig) -> EvaluationSplit:
    return holdout_context(temporal_split(cg, config.split_ratios()), config.context_fraction)


def train_graphs(split: EvaluationSplit, kg: KnowledgeGraph):
    """Compacted train CG, its KG, and the node map back to the full index space."""
    cg, nmap = compact(split.train)
    return cg, align_kg(kg, nmap), nmap


def evaluate_ranker(rank_fn, split: EvaluationSplit, window: str, ks) -> MetricsReport:
    """``rank_fn(user, exclude)`` returns a ranking; context and train items are excluded."""
    graph = split.inference_graph(window)
    holdouts = split.window(window)
    rankings, relevant = {}, {}
    for user in sorted(holdouts):
        rankings[user] = rank_fn(user, graph.user_items(user)).items
        relevant[user] = frozenset(split.graph.items[holdouts[user].target].tolist())
    report = evaluate_rankings(rankings, relevant, split.graph.num_items, ks)
    report.excluded_users = sorted(set(report.excluded_users) | set(
        split.excluded_val if window == "val" else split.excluded_test))
    return report


def evaluate_model(params: ModelParams, split: EvaluationSplit, window: str, ks) -> MetricsReport:
    scorer = InductiveScorer(params, split.inference_graph(window))
    return evaluate_ranker(scorer.rank, split, window, ks)


def metric_deltas(report: MetricsReport, baseline: MetricsReport) -> dict:
    return {key: relative_delta(value, baseline.means.get(key)) for key, value in report.means.items()}


# -- records ----------------------------------------------------------------


@dataclass
class RunRecord:
    method: str
    sampler: str
    ratio: float
    seed: int
    config: dict
    stage_seconds: dict
    achieved_ratio_cg: float
    achieved_ratio_kg: float
    fidelity_path: str | None
    metrics_path: str
    model_path: str
    metrics: dict
    deltas: dict
    time_delta: float | None
    baseline: bool = False
    version: int = RECORD_VERSION
    extra: dict = field(default_factory=dict)

    @property
    def train_seconds(self) -> float:
        return self.stage_seconds.get("train", float("nan"))

    def metrics_report(self) -> MetricsReport:
        return MetricsReport.from_json(self.metrics)

    def to_json(self) -> dict:
        data = dataclasses.asdict(self)
        data["deltas"] = [{"metric": m, "k": k, "delta": d} for (m, k), d in sorted(
            self.deltas.items(), key=lambda kv: (kv[0][0], kv[0][1] or 0))]
        return data

    @classmethod
    def from_json(cls, data: dict) -> "RunRecord":
        data = dict(data)
        if data.get("version") != RECORD_VERSION:
            raise ValueError(f"unsupported record version {data.get('version')}")
        data["deltas"] = {(row["metric"], row["k"]): row["delta"] for row in data["deltas"]}
        return cls(**data)

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json(), indent=1))

    @classmethod
    def load(cls, path) -> "RunRecord":
        return cls.from_json(json.loads(Path(path).read_text()))


def run_dir(workdir: Path, kind: SamplerKind, ratio: float, seed: int) -> Path:
    return workdir / "runs" / f"{kind.value}_{ratio:g}_seed{seed}"


@dataclass
class PipelineResult:
    records: list
    baselines: dict
    toppop: MetricsReport
    workdir: Path


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (ConfigError, StageError):
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def _train_and_eval(out: Path, cg: CollabGraph, nmap: NodeMap, tconf: TrainConfig,
                    split: EvaluationSplit, config: PipelineConfig):
    t0 = time.perf_counter()
    result = _stage("train", train, cg, tconf, nmap)
    train_seconds = time.perf_counter() - t0
    result.params.save(out / "model.npz", tconf, {"loss_trace": result.loss_trace})
    t0 = time.perf_counter()
    metrics = _stage("evaluate", evaluate_model, result.params, split, config.window, config.ks)
    eval_seconds = time.perf_counter() - t0
    (out / "metrics.json").write_text(json.dumps(metrics.to_json(), indent=1))
    return metrics, {"train": train_seconds, "evaluate": eval_seconds}, result.loss_trace


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    """Run every grid cell for every seed.

    The full-data baseline is trained once per seed and shared by all
    ratio-1 cells, so their deltas are exactly zero.
    """
    workdir = Path(config.workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    (workdir / "config.json").write_text(json.dumps(config.to_json(), indent=1))

    cg, kg, info = _stage("ingest", ingest_dataset, config)
    write_graphs(workdir / "data", cg, kg, extra={"ingest": info})
    split = _stage("split", make_split, cg, config)
    split.save(workdir / "split.json")
    tcg, tkg, tmap = _stage("split", train_graphs, split, kg)
    write_graphs(workdir / "train", tcg, tkg, tmap)

    toppop = evaluate_ranker(TopPop(split.train).rank, split, config.window, config.ks)
    (workdir / "toppop").mkdir(exist_ok=True)
    (workdir / "toppop" / "metrics.json").write_text(json.dumps(toppop.to_json(), indent=1))
    if config.with_random:
        rnd = evaluate_ranker(RandomRanker(split.graph.num_items, 0).rank, split, config.window, config.ks)
        (workdir / "random").mkdir(exist_ok=True)
        (workdir / "random" / "metrics.json").write_text(json.dumps(rnd.to_json(), indent=1))

    echo = config.to_json()
    baselines = {}
    for seed in config.seeds:
        out = workdir / "baseline" / f"seed{seed}"
        out.mkdir(parents=True, exist_ok=True)
        metrics, seconds, trace = _train_and_eval(out, tcg, tmap, config.train_config(seed), split, config)
        record = RunRecord(METHOD, "none", 1.0, seed, echo, seconds, 1.0, 1.0, None,
                           str(out / "metrics.json"), str(out / "model.npz"), metrics.to_json(),
                           {key: 0.0 for key in metrics.means}, 0.0, baseline=True,
                           extra={"loss_trace": trace})
        record.save(out / "run.json")
        baselines[seed] = record

    records = []
    for kind, ratio in config.cells():
        for seed in config.seeds:
            base = baselines[seed]
            out = run_dir(workdir, kind, ratio, seed)
            out.mkdir(parents=True, exist_ok=True)
            if ratio >= 1:
                record = dataclasses.replace(base, sampler=kind.value, baseline=False,
                                             extra={**base.extra, "shared_baseline": True})
            else:
                record = _sampled_run(out, kind, ratio, seed, tcg, tkg, tmap, split, config, base, echo)
            record.save(out / "run.json")
            records.append(record)
            logger.info("%s ratio=%g seed=%d done", kind.value, ratio, seed)
    return PipelineResult(records, baselines, toppop, workdir)


def _sampled_run(out: Path, kind, ratio, seed, tcg, tkg, tmap, split, config, base: RunRecord, echo):
    spec = config.sample_spec(kind, ratio, seed)
    sample = _stage("sample", sample_pipeline, tcg, tkg, spec)
    smap = sample.cg_map.then(tmap)
    write_graphs(out / "sample", sample.cg_sample, sample.kg_sample, sample.cg_map,
                 extra={"reference_node_map": smap.to_json(), "kg_node_map": sample.kg_map.to_json()})
    (out / "sample.json").write_text(json.dumps(sample.summary(), indent=1))
    t0 = time.perf_counter()
    fid = _stage("fidelity", fidelity_report, (tcg, tkg), (sample.cg_sample, sample.kg_sample),
                 sample.kg_map)
    fid_seconds = time.perf_counter() - t0
    (out / "fidelity.json").write_text(json.dumps(fid.to_json(), indent=1))
    metrics, seconds, trace = _train_and_eval(out, sample.cg_sample, smap, config.train_config(seed),
                                              split, config)
    seconds = {"sample_cg": sample.cg_seconds, "sample_kg": sample.kg_seconds,
               "fidelity": fid_seconds, **seconds}
    return RunRecord(METHOD, kind.value, ratio, seed, echo, seconds, sample.achieved_ratio_cg,
                     sample.achieved_ratio_kg, str(out / "fidelity.json"), str(out / "metrics.json"),
                     str(out / "model.npz"), metrics.to_json(),
                     metric_deltas(metrics, base.metrics_report()),
                     relative_delta(seconds["train"], base.train_seconds),
                     extra={"loss_trace": trace})


# -- report -------------------------------------------------------------------


def report(workdir) -> dict:
    """Write ``report.csv`` and ``summary.json`` from the run records in ``workdir``.

    Corrupt records are skipped and counted. Returns the summary.
    """
    workdir = Path(workdir)
    paths = sorted((workdir / "runs").glob("*/run.json")) if (workdir / "runs").is_dir() else []
    records, skipped = [], 0
    for path in paths:
        try:
            records.append(RunRecord.load(path))
        except (ValueError, KeyError, TypeError) as exc:
            logger.warning("skipping corrupt record %s: %s", path, exc)
            skipped += 1
    if not records:
        raise ReportError(f"no readable run records under {workdir}")

    rows = []
    for rec in records:
        rows.extend(rec.metrics_report().rows(rec.method, rec.sampler, rec.ratio, rec.seed, rec.deltas))
        rows.append({"method": rec.method, "sampler": rec.sampler, "ratio": rec.ratio, "seed": rec.seed,
                     "metric": TIME_METRIC, "k": "", "value": rec.train_seconds,
                     "delta": rec.time_delta})
    toppop_path = workdir / "toppop" / "metrics.json"
    if toppop_path.is_file():
        tp = MetricsReport.from_json(json.loads(toppop_path.read_text()))
        rows.extend(tp.rows("toppop", "none", 1.0, "", None))
    with open(workdir / "report.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: "" if row[k] is None else row[k] for k in CSV_COLUMNS})

    groups: dict = {}
    for row in rows:
        key = (row["method"], row["sampler"], row["ratio"], row["metric"], row["k"])
        groups.setdefault(key, []).append(row)
    cells = []
    for (method, sampler, ratio, metric, k), items in sorted(groups.items(), key=lambda kv: str(kv[0])):
        values = np.array([r["value"] for r in items], dtype=float)
        deltas = [r["delta"] for r in items if r["delta"] is not None]
        cells.append({
            "method": method, "sampler": sampler, "ratio": ratio, "metric": metric, "k": k,
            "n": len(values),
            "mean": float(values.mean()),
            "std": float(values.std(ddof=1)) if len(values) > 1 else None,
            "delta_mean": float(np.mean(deltas)) if deltas else None,
        })
    summary = {"records": len(records), "skipped": skipped, "cells": cells}
    (workdir / "summary.json").write_text(json.dumps(summary, indent=1))
    return summary


def load_split(data_dir, split_path) -> EvaluationSplit:
    bundle = read_graphs(data_dir)
    return EvaluationSplit.from_json(bundle.cg, json.loads(Path(split_path).read_text()))
