"""Command-line orchestration: build-network, evaluate, sweep-k, evolve.

Exit codes: 0 success, 1 pipeline failure, 2 configuration error. All
commands read a JSON config file; flags override individual fields. With no
provider endpoints configured, deterministic mocks are used, so repeated
invocations are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import shutil
import sys
from pathlib import Path

from . import causal, evaluation
from .config import PipelineConfig, load_config
from .corpus import Corpus, load_corpus, slice_interval
from .errors import ConfigError, PipelineError, UndefinedMetricError
from .providers import (
    HashEmbedder,
    HttpEmbeddingClient,
    HttpGenerationClient,
    HttpNliClient,
    ScriptedGenerator,
    TokenOverlapNli,
)

log = logging.getLogger(__name__)


def _make_embedder(config: PipelineConfig):
    if config.embedding_url:
        return HttpEmbeddingClient(url=config.embedding_url, api_key=config.api_key)
    return HashEmbedder(dimension=config.embedding_dim, seed=config.seed)


def _make_generator(config: PipelineConfig, seed: int):
    if config.generation_url:
        return HttpGenerationClient(url=config.generation_url, api_key=config.api_key)
    if config.generation_fixture:
        return ScriptedGenerator.from_fixture(config.generation_fixture, seed=seed)
    return ScriptedGenerator(seed=seed)


def _make_nli(config: PipelineConfig):
    if config.nli_url:
        return HttpNliClient(url=config.nli_url, api_key=config.api_key)
    return TokenOverlapNli()


def _load_slice(config: PipelineConfig) -> Corpus:
    corpus = load_corpus(config.manifest, config.text_dir)
    if config.interval is not None:
        corpus = slice_interval(corpus, config.interval)
    return corpus


def _write_run_artifacts(run_dir: Path, result: causal.DiscoveryResult) -> None:
    run_dir.mkdir(parents=True, exist_ok=True)
    causal.write_graph_dot(result.graph, run_dir / "graph.dot")
    causal.write_graph_json(result.graph, run_dir / "graph.json")
    causal.write_candidates_csv(result.candidates, run_dir / "candidates.csv")
    with (run_dir / "reasoning.jsonl").open("w", encoding="utf-8") as fh:
        for record in result.reasoning_records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def cmd_build_network(config: PipelineConfig) -> int:
    config.validate()
    corpus = _load_slice(config)
    embedder = _make_embedder(config)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    run_entries = []
    for r in range(config.runs):
        run_seed = config.seed + r
        run_config = dataclasses.replace(config, seed=run_seed)
        generator = _make_generator(config, run_seed)
        run_dir = out_dir / f"run_{r:03d}"
        try:
            result = causal.discover_network(corpus, run_config, embedder, generator)
            _write_run_artifacts(run_dir, result)
        except Exception:
            # Remove partial outputs so a failed run leaves no half-written dir.
            shutil.rmtree(run_dir, ignore_errors=True)
            raise
        run_entries.append(
            {
                "run_id": f"run_{r:03d}",
                "seed": run_seed,
                "generations": len(result.reasoning_records),
                "edges": len(result.graph.edges),
                "candidates": len(result.candidates),
            }
        )
        log.info("run %03d: %d generations, %d edges", r,
                 len(result.reasoning_records), len(result.graph.edges))

    manifest = {"config": config.to_json_dict(), "runs": run_entries}
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return 0


def _evaluate_run_dir(
    run_dir: Path,
    truth: evaluation.GroundTruthGraph,
    config: PipelineConfig,
    nli,
    seed: int,
    human_scores: dict[str, float],
) -> evaluation.MetricsReport:
    graph = causal.read_graph_json(run_dir / "graph.json")
    counts = evaluation.confusion(graph, truth)
    accuracy, precision, recall, f1 = evaluation.metrics_from_counts(counts)

    if config.auroc_source == "candidates":
        scored = [
            (c.cause, c.effect, c.score)
            for c in causal.read_candidates_csv(run_dir / "candidates.csv")
        ]
    else:
        scored = [(e.cause, e.effect, e.score) for e in graph.edges]
    try:
        auroc_value: float | None = evaluation.auroc(scored, truth)
    except UndefinedMetricError as exc:
        log.warning("run %s: %s", run_dir.name, exc)
        auroc_value = None

    pairs = []
    reasoning_path = run_dir / "reasoning.jsonl"
    if reasoning_path.is_file():
        for line in reasoning_path.read_text(encoding="utf-8").splitlines():
            record = json.loads(line)
            if record["context"] and record["reasoning"]:
                pairs.append((record["context"], record["reasoning"]))
    entailment = evaluation.entailment_rate(pairs, nli) if pairs else None

    return evaluation.MetricsReport(
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1,
        auroc=auroc_value,
        entailment_rate=entailment,
        strategy=config.strategy,
        k=config.k,
        seed=seed,
        interval=config.interval,
        run_id=run_dir.name,
        human_score=human_scores.get(run_dir.name),
    )


def cmd_evaluate(config: PipelineConfig) -> int:
    config.validate()
    if not config.ground_truth:
        raise ConfigError(
            "evaluation requires a ground-truth network; set ground_truth to a "
            "JSON edge-list file of [cause letter, effect letter] pairs"
        )
    truth = evaluation.load_ground_truth(config.ground_truth)
    out_dir = Path(config.out_dir)
    run_dirs = sorted(out_dir.glob("run_*"))
    if not run_dirs:
        raise ConfigError(f"no run_* directories under {out_dir}; build a network first")

    seeds = {d.name: config.seed + i for i, d in enumerate(run_dirs)}
    manifest_path = out_dir / "manifest.json"
    if manifest_path.is_file():
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        seeds.update({r["run_id"]: r["seed"] for r in manifest.get("runs", [])})

    human_scores = (
        evaluation.load_human_scores(config.human_scores) if config.human_scores else {}
    )
    nli = _make_nli(config)
    reports = [
        _evaluate_run_dir(d, truth, config, nli, seeds[d.name], human_scores)
        for d in run_dirs
    ]

    with (out_dir / "metrics.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["run_id", "strategy", "k", "seed", "interval"]
            + list(evaluation.METRIC_FIELDS)
            + ["human_score"]
        )
        for report in reports:
            writer.writerow(
                [report.run_id, report.strategy, report.k, report.seed,
                 report.interval or ""]
                + [_fmt(v) for v in report.metric_values().values()]
                + [_fmt(report.human_score)]
            )

    aggregate = evaluation.aggregate_runs(reports)
    (out_dir / "aggregate.json").write_text(
        json.dumps(
            {
                "mean": aggregate.mean,
                "std": aggregate.std,
                "n_runs": aggregate.n_runs,
                "single_run": aggregate.single_run,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    return 0


def _fmt(value: float | None) -> str:
    return "" if value is None else repr(value)


def cmd_sweep_k(config: PipelineConfig, k_values: list[int]) -> int:
    config.validate()
    if not k_values:
        raise ConfigError("k_values must be non-empty")
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    for k in k_values:
        sub_config = dataclasses.replace(
            config, k=k, out_dir=str(out_dir / f"k_{k:03d}")
        )
        cmd_build_network(sub_config)
        cmd_evaluate(sub_config)
        aggregate = json.loads(
            (Path(sub_config.out_dir) / "aggregate.json").read_text(encoding="utf-8")
        )
        rows.append({"k": k, **aggregate["mean"]})

    with (out_dir / "sweep.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k"] + list(evaluation.METRIC_FIELDS))
        for row in rows:
            writer.writerow(
                [row["k"]] + [_fmt(row[name]) for name in evaluation.METRIC_FIELDS]
            )

    lines = ["k      " + "  ".join(f"{name:>16}" for name in evaluation.METRIC_FIELDS)]
    for row in rows:
        cells = [
            f"{row[name]:>16.4f}" if row[name] is not None else f"{'-':>16}"
            for name in evaluation.METRIC_FIELDS
        ]
        lines.append(f"{row['k']:<6} " + "  ".join(cells))
    (out_dir / "sweep.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return 0


def cmd_evolve(config: PipelineConfig) -> int:
    config.validate()
    corpus = load_corpus(config.manifest, config.text_dir)
    intervals = corpus.intervals_present()
    if len(intervals) < 2:
        raise ConfigError(
            f"evolution needs documents from at least 2 intervals; found {list(intervals)}"
        )

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    embedder = _make_embedder(config)
    graphs: dict[str, causal.CausalGraph] = {}
    for label in intervals:
        interval_config = dataclasses.replace(config, interval=label)
        generator = _make_generator(config, config.seed)
        result = causal.discover_network(
            slice_interval(corpus, label), interval_config, embedder, generator
        )
        interval_dir = out_dir / f"interval_{label}"
        _write_run_artifacts(interval_dir, result)
        graphs[label] = result.graph

    report = evaluation.evolution_report(graphs)
    (out_dir / "evolution.json").write_text(
        json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    (out_dir / "evolution.txt").write_text(report.to_text(), encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ragcausal",
        description="Literature-RAG causal network discovery over the fixed "
        "seven-node biomarker set.",
    )
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--manifest", help="corpus manifest path")
        p.add_argument("--text-dir", dest="text_dir", help="corpus text directory")
        p.add_argument("--out-dir", dest="out_dir", help="output directory")
        p.add_argument("--interval", help="restrict to one publication interval")
        p.add_argument("--strategy", choices=["base", "concat", "split"])
        p.add_argument("--k", type=int, help="retrieved chunks per query")
        p.add_argument("--runs", type=int, help="repetitions per build")
        p.add_argument("--min-support", dest="min_support", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--ground-truth", dest="ground_truth")
        p.add_argument("--generation-fixture", dest="generation_fixture")
        p.add_argument("--eq2-denominator", dest="eq2_denominator",
                       choices=["retrieved", "support"])

    for name in ("build-network", "evaluate", "sweep-k", "evolve"):
        p = sub.add_parser(name)
        add_common(p)
        if name == "sweep-k":
            p.add_argument(
                "--k-values",
                dest="k_values",
                type=int,
                nargs="+",
                default=[10, 20, 50],
            )
    return parser


_OVERRIDE_FIELDS = (
    "manifest", "text_dir", "out_dir", "interval", "strategy", "k", "runs",
    "min_support", "seed", "ground_truth", "generation_fixture", "eq2_denominator",
)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        overrides = {name: getattr(args, name, None) for name in _OVERRIDE_FIELDS}
        config = load_config(args.config, overrides)
        if args.command == "build-network":
            return cmd_build_network(config)
        if args.command == "evaluate":
            return cmd_evaluate(config)
        if args.command == "sweep-k":
            return cmd_sweep_k(config, args.k_values)
        if args.command == "evolve":
            return cmd_evolve(config)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except PipelineError as exc:
        print(f"pipeline failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
