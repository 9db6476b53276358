"""Scoring predicted networks against a ground-truth adjacency.

The candidate universe for every metric is the 42 ordered non-self node
pairs over the seven labels. AUROC uses the exact pairwise-comparison
formula with half credit for ties; the entailment rate is the fraction of
(retrieved chunk, reasoning) pairs an NLI provider judges entailed.
"""

from __future__ import annotations

import json
import logging
import math
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .causal import CausalGraph
from .errors import GroundTruthError, UndefinedMetricError
from .nodes import ALL_NODES, NodeLabel
from .providers import NliProvider, nli_entails

log = logging.getLogger(__name__)

#: All 42 ordered non-self pairs, in (cause letter, effect letter) order.
ALL_PAIRS: tuple[tuple[NodeLabel, NodeLabel], ...] = tuple(
    (u, v) for u in ALL_NODES for v in ALL_NODES if u is not v
)


@dataclass(frozen=True)
class GroundTruthGraph:
    edges: frozenset[tuple[NodeLabel, NodeLabel]]

    def __post_init__(self) -> None:
        for cause, effect in self.edges:
            if cause is effect:
                raise GroundTruthError(f"self-loop in ground truth: {cause.letter}")
        if _has_cycle(self.edges):
            raise GroundTruthError("ground-truth network contains a directed cycle")
        if not self.edges:
            log.warning("ground-truth network is empty")


def _has_cycle(edges: frozenset[tuple[NodeLabel, NodeLabel]]) -> bool:
    adjacency: dict[NodeLabel, set[NodeLabel]] = {n: set() for n in ALL_NODES}
    for cause, effect in edges:
        adjacency[cause].add(effect)
    # Kahn peeling: a cycle exists iff some node is never freed.
    indegree = {n: 0 for n in ALL_NODES}
    for cause, effect in edges:
        indegree[effect] += 1
    frontier = [n for n in ALL_NODES if indegree[n] == 0]
    removed = 0
    while frontier:
        node = frontier.pop()
        removed += 1
        for succ in adjacency[node]:
            indegree[succ] -= 1
            if indegree[succ] == 0:
                frontier.append(succ)
    return removed != len(ALL_NODES)


def load_ground_truth(path: str | Path) -> GroundTruthGraph:
    """Parse a JSON list of [cause letter, effect letter] pairs."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise GroundTruthError(f"cannot read ground truth {path}: {exc}") from exc
    edges = set()
    for entry in raw:
        try:
            cause = NodeLabel.from_letter(entry[0])
            effect = NodeLabel.from_letter(entry[1])
        except KeyError as exc:
            raise GroundTruthError(f"ground truth {path}: {exc}") from exc
        edges.add((cause, effect))
    return GroundTruthGraph(edges=frozenset(edges))


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self) -> None:
        if self.tp + self.fp + self.tn + self.fn != len(ALL_PAIRS):
            raise ValueError("confusion counts must sum to 42")


def confusion(predicted: CausalGraph, truth: GroundTruthGraph) -> ConfusionCounts:
    """Classify each of the 42 ordered non-self pairs."""
    predicted_pairs = predicted.edge_pairs()
    tp = fp = tn = fn = 0
    for pair in ALL_PAIRS:
        in_pred = pair in predicted_pairs
        in_truth = pair in truth.edges
        if in_pred and in_truth:
            tp += 1
        elif in_pred:
            fp += 1
        elif in_truth:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def metrics_from_counts(counts: ConfusionCounts) -> tuple[float, float, float, float]:
    """(accuracy, precision, recall, f1) with zero-division -> 0
    conventions."""
    total = counts.tp + counts.fp + counts.tn + counts.fn
    accuracy = (counts.tp + counts.tn) / total
    precision = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 0.0
    recall = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
    f1 = (
        2 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    return accuracy, precision, recall, f1


def auroc(
    scored_pairs: Sequence[tuple[NodeLabel, NodeLabel, float]],
    truth: GroundTruthGraph,
) -> float:
    """Exact pairwise AUROC over the 42-pair universe.

    Pairs never proposed score 0. AUROC = P(random true pair outscores a
    random false pair) with half credit for ties.
    """
    scores = {pair: 0.0 for pair in ALL_PAIRS}
    for cause, effect, score in scored_pairs:
        if cause is effect:
            raise ValueError("self-pairs cannot be scored")
        scores[(cause, effect)] = score

    positives = [scores[pair] for pair in ALL_PAIRS if pair in truth.edges]
    negatives = [scores[pair] for pair in ALL_PAIRS if pair not in truth.edges]
    if not positives or not negatives:
        raise UndefinedMetricError(
            "AUROC is undefined when all 42 pairs share one class"
        )
    total = 0.0
    for pos in positives:
        for neg in negatives:
            if pos > neg:
                total += 1.0
            elif pos == neg:
                total += 0.5
    return total / (len(positives) * len(negatives))


def entailment_rate(
    pairs: Sequence[tuple[str, str]], nli: NliProvider
) -> float:
    """Fraction of (premise, hypothesis) pairs the NLI provider entails."""
    if not pairs:
        raise ValueError("pairs must be non-empty")
    entailed = sum(
        1 for premise, hypothesis in pairs
        if nli_entails(nli, premise, hypothesis).entailed
    )
    return entailed / len(pairs)


METRIC_FIELDS = ("accuracy", "precision", "recall", "f1", "auroc", "entailment_rate")


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    auroc: float | None = None
    entailment_rate: float | None = None
    strategy: str = ""
    k: int = 0
    seed: int = 0
    interval: str | None = None
    run_id: str = ""
    human_score: float | None = None

    def config_key(self) -> tuple:
        return (self.strategy, self.k, self.interval)

    def metric_values(self) -> dict[str, float | None]:
        return {name: getattr(self, name) for name in METRIC_FIELDS}


@dataclass(frozen=True)
class AggregateReport:
    mean: dict[str, float | None]
    std: dict[str, float | None]
    n_runs: int
    single_run: bool


def aggregate_runs(reports: Sequence[MetricsReport]) -> AggregateReport:
    """Per-metric mean and sample standard deviation across repeated runs.

    A single run yields std 0 with the single_run flag set. Metrics absent
    from every run (None) stay None.
    """
    if not reports:
        raise ValueError("at least one report is required")
    keys = {r.config_key() for r in reports}
    if len(keys) > 1:
        raise ValueError(f"mixed run configurations cannot be aggregated: {keys}")

    mean: dict[str, float | None] = {}
    std: dict[str, float | None] = {}
    for name in METRIC_FIELDS:
        values = [r.metric_values()[name] for r in reports]
        present = [v for v in values if v is not None]
        if not present:
            mean[name] = None
            std[name] = None
            continue
        if len(present) != len(values):
            raise ValueError(f"metric {name!r} present in some runs but not others")
        mean[name] = math.fsum(present) / len(present)
        std[name] = statistics.stdev(present) if len(present) > 1 else 0.0
    return AggregateReport(
        mean=mean, std=std, n_runs=len(reports), single_run=len(reports) == 1
    )


@dataclass(frozen=True)
class IntervalDiff:
    previous: str
    current: str
    added: tuple[tuple[str, str], ...]
    removed: tuple[tuple[str, str], ...]
    retained: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class EvolutionReport:
    edge_counts: dict[str, int]
    diffs: tuple[IntervalDiff, ...]

    def to_json_dict(self) -> dict:
        return {
            "edge_counts": self.edge_counts,
            "diffs": [
                {
                    "previous": d.previous,
                    "current": d.current,
                    "added": [list(e) for e in d.added],
                    "removed": [list(e) for e in d.removed],
                    "retained": [list(e) for e in d.retained],
                }
                for d in self.diffs
            ],
        }

    def to_text(self) -> str:
        lines = ["interval evolution", "=================="]
        for interval, count in self.edge_counts.items():
            lines.append(f"{interval}: {count} edges")
        for diff in self.diffs:
            lines.append("")
            lines.append(f"{diff.previous} -> {diff.current}")
            lines.append(f"  added:    {_fmt_edges(diff.added)}")
            lines.append(f"  removed:  {_fmt_edges(diff.removed)}")
            lines.append(f"  retained: {_fmt_edges(diff.retained)}")
        return "\n".join(lines) + "\n"


def _fmt_edges(edges: Sequence[tuple[str, str]]) -> str:
    return ", ".join(f"{c}->{e}" for c, e in edges) if edges else "(none)"


def evolution_report(per_interval: Mapping[str, CausalGraph]) -> EvolutionReport:
    """Edge-set diffs between consecutive intervals plus per-interval
    counts. ``per_interval`` must already be in chronological order."""
    intervals = list(per_interval)
    edge_sets = {
        label: {
            (e.cause.letter, e.effect.letter) for e in per_interval[label].edges
        }
        for label in intervals
    }
    diffs = []
    for prev, curr in zip(intervals, intervals[1:]):
        diffs.append(
            IntervalDiff(
                previous=prev,
                current=curr,
                added=tuple(sorted(edge_sets[curr] - edge_sets[prev])),
                removed=tuple(sorted(edge_sets[prev] - edge_sets[curr])),
                retained=tuple(sorted(edge_sets[prev] & edge_sets[curr])),
            )
        )
    return EvolutionReport(
        edge_counts={label: len(edge_sets[label]) for label in intervals},
        diffs=tuple(diffs),
    )


def load_human_scores(path: str | Path) -> dict[str, float]:
    """CSV of {run_id, score in [0,1]}; echoed into reports, never computed."""
    import csv

    with Path(path).open(newline="", encoding="utf-8") as fh:
        return {row["run_id"]: float(row["score"]) for row in csv.DictReader(fh)}
