"""Causal query execution, confidence scoring, and DAG assembly.

Three query strategies are supported: base (no context), concat (all
retrieved chunks in one prompt), and split (one generation per retrieved
chunk). Each generation yields a confidence equal to its mean token
probability; per-edge confidences are aggregated across the retrieved set
and the final network is built greedily, highest confidence first, skipping
any edge that would close a cycle.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Sequence

from .corpus import Corpus, WhitespaceTokenizer, chunk_document
from .errors import QueryError
from .inference import parse_answer, render_causal_prompt, render_causal_question
from .nodes import ALL_NODES, NodeLabel
from .providers import (
    EmbeddingProvider,
    GenerationProvider,
    GenerationRecord,
    GenerationRequest,
)
from .retrieval import ScoredChunk, build_index, retrieve_top_k

if TYPE_CHECKING:
    from .config import PipelineConfig

log = logging.getLogger(__name__)

STRATEGIES = ("base", "concat", "split")


def mean_token_probability(record: GenerationRecord) -> float:
    """Average per-token probability of a generation; higher = more
    confident."""
    if not record.tokens:
        raise ValueError("generation has no tokens")
    probs = [p for _, p in record.tokens]
    return math.fsum(probs) / len(probs)


@dataclass(frozen=True)
class ChunkVerdict:
    """One generation's answer for a causal query.

    ``context`` and ``reasoning`` are carried along for the faithfulness
    evaluation (chunk/reasoning pairs).
    """

    chunk_rank: int
    causes: frozenset[NodeLabel]
    u_c: float
    context: str = ""
    reasoning: str = ""


@dataclass(frozen=True)
class EdgeCandidate:
    cause: NodeLabel
    effect: NodeLabel
    score: float
    support: int
    retrieved: int

    def __post_init__(self) -> None:
        if self.cause is self.effect:
            raise ValueError(f"self-loop candidate: {self.cause.letter}")
        if self.support > self.retrieved:
            raise ValueError("support cannot exceed the retrieved count")


class CausalGraph:
    """DAG over the seven node labels with confidence-weighted edges."""

    def __init__(self, edges: Sequence[EdgeCandidate] = ()):
        self.nodes = ALL_NODES
        self._edges = tuple(edges)
        self._successors: dict[NodeLabel, set[NodeLabel]] = {n: set() for n in ALL_NODES}
        for edge in self._edges:
            self._successors[edge.cause].add(edge.effect)

    @property
    def edges(self) -> tuple[EdgeCandidate, ...]:
        return self._edges

    def edge_pairs(self) -> set[tuple[NodeLabel, NodeLabel]]:
        return {(e.cause, e.effect) for e in self._edges}

    def successors(self, node: NodeLabel) -> set[NodeLabel]:
        return set(self._successors[node])

    def reaches(self, start: NodeLabel, goal: NodeLabel) -> bool:
        """Directed reachability via depth-first search."""
        stack = [start]
        seen: set[NodeLabel] = set()
        while stack:
            node = stack.pop()
            if node is goal:
                return True
            if node in seen:
                continue
            seen.add(node)
            stack.extend(self._successors[node])
        return False

    def to_json_dict(self) -> dict:
        return {
            "nodes": [n.letter for n in self.nodes],
            "edges": [
                {
                    "cause": e.cause.letter,
                    "effect": e.effect.letter,
                    "score": e.score,
                    "support": e.support,
                    "retrieved": e.retrieved,
                }
                for e in self._edges
            ],
        }

    def to_dot(self) -> str:
        lines = ["digraph causal_network {"]
        for node in self.nodes:
            lines.append(f'  {node.letter} [label="{node.display}"];')
        for edge in self._edges:
            lines.append(
                f'  {edge.cause.letter} -> {edge.effect.letter} [score="{edge.score:.4f}"];'
            )
        lines.append("}")
        return "\n".join(lines) + "\n"


def creates_cycle(graph: CausalGraph, cause: NodeLabel, effect: NodeLabel) -> bool:
    """True iff adding cause->effect would close a directed cycle."""
    if cause is effect:
        raise ValueError("self-loop edges are not permitted")
    return graph.reaches(effect, cause)


def query_node(
    target: NodeLabel,
    retrieved: Sequence[ScoredChunk],
    strategy: str,
    generator: GenerationProvider,
    *,
    max_new_tokens: int = 512,
    temperature: float = 0.0,
    seed: int = 0,
) -> list[ChunkVerdict]:
    """Run the causal query for one node under the given strategy.

    split yields one verdict per retrieved chunk in rank order; concat and
    base yield a single verdict. A failed generation becomes an abstention
    verdict with u_c = 1.0; if every generation fails the query errors out.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    if strategy in ("concat", "split") and not retrieved:
        raise ValueError(f"strategy {strategy!r} requires retrieved chunks")

    if strategy == "split":
        contexts = [(rank, sc.chunk.text) for rank, sc in enumerate(retrieved)]
    elif strategy == "concat":
        contexts = [(0, "\n\n".join(sc.chunk.text for sc in retrieved))]
    else:
        contexts = [(0, "")]

    verdicts: list[ChunkVerdict] = []
    failures = 0
    for rank, context in contexts:
        prompt = render_causal_prompt(target, context)
        request = GenerationRequest(
            prompt=prompt,
            max_new_tokens=max_new_tokens,
            temperature=temperature,
            seed=seed,
        )
        try:
            record = generator.generate(request)
        except Exception as exc:
            failures += 1
            log.error("generation failed for node %s (rank %d): %s",
                      target.letter, rank, exc)
            verdicts.append(
                ChunkVerdict(chunk_rank=rank, causes=frozenset(), u_c=1.0,
                             context=context, reasoning="")
            )
            continue
        parsed = parse_answer(record.text, target)
        verdicts.append(
            ChunkVerdict(
                chunk_rank=rank,
                causes=parsed.labels,
                u_c=mean_token_probability(record),
                context=context,
                reasoning=parsed.reasoning,
            )
        )

    if failures == len(contexts):
        raise QueryError(f"every generation failed for node {target.letter}")
    return verdicts


def aggregate_candidates(
    target: NodeLabel,
    verdicts: Sequence[ChunkVerdict],
    min_support: int = 1,
    denominator: str = "retrieved",
) -> list[EdgeCandidate]:
    """Combine per-chunk verdicts into scored edge candidates.

    score(cause -> target) = sum of u_c over supporting verdicts, divided by
    the total number of verdicts (``denominator="retrieved"``) or by the
    support count (``denominator="support"``). Candidates below min_support
    are dropped (set min_support to ceil(n/2) for majority voting).
    """
    if not verdicts:
        raise ValueError("verdicts must be non-empty")
    if min_support < 1:
        raise ValueError("min_support must be >= 1")
    if denominator not in ("retrieved", "support"):
        raise ValueError(f"unknown denominator {denominator!r}")

    total = len(verdicts)
    candidates = []
    for cause in ALL_NODES:
        if cause is target:
            continue
        supporting = [v.u_c for v in verdicts if cause in v.causes]
        if not supporting or len(supporting) < min_support:
            continue
        divisor = total if denominator == "retrieved" else len(supporting)
        candidates.append(
            EdgeCandidate(
                cause=cause,
                effect=target,
                score=math.fsum(supporting) / divisor,
                support=len(supporting),
                retrieved=total,
            )
        )
    candidates.sort(key=lambda c: (-c.score, c.cause.letter))
    return candidates


def build_dag(candidates: Sequence[EdgeCandidate]) -> CausalGraph:
    """Greedy DAG assembly: insert by score descending (ties by cause then
    effect letter), discarding any edge that would close a cycle."""
    seen_pairs: set[tuple[NodeLabel, NodeLabel]] = set()
    for cand in candidates:
        pair = (cand.cause, cand.effect)
        if pair in seen_pairs:
            raise ValueError(
                f"duplicate candidate for {cand.cause.letter}->{cand.effect.letter}"
            )
        seen_pairs.add(pair)

    ranked = sorted(
        candidates, key=lambda c: (-c.score, c.cause.letter, c.effect.letter)
    )
    graph = CausalGraph()
    kept: list[EdgeCandidate] = []
    for cand in ranked:
        if not creates_cycle(graph, cand.cause, cand.effect):
            kept.append(cand)
            graph = CausalGraph(kept)
    return graph


@dataclass
class DiscoveryResult:
    graph: CausalGraph
    candidates: list[EdgeCandidate]
    reasoning_records: list[dict] = field(default_factory=list)

    def entailment_pairs(self) -> list[tuple[str, str]]:
        """(retrieved context, reasoning) pairs with both sides non-empty."""
        return [
            (r["context"], r["reasoning"])
            for r in self.reasoning_records
            if r["context"] and r["reasoning"]
        ]


def discover_network(
    corpus_slice: Corpus,
    config: "PipelineConfig",
    embedder: EmbeddingProvider,
    generator: GenerationProvider,
) -> DiscoveryResult:
    """Run the full discovery loop for one corpus slice.

    For every node: retrieve top-k chunks for its causal question (skipped
    for the base strategy), query the generator, and aggregate candidates.
    The union of all candidates is then assembled into a DAG.
    """
    tokenizer = WhitespaceTokenizer()

    index = None
    if config.strategy != "base":
        chunks = [
            chunk
            for doc in corpus_slice
            for chunk in chunk_document(doc, config.max_chunk_tokens, tokenizer)
        ]
        index = build_index(chunks, embedder)

    all_candidates: list[EdgeCandidate] = []
    reasoning_records: list[dict] = []
    for node in ALL_NODES:
        if config.strategy == "base":
            retrieved: list[ScoredChunk] = []
        else:
            retrieved = retrieve_top_k(
                index, render_causal_question(node), config.k, embedder
            )
        verdicts = query_node(
            node,
            retrieved,
            config.strategy,
            generator,
            max_new_tokens=config.max_new_tokens,
            temperature=config.temperature,
            seed=config.seed,
        )
        all_candidates.extend(
            aggregate_candidates(
                node, verdicts, config.min_support, config.eq2_denominator
            )
        )
        for verdict in verdicts:
            reasoning_records.append(
                {
                    "node": node.letter,
                    "chunk_rank": verdict.chunk_rank,
                    "context": verdict.context,
                    "reasoning": verdict.reasoning,
                    "causes": sorted(c.letter for c in verdict.causes),
                    "u_c": verdict.u_c,
                }
            )

    return DiscoveryResult(
        graph=build_dag(all_candidates),
        candidates=all_candidates,
        reasoning_records=reasoning_records,
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def write_graph_json(graph: CausalGraph, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(graph.to_json_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def read_graph_json(path: str | Path) -> CausalGraph:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    edges = [
        EdgeCandidate(
            cause=NodeLabel.from_letter(e["cause"]),
            effect=NodeLabel.from_letter(e["effect"]),
            score=float(e["score"]),
            support=int(e["support"]),
            retrieved=int(e["retrieved"]),
        )
        for e in data["edges"]
    ]
    return CausalGraph(edges)


def write_graph_dot(graph: CausalGraph, path: str | Path) -> None:
    Path(path).write_text(graph.to_dot(), encoding="utf-8")


def write_candidates_csv(candidates: Iterable[EdgeCandidate], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cause", "effect", "score", "support", "retrieved"])
        for cand in candidates:
            writer.writerow(
                [cand.cause.letter, cand.effect.letter, repr(cand.score),
                 cand.support, cand.retrieved]
            )


def read_candidates_csv(path: str | Path) -> list[EdgeCandidate]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return [
            EdgeCandidate(
                cause=NodeLabel.from_letter(row["cause"]),
                effect=NodeLabel.from_letter(row["effect"]),
                score=float(row["score"]),
                support=int(row["support"]),
                retrieved=int(row["retrieved"]),
            )
            for row in csv.DictReader(fh)
        ]
