"""Prompt rendering and answer parsing for the causal queries.

Prompts follow a fixed template: expert preamble, optional retrieved
context, the per-node causal question with the full A-G option list, the
answer-tag instruction, and a step-by-step trigger. Generated text is
parsed back into node labels from the last <Answer>...</Answer> pair.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from .nodes import NodeLabel

log = logging.getLogger(__name__)

BIOMARKER_PROMPT = "Identify biomarkers for Alzheimer's Disease (AD)"

OPTION_LIST = (
    "A. amyloid Beta (β), B. APOE, C. Tau, D. Neuroinflammation, "
    "E. cognition decline, F. Neurodegeneration, G. Metabolism"
)

_ANSWER_TAG = re.compile(r"<Answer>(.*?)</Answer>", re.DOTALL | re.IGNORECASE)


@dataclass(frozen=True)
class ParsedAnswer:
    labels: frozenset[NodeLabel]
    reasoning: str
    abstained: bool


def render_biomarker_prompt() -> str:
    """The fixed retrieval query for biomarker identification."""
    return BIOMARKER_PROMPT


def render_causal_question(target: NodeLabel) -> str:
    """The per-node causal question with the option list; also used as the
    retrieval query for that node."""
    return (
        f"What are the biomarkers or conditions that directly cause "
        f"{target.display}? Select from the options in {OPTION_LIST}."
    )


def render_causal_prompt(target: NodeLabel, context: str = "") -> str:
    """Full generation prompt for one causal query.

    An empty context renders the context-free variant (no Context section
    at all), which is the base strategy.
    """
    question = render_causal_question(target)
    context_part = f"Referencing the given Context: {context}, " if context else ""
    return (
        "You are an expert in Alzheimer's Disease (AD) research. "
        f"{context_part}give the best answer to the question: {question} "
        "Then, provide your final answer (variable label only) within the tags "
        "<Answer>...</Answer>, if not find any, return <Answer></Answer>. "
        "Let's work this out step-by-step. Your step by step answer is:"
    )


def parse_answer(generated: str, target: NodeLabel) -> ParsedAnswer:
    """Extract node labels from the last answer tag of a generation.

    Accepts option letters and full label names, case-insensitively. The
    target itself and unrecognized tokens are discarded with a warning.
    Missing tags degrade to abstention, never an exception.
    """
    matches = list(_ANSWER_TAG.finditer(generated))
    reasoning = _ANSWER_TAG.sub("", generated).strip()
    if not matches:
        log.warning("no <Answer> tags in generation for %s; treating as abstention",
                    target.letter)
        return ParsedAnswer(labels=frozenset(), reasoning=reasoning, abstained=True)

    payload = matches[-1].group(1)
    labels: set[NodeLabel] = set()
    for segment in payload.split(","):
        segment = segment.strip()
        if not segment:
            continue
        label = NodeLabel.from_text(segment)
        if label is not None:
            labels.add(label)
            continue
        # A segment may hold several whitespace-separated letters.
        for token in segment.split():
            label = NodeLabel.from_text(token)
            if label is not None:
                labels.add(label)
            else:
                log.warning("unrecognized answer token %r discarded", token)

    if target in labels:
        log.warning("self-answer %s discarded from its own causal query", target.letter)
        labels.discard(target)

    return ParsedAnswer(
        labels=frozenset(labels), reasoning=reasoning, abstained=not labels
    )
