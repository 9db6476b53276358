"""The fixed seven-node biomarker vocabulary.

Every causal query, edge, and evaluation metric in the pipeline ranges over
these seven labels. Option letters A-G are stable and appear verbatim in
prompts, answer parsing, serialized graphs, and ground-truth files.
"""

from __future__ import annotations

import enum


class NodeLabel(enum.Enum):
    """A biomarker node, identified by its option letter."""

    AMYLOID_BETA = ("A", "amyloid beta")
    APOE = ("B", "APOE")
    TAU = ("C", "tau")
    NEUROINFLAMMATION = ("D", "neuroinflammation")
    COGNITIVE_DECLINE = ("E", "cognitive decline and impairment")
    NEURODEGENERATION = ("F", "neurodegeneration")
    METABOLISM = ("G", "metabolism")

    def __init__(self, letter: str, display: str) -> None:
        self.letter = letter
        self.display = display

    def __lt__(self, other: "NodeLabel") -> bool:
        if not isinstance(other, NodeLabel):
            return NotImplemented
        return self.letter < other.letter

    @classmethod
    def from_letter(cls, letter: str) -> "NodeLabel":
        label = _BY_LETTER.get(letter.strip().upper())
        if label is None:
            raise KeyError(f"unknown node letter: {letter!r}")
        return label

    @classmethod
    def from_text(cls, text: str) -> "NodeLabel | None":
        """Resolve a letter or a full label name; None if unrecognized."""
        cleaned = text.strip().rstrip(".").strip()
        if not cleaned:
            return None
        upper = cleaned.upper()
        if upper in _BY_LETTER:
            return _BY_LETTER[upper]
        return _BY_NAME.get(cleaned.lower())


_BY_LETTER = {label.letter: label for label in NodeLabel}

# Accepted full-name spellings; includes the shorter phrasing the prompt's
# option list uses for the outcome node.
_BY_NAME = {label.display.lower(): label for label in NodeLabel}
_BY_NAME.update(
    {
        "amyloid beta (β)": NodeLabel.AMYLOID_BETA,
        "cognition decline": NodeLabel.COGNITIVE_DECLINE,
        "cognitive decline": NodeLabel.COGNITIVE_DECLINE,
    }
)

#: Outcome node representing disease progression.
OUTCOME_NODE = NodeLabel.COGNITIVE_DECLINE

#: All labels in option-letter order.
ALL_NODES = tuple(sorted(NodeLabel, key=lambda n: n.letter))
