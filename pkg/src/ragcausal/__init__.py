"""Literature-RAG causal network discovery for the fixed seven-node
biomarker set, with a mock-backed evaluation harness."""

from .nodes import ALL_NODES, OUTCOME_NODE, NodeLabel

__all__ = ["ALL_NODES", "OUTCOME_NODE", "NodeLabel"]
__version__ = "0.1.0"
