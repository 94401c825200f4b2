"""Guidance-tree toolkit: flowchart reconstruction, tree normalization,
IEET text serialization, retrieval, and a consultation engine."""

__version__ = "0.1.0"

from .model import Cgt, CgtNode, NodeKind, validate_cgt, subtree, paths  # noqa: F401
