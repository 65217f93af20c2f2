"""Image tree -> frozen-backbone embeddings -> hierlearn feature files."""

from .backbones import build, embedding_dim, names, weights_checksum
from .extract import ExtractJob, ExtractSummary, extract
from .layout import LayoutError, Scan, scan_tree

__all__ = [
    "ExtractJob",
    "ExtractSummary",
    "LayoutError",
    "Scan",
    "build",
    "embedding_dim",
    "extract",
    "names",
    "scan_tree",
    "weights_checksum",
]
