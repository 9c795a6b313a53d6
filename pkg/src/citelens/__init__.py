"""Temporal citation-network analysis: cascade counts, bias analyses and
synthetic generators with planted mechanisms."""

from .cascade import CascadeCounts, CascadeTable, CascadeWindows, compute_all, compute_cascade
from .corpus import CitationGraph, Document, ingest, ingest_files

__version__ = "0.1.0"

__all__ = [
    "CascadeCounts",
    "CascadeTable",
    "CascadeWindows",
    "CitationGraph",
    "Document",
    "compute_all",
    "compute_cascade",
    "ingest",
    "ingest_files",
]
