"""Offline frozen-encoder token-embedding exporter (HYCQE1 stores)."""

from .export import ExportError, ExportJob, export_embeddings

__version__ = "0.1.0"
