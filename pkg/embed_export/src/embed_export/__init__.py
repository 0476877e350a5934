"""Sentence-encoder embedding export in the SEB1 binary store format."""
from .exporter import ExportError, ExportJob, export, read_sentences

__all__ = ["ExportError", "ExportJob", "export", "read_sentences"]
