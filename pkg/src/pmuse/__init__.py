"""Multimodal masked color model: palette completion and generation for
graphic documents, served over HTTP and a CLI."""

__version__ = "0.1.0"
