"""Paragraph-level retrieval and phrase tokenization in front of an extractive QA model."""

__version__ = "0.1.0"
