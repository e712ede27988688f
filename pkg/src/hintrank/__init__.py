"""Hint-augmented retrieval and reranking for superlative product-search queries."""

__version__ = "0.1.0"
