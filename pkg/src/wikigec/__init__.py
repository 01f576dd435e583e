"""Tools for building grammatical error correction corpora and decoding with them."""

__version__ = "0.1.0"
