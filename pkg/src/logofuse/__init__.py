"""Multi-label logo classification and weighted-fusion similarity search."""

__version__ = "0.1.0"
