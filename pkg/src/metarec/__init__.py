"""Per-instance algorithm selection for content-based scholarly recommendation."""

__version__ = "0.1.0"
