"""Distance-based and sparse canonical correlation between paired subject modalities."""

__version__ = "0.1.0"
