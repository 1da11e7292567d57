"""Explicit-state safety verification and bounded-prescience shielding for toy games."""

__version__ = "0.1.0"
