"""Adversary-aware wrapper feature selection against evasion attacks."""

__version__ = "0.1.0"
