"""Simulated technology-assisted review: engines, baselines, evaluation."""

__version__ = "0.1.0"
