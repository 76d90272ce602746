"""Articulation inference from motion residual flow, with a synthetic data generator."""

__version__ = "0.1.0"
