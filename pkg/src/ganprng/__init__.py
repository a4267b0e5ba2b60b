"""Adversarially trained neural pseudo-random number generators."""

__version__ = "0.1.0"
