"""Adversarial Red/Blue broadcasting over a bounded-confidence opinion network."""

__version__ = "0.1.0"
