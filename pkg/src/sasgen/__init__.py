"""Surrogate-assisted quality-diversity generation of human-robot interaction scenarios."""
__version__ = "0.1.0"
