"""Transient plane-stress datasets and spatiotemporal surrogate models."""

__version__ = "0.1.0"
