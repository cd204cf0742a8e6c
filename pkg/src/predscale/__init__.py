"""Predictive auto-scaling for elastic instance clusters."""

__version__ = "0.1.0"
