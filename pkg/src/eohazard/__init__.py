"""Hierarchical multi-agent hazard detection for onboard Earth observation."""

__version__ = "0.1.0"
