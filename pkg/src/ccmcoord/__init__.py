"""Coordination-driven multi-agent learning with convergent cross mapping."""

__version__ = "0.1.0"
