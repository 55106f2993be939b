"""Capability-graph-driven task planning, model selection, and execution."""

__version__ = "0.1.0"
