"""Agent-based simulation of HIV spread on a scale-free MSM contact network."""

__version__ = "0.1.0"
