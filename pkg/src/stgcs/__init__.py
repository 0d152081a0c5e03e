"""Space-time trajectory planning over graphs of convex sets."""

__version__ = "0.1.0"
