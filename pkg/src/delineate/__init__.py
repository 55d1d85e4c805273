"""Curvilinear network delineation: tubularity map to vector graph, and back to metrics."""

__version__ = "0.1.0"
