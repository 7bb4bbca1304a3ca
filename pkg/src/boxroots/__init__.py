"""boxroots: certified real-root solving for square nonlinear systems over boxes.

An interval branch-and-prune engine with pluggable contractors (hull and box
consistency, boundary shaving, preconditioned interval Newton variants),
verification operators for existence and uniqueness certificates, parametric
benchmark generators, and a filesystem benchmark harness.
"""

from .interval import EMPTY, ENTIRE, Box, Interval, IntervalMatrix

__version__ = "0.1.0"

__all__ = [
    "Interval",
    "Box",
    "IntervalMatrix",
    "EMPTY",
    "ENTIRE",
    "__version__",
]
