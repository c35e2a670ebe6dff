"""Discrete complex analysis on critical (isoradial) planar graphs."""

__version__ = "0.1.0"

from .errors import IsoradialError  # noqa: E402
from .lattice import build_graph, generate, superpose  # noqa: E402

__all__ = ["IsoradialError", "build_graph", "generate", "superpose", "__version__"]
