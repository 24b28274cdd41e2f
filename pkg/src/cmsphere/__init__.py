"""Tracer transport on the unit sphere by backward characteristic maps."""

__version__ = "0.1.0"
