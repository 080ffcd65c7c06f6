"""Numerical asymptotics of singular integrals on the quadric {x.y = 0}."""

__version__ = "0.1.0"
