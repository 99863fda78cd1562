"""Semiclassical tunneling splittings for symmetric 2-D double wells."""
__version__ = "0.1.0"
