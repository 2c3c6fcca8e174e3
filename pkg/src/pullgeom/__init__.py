"""Numerical geometry of pullback principal bundles."""
__version__ = "0.1.0"
