"""Exact Wick-type star products on Kähler surfaces."""

__version__ = "0.1.0"
