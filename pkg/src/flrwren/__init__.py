"""Minimal-subtraction renormalisation toolkit for scalar fields on flat FLRW."""

__version__ = "0.1.0"
