"""Reverse-mode differentiation of a first-order language with iteration."""

__version__ = "0.1.0"
