"""Grokking of modular arithmetic with Recursive Feature Machines and quadratic networks."""

__version__ = "0.1.0"
