"""Exact and iterative parameterizations of doubly stochastic matrices, with
analytical gradients, synthetic mixing tasks and analysis tools."""

__version__ = "0.1.0"
