"""Benchmark suite for evaluating post-hoc attribution methods on
chaotic-attractor time-series classification."""

__version__ = "0.1.0"
