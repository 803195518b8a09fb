"""Benchmark metrics for dataflow AI accelerators."""

__version__ = "0.1.0"
