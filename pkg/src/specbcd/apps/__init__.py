"""Benchmark problem families, baselines, and oracles."""

from . import gensdp, qcqp

__all__ = ["gensdp", "qcqp"]
