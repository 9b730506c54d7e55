"""Compiler-in-the-loop feedback harness for LLM pass-ordering experiments."""

__version__ = "0.1.0"
