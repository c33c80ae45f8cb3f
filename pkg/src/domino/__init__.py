"""Compiler from Domino packet transactions to Banzai atom pipelines."""

from .parser import parse, parse_expression
from .validate import validate

__version__ = "0.1.0"

__all__ = ["parse", "parse_expression", "validate", "__version__"]
