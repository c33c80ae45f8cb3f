"""Front end: source text to a validated transaction."""

from __future__ import annotations

from pathlib import Path

from .ast import ProgramAst
from .errors import DominoError, ParseError, RestrictionError, ValidationError
from .parser import parse, parse_expression
from .validate import check, validate


def load_program(source: str) -> ProgramAst:
    """Parse and validate; raises ``DominoError`` with every diagnostic."""
    return validate(parse(source))


def load_file(path) -> ProgramAst:
    return load_program(Path(path).read_text(encoding="utf-8"))


__all__ = [
    "DominoError",
    "ParseError",
    "RestrictionError",
    "ValidationError",
    "check",
    "load_file",
    "load_program",
    "parse",
    "parse_expression",
    "validate",
]
