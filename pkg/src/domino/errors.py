from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Loc:
    line: int
    col: int


@dataclass(frozen=True)
class Diagnostic:
    message: str
    loc: Loc | None = None
    severity: str = "error"
    rule: str | None = None  # the violated language restriction, if any

    def format(self, filename: str = "<input>") -> str:
        line, col = (self.loc.line, self.loc.col) if self.loc else (0, 0)
        return f"{filename}:{line}:{col}: {self.severity}: {self.message}"


class DominoError(Exception):
    """Base class for errors carrying one or more diagnostics."""

    def __init__(self, diagnostics):
        if isinstance(diagnostics, Diagnostic):
            diagnostics = [diagnostics]
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(d.format() for d in self.diagnostics))

    def format(self, filename: str = "<input>") -> str:
        return "\n".join(d.format(filename) for d in self.diagnostics)


class ParseError(DominoError):
    pass


class RestrictionError(ParseError):
    """Source uses a construct the language forbids."""


class ValidationError(DominoError):
    pass


# Restrictions on the language, one per forbidden construct class.
RULE_ITERATION = "No iteration (while, for, do-while)"
RULE_JUMPS = "No goto, break, or continue"
RULE_POINTERS = "No pointers"
RULE_HEAP = "No dynamic memory allocation / heap"
RULE_ARRAY_INDEX = "Array index is constant for each transaction execution"
RULE_PAYLOAD = "No access to data i.e. unparsed portion of the packet"
