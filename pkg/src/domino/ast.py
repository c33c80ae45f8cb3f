"""AST for packet transactions.

The same node types are used from parsing all the way down to three-address
code: every normalization pass rewrites a list of ``Assign``/``If`` statements
into another such list, so a single interpreter can execute any stage.
Source locations are carried for diagnostics but excluded from equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from .errors import Loc


@dataclass(frozen=True)
class IntLit:
    value: int
    loc: Loc | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Field:
    name: str
    loc: Loc | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class StateRef:
    """A state variable; ``index`` is None for scalars."""

    name: str
    index: "Expr | None" = None
    loc: Loc | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple
    loc: Loc | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"
    loc: Loc | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    loc: Loc | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Ternary:
    cond: "Expr"
    then: "Expr"
    else_: "Expr"
    loc: Loc | None = field(default=None, compare=False, repr=False)


Expr = Union[IntLit, Field, StateRef, Call, Unary, Binary, Ternary]


@dataclass(frozen=True)
class Assign:
    target: Union[Field, StateRef]
    value: Expr
    loc: Loc | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class If:
    cond: Expr
    then: tuple
    else_: tuple = ()
    loc: Loc | None = field(default=None, compare=False, repr=False)


Stmt = Union[Assign, If]


@dataclass(frozen=True)
class StateDecl:
    name: str
    init: int
    size: int | None = None  # None for scalars
    loc: Loc | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class ProgramAst:
    name: str
    packet_param: str
    packet_fields: tuple
    consts: tuple  # ((name, value), ...) in declaration order
    state: tuple  # StateDecl, declaration order
    body: tuple
    guard: Expr | None = None
    loc: Loc | None = field(default=None, compare=False, repr=False)

    @property
    def state_scalars(self):
        return [(d.name, d.init) for d in self.state if d.size is None]

    @property
    def state_arrays(self):
        return [(d.name, d.size, d.init) for d in self.state if d.size is not None]

    def state_decl(self, name: str) -> StateDecl | None:
        for d in self.state:
            if d.name == name:
                return d
        return None


def is_atomic(e) -> bool:
    return isinstance(e, (IntLit, Field))


def children(e):
    if isinstance(e, StateRef):
        return (e.index,) if e.index is not None else ()
    if isinstance(e, Call):
        return e.args
    if isinstance(e, Unary):
        return (e.operand,)
    if isinstance(e, Binary):
        return (e.left, e.right)
    if isinstance(e, Ternary):
        return (e.cond, e.then, e.else_)
    return ()


def walk(e):
    """Yield ``e`` and all sub-expressions, pre-order."""
    stack = [e]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(children(n)))


def map_expr(e, fn):
    """Rebuild ``e`` bottom-up, replacing each node by ``fn(node)``."""
    if isinstance(e, StateRef) and e.index is not None:
        e = StateRef(e.name, map_expr(e.index, fn), e.loc)
    elif isinstance(e, Call):
        e = Call(e.name, tuple(map_expr(a, fn) for a in e.args), e.loc)
    elif isinstance(e, Unary):
        e = Unary(e.op, map_expr(e.operand, fn), e.loc)
    elif isinstance(e, Binary):
        e = Binary(e.op, map_expr(e.left, fn), map_expr(e.right, fn), e.loc)
    elif isinstance(e, Ternary):
        e = Ternary(map_expr(e.cond, fn), map_expr(e.then, fn), map_expr(e.else_, fn), e.loc)
    return fn(e)


def fields_read(e) -> list[str]:
    """Packet fields read by an expression, in first-occurrence order."""
    seen = []
    for n in walk(e):
        if isinstance(n, Field) and n.name not in seen:
            seen.append(n.name)
    return seen


def iter_stmts(body):
    """All statements in a body, recursing into branches."""
    for s in body:
        yield s
        if isinstance(s, If):
            yield from iter_stmts(s.then)
            yield from iter_stmts(s.else_)
