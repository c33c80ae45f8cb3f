"""Semantic checks on a parsed transaction.

Every violation is collected; ``validate`` raises a single
``ValidationError`` carrying all of them.
"""

from __future__ import annotations

from . import errors as E
from .ast import (
    Assign,
    Call,
    Field,
    If,
    ProgramAst,
    StateRef,
    iter_stmts,
    walk,
)
from .errors import Diagnostic, ValidationError
from .semantics import INTRINSICS

_PAYLOAD_NAMES = {"data", "payload"}


def _exprs_of(stmt):
    if isinstance(stmt, Assign):
        yield stmt.target
        yield stmt.value
    elif isinstance(stmt, If):
        yield stmt.cond


def check(prog: ProgramAst) -> list[Diagnostic]:
    """Return all diagnostics for ``prog`` (empty when valid)."""
    diags: list[Diagnostic] = []
    fields = set(prog.packet_fields)
    decls = {d.name: d for d in prog.state}
    pkt = prog.packet_param

    for name, _ in prog.consts:
        if name in decls:
            diags.append(Diagnostic(f"'{name}' declared as both constant and state variable"))
    for d in prog.state:
        if d.name in INTRINSICS:
            diags.append(Diagnostic(f"state variable '{d.name}' shadows an intrinsic", d.loc))

    def check_expr(e, in_guard=False):
        for n in walk(e):
            if isinstance(n, Field) and n.name not in fields:
                if n.name in _PAYLOAD_NAMES:
                    diags.append(
                        Diagnostic(
                            f"'{pkt}.{n.name}' violates restriction: {E.RULE_PAYLOAD}",
                            n.loc,
                            rule=E.RULE_PAYLOAD,
                        )
                    )
                else:
                    diags.append(Diagnostic(f"unknown identifier '{pkt}.{n.name}'", n.loc))
            elif isinstance(n, StateRef):
                d = decls.get(n.name)
                if d is None:
                    diags.append(Diagnostic(f"unknown identifier '{n.name}'", n.loc))
                    continue
                if in_guard:
                    diags.append(
                        Diagnostic(
                            f"guard may only test packet fields, but reads state '{n.name}'", n.loc
                        )
                    )
                if d.size is None and n.index is not None:
                    diags.append(Diagnostic(f"scalar state '{n.name}' cannot be indexed", n.loc))
                elif d.size is not None and n.index is None:
                    diags.append(Diagnostic(f"array '{n.name}' must be indexed", n.loc))
                if n.index is not None:
                    for m in walk(n.index):
                        if isinstance(m, StateRef):
                            diags.append(
                                Diagnostic(
                                    f"index of '{n.name}' must not read state ('{m.name}')", m.loc
                                )
                            )
                        elif isinstance(m, Call):
                            diags.append(
                                Diagnostic(
                                    f"index of '{n.name}' must not call '{m.name}'; "
                                    "compute it into a packet field first",
                                    m.loc,
                                )
                            )
            elif isinstance(n, Call):
                arity = INTRINSICS.get(n.name)
                if arity is None:
                    diags.append(Diagnostic(f"unknown function '{n.name}'", n.loc))
                elif arity != len(n.args):
                    diags.append(
                        Diagnostic(
                            f"'{n.name}' expects {arity} argument(s), got {len(n.args)}", n.loc
                        )
                    )

    if prog.guard is not None:
        check_expr(prog.guard, in_guard=True)

    for stmt in iter_stmts(prog.body):
        for e in _exprs_of(stmt):
            check_expr(e)

    diags.extend(_check_array_indices(prog, decls))
    return diags


def _check_array_indices(prog: ProgramAst, decls) -> list[Diagnostic]:
    """One index expression per array, and its fields stay fixed once used."""
    diags = []
    first_index: dict[str, object] = {}
    # fields that feed some array index already used, mapped to that array
    frozen: dict[str, str] = {}
    reported = set()

    def visit(body):
        for s in body:
            exprs = list(_exprs_of(s))
            for e in exprs:
                for n in walk(e):
                    if not (isinstance(n, StateRef) and n.index is not None):
                        continue
                    d = decls.get(n.name)
                    if d is None or d.size is None:
                        continue
                    prev = first_index.get(n.name)
                    if prev is None:
                        first_index[n.name] = n.index
                        for m in walk(n.index):
                            if isinstance(m, Field):
                                frozen.setdefault(m.name, n.name)
                    elif prev != n.index and n.name not in reported:
                        reported.add(n.name)
                        diags.append(
                            Diagnostic(
                                f"array '{n.name}' accessed with different index expressions "
                                f"({E.RULE_ARRAY_INDEX})",
                                n.loc,
                                rule=E.RULE_ARRAY_INDEX,
                            )
                        )
            if isinstance(s, Assign) and isinstance(s.target, Field):
                arr = frozen.get(s.target.name)
                if arr is not None:
                    diags.append(
                        Diagnostic(
                            f"field '{s.target.name}' indexes array '{arr}' and may not be "
                            f"reassigned after the first access ({E.RULE_ARRAY_INDEX})",
                            s.loc,
                            rule=E.RULE_ARRAY_INDEX,
                        )
                    )
            if isinstance(s, If):
                visit(s.then)
                visit(s.else_)

    visit(prog.body)
    return diags


def validate(prog: ProgramAst) -> ProgramAst:
    """Check ``prog`` and return it unchanged, or raise ``ValidationError``
    listing every violation found."""
    diags = check(prog)
    if diags:
        raise ValidationError(diags)
    return prog
