"""Pretty-printer producing Domino concrete syntax.

``parse(format_program(ast)) == ast`` holds for every parsed program; the
printer is also used to dump intermediate programs after each pass.
"""

from __future__ import annotations

from .ast import Assign, Binary, Call, Field, If, IntLit, ProgramAst, StateRef, Ternary, Unary

_PREC = {
    "||": 1,
    "&&": 2,
    "|": 3,
    "^": 4,
    "&": 5,
    "==": 6,
    "!=": 6,
    "<": 7,
    ">": 7,
    "<=": 7,
    ">=": 7,
    "<<": 8,
    ">>": 8,
    "+": 9,
    "-": 9,
    "*": 10,
    "/": 10,
    "%": 10,
}
_UNARY_PREC = 11
_ATOM_PREC = 12


def _prec(e) -> int:
    if isinstance(e, Ternary):
        return 0
    if isinstance(e, Binary):
        return _PREC[e.op]
    if isinstance(e, Unary):
        return _UNARY_PREC
    return _ATOM_PREC


def format_expr(e, pkt: str = "pkt") -> str:
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, Field):
        return f"{pkt}.{e.name}"
    if isinstance(e, StateRef):
        if e.index is None:
            return e.name
        return f"{e.name}[{format_expr(e.index, pkt)}]"
    if isinstance(e, Call):
        return f"{e.name}({', '.join(format_expr(a, pkt) for a in e.args)})"
    if isinstance(e, Unary):
        inner = format_expr(e.operand, pkt)
        if (
            _prec(e.operand) < _UNARY_PREC
            or isinstance(e.operand, IntLit) and e.operand.value < 0
            or e.op == "-" and inner.startswith("-")  # "--" would lex as decrement
        ):
            inner = f"({inner})"
        return f"{e.op}{inner}"
    if isinstance(e, Binary):
        p = _PREC[e.op]
        left = format_expr(e.left, pkt)
        right = format_expr(e.right, pkt)
        if _prec(e.left) < p:
            left = f"({left})"
        if _prec(e.right) <= p:
            right = f"({right})"
        return f"{left} {e.op} {right}"
    if isinstance(e, Ternary):
        cond = format_expr(e.cond, pkt)
        if isinstance(e.cond, Ternary):
            cond = f"({cond})"
        return f"{cond} ? {format_expr(e.then, pkt)} : {format_expr(e.else_, pkt)}"
    raise TypeError(f"not an expression: {e!r}")


def format_stmts(body, pkt: str = "pkt", indent: int = 1) -> list[str]:
    pad = "  " * indent
    lines = []
    for s in body:
        if isinstance(s, Assign):
            lines.append(f"{pad}{format_expr(s.target, pkt)} = {format_expr(s.value, pkt)};")
        elif isinstance(s, If):
            lines.append(f"{pad}if ({format_expr(s.cond, pkt)}) {{")
            lines.extend(format_stmts(s.then, pkt, indent + 1))
            if s.else_:
                lines.append(f"{pad}}} else {{")
                lines.extend(format_stmts(s.else_, pkt, indent + 1))
            lines.append(f"{pad}}}")
        else:
            raise TypeError(f"not a statement: {s!r}")
    return lines


def format_program(prog: ProgramAst, body=None, extra_fields=()) -> str:
    """Render a whole program.  ``body`` overrides the program body, which is
    how intermediate passes are dumped; ``extra_fields`` lists temporaries to
    declare alongside the original packet fields."""
    pkt = prog.packet_param
    out = []
    for name, value in prog.consts:
        out.append(f"const int {name} = {value};")
    if prog.consts:
        out.append("")
    out.append("struct Packet {")
    for f in list(prog.packet_fields) + [f for f in extra_fields if f not in prog.packet_fields]:
        out.append(f"  int {f};")
    out.append("};")
    out.append("")
    for d in prog.state:
        if d.size is None:
            out.append(f"int {d.name} = {d.init};")
        else:
            out.append(f"int {d.name}[{d.size}] = {{{d.init}}};")
    if prog.state:
        out.append("")
    if prog.guard is not None:
        out.append(f"guard ({format_expr(prog.guard, pkt)})")
        out.append("")
    out.append(f"void {prog.name}(struct Packet {pkt}) {{")
    out.extend(format_stmts(prog.body if body is None else body, pkt))
    out.append("}")
    return "\n".join(out) + "\n"
