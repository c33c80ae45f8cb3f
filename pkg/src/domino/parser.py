"""Recursive-descent parser for Domino packet transactions.

Grammar (C-like subset)::

    program   := top* transaction
    top       := 'const' 'int' NAME '=' expr ';'
               | 'struct' 'Packet' '{' ('int' NAME (',' NAME)* ';')* '}' ';'
               | 'int' NAME ('[' expr ']')? ('=' (expr | '{' expr '}'))? ';'
               | 'guard' '(' expr ')' ';'?
    transaction := 'void' NAME '(' 'struct' 'Packet' NAME ')' block

Constants are substituted at parse time.  Forbidden C constructs raise
``RestrictionError`` naming the rule they break.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from . import errors as E
from .ast import (
    Assign,
    Binary,
    Call,
    Field,
    If,
    IntLit,
    ProgramAst,
    StateDecl,
    StateRef,
    Ternary,
    Unary,
)
from .errors import Diagnostic, Loc, ParseError, RestrictionError
from .semantics import binop, unop, wrap32

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<preproc>\#[^\n]*)
  | (?P<int>0[xX][0-9a-fA-F]+|\d+)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>->|\+\+|--|\+=|-=|<<|>>|<=|>=|==|!=|&&|\|\||[{}()\[\];,.=?:|^&<>+\-*/%!~])
    """,
    re.VERBOSE | re.DOTALL,
)

_FORBIDDEN = {
    "while": E.RULE_ITERATION,
    "for": E.RULE_ITERATION,
    "do": E.RULE_ITERATION,
    "goto": E.RULE_JUMPS,
    "break": E.RULE_JUMPS,
    "continue": E.RULE_JUMPS,
    "malloc": E.RULE_HEAP,
    "calloc": E.RULE_HEAP,
    "realloc": E.RULE_HEAP,
    "free": E.RULE_HEAP,
    "new": E.RULE_HEAP,
    "delete": E.RULE_HEAP,
}

_BINARY_LEVELS = [
    ("||",),
    ("&&",),
    ("|",),
    ("^",),
    ("&",),
    ("==", "!="),
    ("<", ">", "<=", ">="),
    ("<<", ">>"),
    ("+", "-"),
    ("*", "/", "%"),
]


@dataclass
class Token:
    kind: str  # 'int' | 'name' | 'op' | 'eof'
    text: str
    loc: Loc


def tokenize(source: str) -> list[Token]:
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        loc = Loc(line, pos - line_start + 1)
        if m is None:
            raise ParseError(Diagnostic(f"unexpected character {source[pos]!r}", loc))
        kind = m.lastgroup
        text = m.group()
        if kind == "preproc":
            raise ParseError(
                Diagnostic(
                    "preprocessor directives are not supported; use 'const int NAME = value;'",
                    loc,
                )
            )
        if kind in ("int", "name", "op"):
            if kind == "name" and text in _FORBIDDEN:
                rule = _FORBIDDEN[text]
                raise RestrictionError(
                    Diagnostic(f"'{text}' violates restriction: {rule}", loc, rule=rule)
                )
            if kind == "op" and text == "->":
                raise RestrictionError(
                    Diagnostic(
                        f"'->' violates restriction: {E.RULE_POINTERS}", loc, rule=E.RULE_POINTERS
                    )
                )
            tokens.append(Token(kind, text, loc))
        nl = text.count("\n")
        if nl:
            line += nl
            line_start = m.start() + text.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", Loc(line, pos - line_start + 1)))
    return tokens


class Parser:
    def __init__(self, source: str):
        self.toks = tokenize(source)
        self.i = 0
        self.consts: dict[str, int] = {}
        self.fields: list[str] = []
        self.state: list[StateDecl] = []
        self.guard = None
        self.field_bases: list[tuple[str, Loc]] = []

    # -- token helpers --------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k=1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("op", "name")

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected '{text}' but found {self._describe(self.tok)}")
        return self.advance()

    def expect_name(self) -> Token:
        if self.tok.kind != "name":
            self.error(f"expected identifier but found {self._describe(self.tok)}")
        return self.advance()

    def error(self, msg: str, loc: Loc | None = None):
        raise ParseError(Diagnostic(msg, loc or self.tok.loc))

    def restriction(self, rule: str, what: str, loc: Loc):
        raise RestrictionError(Diagnostic(f"{what} violates restriction: {rule}", loc, rule=rule))

    @staticmethod
    def _describe(t: Token) -> str:
        return "end of input" if t.kind == "eof" else f"'{t.text}'"

    # -- top level ------------------------------------------------------
    def parse_program(self) -> ProgramAst:
        while True:
            t = self.tok
            if t.kind == "eof":
                self.error("missing packet transaction 'void NAME(struct Packet pkt) { ... }'")
            if self.at("const"):
                self.parse_const()
            elif self.at("struct"):
                self.parse_struct()
            elif self.at("int"):
                self.parse_state_decl()
            elif self.at("guard"):
                self.parse_guard()
            elif self.at("void"):
                prog = self.parse_transaction()
                if self.tok.kind != "eof":
                    self.error("unexpected tokens after the packet transaction")
                return prog
            else:
                self.error(f"unexpected {self._describe(t)} at top level")

    def parse_const(self):
        self.expect("const")
        self.expect("int")
        name = self.expect_name()
        self.expect("=")
        value = self.const_eval(self.parse_expr())
        self.expect(";")
        if name.text in self.consts:
            self.error(f"constant '{name.text}' redefined", name.loc)
        self.consts[name.text] = value

    def parse_struct(self):
        self.expect("struct")
        tag = self.expect_name()
        if tag.text != "Packet":
            self.error("only 'struct Packet' may be declared", tag.loc)
        if self.fields:
            self.error("'struct Packet' declared twice", tag.loc)
        self.expect("{")
        while not self.at("}"):
            self.expect("int")
            while True:
                if self.at("*"):
                    self.restriction(E.RULE_POINTERS, "pointer field", self.tok.loc)
                name = self.expect_name()
                if name.text in self.fields:
                    self.error(f"duplicate packet field '{name.text}'", name.loc)
                self.fields.append(name.text)
                if self.at("["):
                    self.error("array packet fields are not supported")
                if not self.at(","):
                    break
                self.advance()
            self.expect(";")
        self.expect("}")
        self.expect(";")

    def parse_state_decl(self):
        start = self.expect("int")
        if self.at("*"):
            self.restriction(E.RULE_POINTERS, "pointer declaration", self.tok.loc)
        name = self.expect_name()
        size = None
        if self.at("["):
            self.advance()
            size = self.const_eval(self.parse_expr())
            self.expect("]")
            if size <= 0:
                self.error(f"array '{name.text}' must have positive size", name.loc)
        init = 0
        if self.at("="):
            self.advance()
            if self.at("{"):
                self.advance()
                init = self.const_eval(self.parse_expr())
                self.expect("}")
            else:
                init = self.const_eval(self.parse_expr())
        self.expect(";")
        if any(d.name == name.text for d in self.state):
            self.error(f"state variable '{name.text}' redefined", name.loc)
        self.state.append(StateDecl(name.text, init, size, start.loc))

    def parse_guard(self):
        t = self.expect("guard")
        if self.guard is not None:
            self.error("only one guard may be given", t.loc)
        self.expect("(")
        self.guard = self.parse_expr()
        self.expect(")")
        if self.at(";"):
            self.advance()

    def parse_transaction(self) -> ProgramAst:
        start = self.expect("void")
        name = self.expect_name()
        self.expect("(")
        self.expect("struct")
        tag = self.expect_name()
        if tag.text != "Packet":
            self.error("transaction argument must be 'struct Packet'", tag.loc)
        if self.at("*"):
            self.restriction(E.RULE_POINTERS, "pointer argument", self.tok.loc)
        param = self.expect_name()
        self.expect(")")
        body = self.parse_block()
        for base, loc in self.field_bases:
            if base != param.text:
                raise ParseError(Diagnostic(f"unknown identifier '{base}'", loc))
        return ProgramAst(
            name=name.text,
            packet_param=param.text,
            packet_fields=tuple(self.fields),
            consts=tuple(self.consts.items()),
            state=tuple(self.state),
            body=tuple(body),
            guard=self.guard,
            loc=start.loc,
        )

    # -- statements -----------------------------------------------------
    def parse_block(self) -> list:
        self.expect("{")
        out = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                self.error("unterminated block")
            out.extend(self.parse_stmt())
        self.expect("}")
        return out

    def parse_stmt(self) -> list:
        t = self.tok
        if self.at("{"):
            return self.parse_block()
        if self.at(";"):
            self.advance()
            return []
        if self.at("if"):
            return [self.parse_if()]
        if self.at("int"):
            self.error("local variable declarations are not supported; use packet fields")
        if self.at("return"):
            self.error("'return' is not supported in a packet transaction")
        if self.at("++") or self.at("--"):
            op = self.advance().text
            target = self.parse_lvalue()
            self.expect(";")
            return [self._incdec(target, op, t.loc)]
        if self.at("*"):
            self.restriction(E.RULE_POINTERS, "pointer dereference", t.loc)
        target = self.parse_lvalue()
        if self.at("++") or self.at("--"):
            op = self.advance().text
            self.expect(";")
            return [self._incdec(target, op, t.loc)]
        if self.at("+=") or self.at("-="):
            op = self.advance().text[0]
            value = self.parse_expr()
            self.expect(";")
            return [Assign(target, Binary(op, target, value, t.loc), t.loc)]
        self.expect("=")
        value = self.parse_expr()
        self.expect(";")
        return [Assign(target, value, t.loc)]

    @staticmethod
    def _incdec(target, op, loc):
        return Assign(target, Binary(op[0], target, IntLit(1, loc), loc), loc)

    def parse_if(self) -> If:
        t = self.expect("if")
        self.expect("(")
        cond = self.parse_expr()
        self.expect(")")
        then = self.parse_stmt()
        else_ = []
        if self.at("else"):
            self.advance()
            else_ = self.parse_stmt()
        return If(cond, tuple(then), tuple(else_), t.loc)

    def parse_lvalue(self):
        t = self.tok
        if t.kind != "name":
            self.error(f"expected assignment target but found {self._describe(t)}")
        e = self.parse_primary()
        if not isinstance(e, (Field, StateRef)):
            self.error("invalid assignment target", t.loc)
        return e

    # -- expressions ----------------------------------------------------
    def parse_expr(self):
        cond = self.parse_binary(0)
        if self.at("?"):
            t = self.advance()
            then = self.parse_expr()
            self.expect(":")
            else_ = self.parse_expr()
            return Ternary(cond, then, else_, t.loc)
        return cond

    def parse_binary(self, level: int):
        if level == len(_BINARY_LEVELS):
            return self.parse_unary()
        left = self.parse_binary(level + 1)
        while self.tok.kind == "op" and self.tok.text in _BINARY_LEVELS[level]:
            t = self.advance()
            right = self.parse_binary(level + 1)
            left = Binary(t.text, left, right, t.loc)
        return left

    def parse_unary(self):
        t = self.tok
        if t.kind == "op" and t.text in ("-", "!", "~", "+"):
            self.advance()
            operand = self.parse_unary()
            if t.text == "+":
                return operand
            if t.text == "-" and isinstance(operand, IntLit):
                return IntLit(wrap32(-operand.value), t.loc)
            return Unary(t.text, operand, t.loc)
        if t.kind == "op" and t.text in ("*", "&"):
            what = "pointer dereference" if t.text == "*" else "address-of operator"
            self.restriction(E.RULE_POINTERS, what, t.loc)
        if t.kind == "op" and t.text in ("++", "--"):
            self.error("increment/decrement is only allowed as a statement")
        return self.parse_primary()

    def parse_primary(self):
        t = self.tok
        if t.kind == "int":
            self.advance()
            return IntLit(wrap32(int(t.text, 0)), t.loc)
        if self.at("("):
            self.advance()
            e = self.parse_expr()
            self.expect(")")
            return e
        if t.kind != "name":
            self.error(f"expected expression but found {self._describe(t)}")
        self.advance()
        if t.text in ("true", "false"):
            return IntLit(1 if t.text == "true" else 0, t.loc)
        if self.at("."):
            self.advance()
            fname = self.expect_name()
            self.field_bases.append((t.text, t.loc))
            return Field(fname.text, t.loc)
        if self.at("("):
            self.advance()
            args = []
            if not self.at(")"):
                args.append(self.parse_expr())
                while self.at(","):
                    self.advance()
                    args.append(self.parse_expr())
            self.expect(")")
            return Call(t.text, tuple(args), t.loc)
        if self.at("["):
            self.advance()
            idx = self.parse_expr()
            self.expect("]")
            return StateRef(t.text, idx, t.loc)
        if t.text in self.consts:
            return IntLit(self.consts[t.text], t.loc)
        return StateRef(t.text, None, t.loc)

    def const_eval(self, e) -> int:
        if isinstance(e, IntLit):
            return e.value
        if isinstance(e, Unary):
            return unop(e.op, self.const_eval(e.operand))
        if isinstance(e, Binary):
            return binop(e.op, self.const_eval(e.left), self.const_eval(e.right))
        if isinstance(e, Ternary):
            c = self.const_eval(e.cond)
            return self.const_eval(e.then if c else e.else_)
        loc = getattr(e, "loc", None)
        raise ParseError(Diagnostic("expected a constant expression", loc))


def parse(source: str) -> ProgramAst:
    """Parse Domino source text into a ``ProgramAst``."""
    return Parser(source).parse_program()


def parse_expression(source: str, packet_param: str = "pkt", consts=()):
    """Parse a standalone expression (used for guards stored in pipeline files)."""
    p = Parser(source)
    p.consts = dict(consts)
    e = p.parse_expr()
    if p.tok.kind != "eof":
        p.error("unexpected tokens after expression")
    for base, loc in p.field_bases:
        if base != packet_param:
            raise ParseError(Diagnostic(f"unknown identifier '{base}'", loc))
    return e
