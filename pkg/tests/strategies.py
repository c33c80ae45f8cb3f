"""Hypothesis strategies for random valid transactions.

Programs use packet fields ``a b c d``.  ``a`` only ever serves as the array
index and is never assigned, which keeps every generated program inside the
language's array-index restriction.  State: scalars ``s0``, ``s1`` and an
8-element array ``arr``.
"""

from __future__ import annotations

from hypothesis import strategies as st

from domino.ast import Assign, Binary, Call, Field, If, IntLit, ProgramAst, StateDecl, StateRef, Ternary, Unary
from domino.semantics import BINARY_OPS, UNARY_OPS

FIELDS = ("a", "b", "c", "d")
WRITABLE = ("b", "c", "d")
STATE = (StateDecl("s0", 0), StateDecl("s1", 3), StateDecl("arr", 0, 8))

ints = st.integers(min_value=0, max_value=20)
packet_values = st.integers(min_value=-(1 << 31), max_value=(1 << 31) - 1)
small_values = st.integers(min_value=-40, max_value=40)


def _state_ref(name):
    return StateRef(name, Field("a")) if name == "arr" else StateRef(name)


def leaves(with_state=True):
    opts = [ints.map(IntLit), st.sampled_from(FIELDS).map(Field)]
    if with_state:
        opts.append(st.sampled_from(("s0", "s1", "arr")).map(_state_ref))
    return st.one_of(*opts)


def expressions(with_state=True, max_leaves=6):
    def extend(children):
        return st.one_of(
            st.builds(Binary, st.sampled_from(BINARY_OPS), children, children),
            # the parser folds ``-<literal>`` into a negative literal
            st.builds(Unary, st.sampled_from(UNARY_OPS), children).filter(
                lambda u: not (u.op == "-" and isinstance(u.operand, IntLit))
            ),
            st.builds(Ternary, children, children, children),
            st.builds(lambda x, y: Call("hash2", (x, y)), children, children),
        )

    return st.recursive(leaves(with_state), extend, max_leaves=max_leaves)


def _targets():
    return st.one_of(
        st.sampled_from(WRITABLE).map(Field),
        st.sampled_from(("s0", "s1", "arr")).map(_state_ref),
    )


def statements(depth=2):
    assign = st.builds(Assign, _targets(), expressions())
    if depth == 0:
        return assign
    inner = st.lists(statements(depth - 1), min_size=0, max_size=3).map(tuple)
    branch = st.builds(If, expressions(max_leaves=3), inner, inner)
    return st.one_of(assign, assign, branch)


@st.composite
def programs(draw, max_stmts=6, guards=True):
    body = tuple(draw(st.lists(statements(), min_size=1, max_size=max_stmts)))
    guard = None
    if guards and draw(st.booleans()):
        guard = draw(expressions(with_state=False, max_leaves=3))
    return ProgramAst("txn", "pkt", FIELDS, (), STATE, body, guard)


def packets(lo=-40, hi=40):
    vals = st.one_of(st.integers(min_value=lo, max_value=hi), packet_values)
    return st.fixed_dictionaries({f: vals for f in FIELDS})
