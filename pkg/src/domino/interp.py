"""Sequential interpreter for transaction bodies at any normalization stage.

Packets and state are plain dicts.  Array state is a list; indices are reduced
modulo the array size at access time.
"""

from __future__ import annotations

from .ast import Assign, Binary, Call, Field, If, IntLit, ProgramAst, StateRef, Ternary, Unary
from .semantics import binop, call_intrinsic, unop


class EvalError(Exception):
    pass


def initial_state(prog: ProgramAst) -> dict:
    state = {}
    for d in prog.state:
        state[d.name] = d.init if d.size is None else [d.init] * d.size
    return state


def eval_expr(e, pkt: dict, state: dict, seed: int = 0) -> int:
    if isinstance(e, IntLit):
        return e.value
    if isinstance(e, Field):
        try:
            return pkt[e.name]
        except KeyError:
            raise EvalError(f"packet field '{e.name}' read before it was written") from None
    if isinstance(e, StateRef):
        v = state[e.name]
        if e.index is None:
            return v
        return v[eval_expr(e.index, pkt, state, seed) % len(v)]
    if isinstance(e, Binary):
        return binop(e.op, eval_expr(e.left, pkt, state, seed), eval_expr(e.right, pkt, state, seed))
    if isinstance(e, Unary):
        return unop(e.op, eval_expr(e.operand, pkt, state, seed))
    if isinstance(e, Ternary):
        # both arms are pure, so eager evaluation order does not matter
        c = eval_expr(e.cond, pkt, state, seed)
        return eval_expr(e.then if c else e.else_, pkt, state, seed)
    if isinstance(e, Call):
        args = [eval_expr(a, pkt, state, seed) for a in e.args]
        return call_intrinsic(e.name, args, seed)
    raise EvalError(f"cannot evaluate {e!r}")


def exec_body(body, pkt: dict, state: dict, seed: int = 0) -> None:
    """Execute statements in order, mutating ``pkt`` and ``state``."""
    for s in body:
        if isinstance(s, Assign):
            v = eval_expr(s.value, pkt, state, seed)
            t = s.target
            if isinstance(t, Field):
                pkt[t.name] = v
            elif t.index is None:
                state[t.name] = v
            else:
                arr = state[t.name]
                arr[eval_expr(t.index, pkt, state, seed) % len(arr)] = v
        elif isinstance(s, If):
            if eval_expr(s.cond, pkt, state, seed):
                exec_body(s.then, pkt, state, seed)
            else:
                exec_body(s.else_, pkt, state, seed)
        else:
            raise EvalError(f"cannot execute {s!r}")


def guard_matches(prog: ProgramAst, pkt: dict, seed: int = 0) -> bool:
    return prog.guard is None or eval_expr(prog.guard, pkt, {}, seed) != 0


def run_transaction(prog: ProgramAst, pkt: dict, state: dict, seed: int = 0, body=None) -> dict:
    """Run one packet through the transaction; returns the output packet
    (declared fields only).  ``state`` is updated in place."""
    work = {f: pkt.get(f, 0) for f in prog.packet_fields}
    if guard_matches(prog, work, seed):
        exec_body(prog.body if body is None else body, work, state, seed)
    return {f: work[f] for f in prog.packet_fields}

