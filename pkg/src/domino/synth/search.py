"""Hole search: find an assignment making a template behave like a spec.

A ``Spec`` is any vectorized function from (state slots, operand fields) to
(new state slots, output fields).  Candidates are verified exhaustively over
a small value domain and then falsified against random full-width inputs;
counterexamples found that way are added to the table and the search reruns.

Predicated templates are searched structurally: predicates with identical
truth tables are interchangeable, and given the top-level predicate the two
arms are independent, so a greedy walk in hole order yields the
lexicographically smallest assignment.  Templates without that structure are
enumerated directly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..ast import Binary, Call, Field, IntLit, StateRef, Ternary, Unary, walk
from ..atoms import KINDS, RELOPS, AtomTemplate, Hole, eval_tree
from ..semantics import binop_v, call_intrinsic_v, unop_v, wrap32
from . import kernels

DEFAULT_BUDGET = 10**9  # max hole assignments for direct enumeration
ROW_CAP = 1 << 18
N_RANDOM = 10_000
MAX_ROUNDS = 8
MAX_CEX = 16  # counterexamples added per round


class SearchBudgetExceeded(Exception):
    pass


@dataclass(frozen=True)
class NoMapping:
    """No hole assignment implements the ``Spec``; not an error."""

    reason: str

    def __bool__(self):
        return False


@dataclass
class Spec:
    n_state: int
    n_fields: int
    fn: Callable  # (states, fields) -> (new_states, outputs); lists of int64 arrays
    n_outputs: int = 0
    constants: tuple = ()
    state_names: tuple = ()
    field_names: tuple = ()
    output_names: tuple = ()


@dataclass
class Mapping:
    holes: dict
    exports: tuple  # (output index, state slot, "old" | "new")
    rounds: int = 1
    rows: int = 0
    stats: dict = field(default_factory=dict)


# -- verification tables ----------------------------------------------------------


def value_domain(width: int, constants=()) -> list[int]:
    """All ``width``-bit signed values plus each constant and its neighbours."""
    lo = -(1 << (width - 1))
    vals = set(range(lo, -lo))
    for c in constants:
        vals.update(wrap32(c + d) for d in (-1, 0, 1))
    return sorted(vals)


def exhaustive_rows(n_vars: int, domain, base=None) -> np.ndarray:
    """Cartesian product table, shape ``(n_vars, len(domain)**n_vars)``.
    Falls back to ``base`` values when the full table would exceed ROW_CAP."""
    if n_vars == 0:
        return np.zeros((0, 1), dtype=np.int64)
    if len(domain) ** n_vars > ROW_CAP and base is not None:
        domain = base
    grids = np.meshgrid(*([np.asarray(domain, dtype=np.int64)] * n_vars), indexing="ij")
    return np.stack([g.reshape(-1) for g in grids])


def _table(n_vars, width, constants):
    # without neighbours when the full table would be too large
    small = sorted(set(value_domain(width)) | {wrap32(c) for c in constants})
    return exhaustive_rows(n_vars, value_domain(width, constants), base=small)


def random_rows(n_vars: int, n: int, rng, constants=()) -> np.ndarray:
    """Mixture of full-width, small and near-constant values."""
    full = rng.integers(-(1 << 31), 1 << 31, size=(n_vars, n), dtype=np.int64)
    small = rng.integers(-40, 41, size=(n_vars, n), dtype=np.int64)
    pick = rng.integers(0, 3, size=(n_vars, n))
    out = np.where(pick == 0, full, small)
    if constants:
        cs = np.asarray(sorted(set(constants)), dtype=np.int64)
        near = cs[rng.integers(0, len(cs), size=(n_vars, n))] + rng.integers(-1, 2, size=(n_vars, n))
        out = np.where(pick == 2, near, out)
    return out


def pack(mask: np.ndarray) -> np.ndarray:
    """Pack boolean rows ``(k, N)`` into ``(k, ceil(N/64))`` uint64 words."""
    k, n = mask.shape
    pad = (-n) % 64
    if pad:
        mask = np.concatenate([mask, np.zeros((k, pad), dtype=bool)], axis=1)
    return np.ascontiguousarray(np.packbits(mask, axis=1, bitorder="little")).view(np.uint64)


# -- codelet specs -------------------------------------------------------------------


def eval_expr_v(e, env: dict, state: dict, n: int, seed: int = 0):
    if isinstance(e, IntLit):
        return np.full(n, e.value, dtype=np.int64)
    if isinstance(e, Field):
        return env[e.name]
    if isinstance(e, StateRef):
        return state[e.name]
    if isinstance(e, Binary):
        return binop_v(e.op, eval_expr_v(e.left, env, state, n, seed), eval_expr_v(e.right, env, state, n, seed))
    if isinstance(e, Unary):
        return unop_v(e.op, eval_expr_v(e.operand, env, state, n, seed))
    if isinstance(e, Ternary):
        c = eval_expr_v(e.cond, env, state, n, seed)
        return np.where(c != 0, eval_expr_v(e.then, env, state, n, seed), eval_expr_v(e.else_, env, state, n, seed))
    if isinstance(e, Call):
        return call_intrinsic_v(e.name, [eval_expr_v(a, env, state, n, seed) for a in e.args], seed)
    raise TypeError(f"cannot evaluate {e!r}")


def codelet_spec(stmts, state_vars, inputs, outputs, seed: int = 0) -> Spec:
    """Spec of a codelet.  Array indices are dropped: the atom sees one
    element, selected by the address field outside the ``Spec``."""
    consts = []
    for s in stmts:
        for n in walk(s.value):
            if isinstance(n, IntLit) and n.value not in consts:
                consts.append(n.value)
    state_vars, inputs, outputs = tuple(state_vars), tuple(inputs), tuple(outputs)

    def fn(states, fields):
        n = states[0].shape[0] if states else fields[0].shape[0]
        env = dict(zip(inputs, fields))
        old = dict(zip(state_vars, states))
        new = dict(old)
        for s in stmts:
            v = eval_expr_v(s.value, env, old, n, seed)
            if isinstance(s.target, StateRef):
                new[s.target.name] = v
            else:
                env[s.target.name] = v
        return [new[v] for v in state_vars], [env[o] for o in outputs]

    return Spec(
        len(state_vars), len(inputs), fn, len(outputs), tuple(consts), state_vars, inputs, outputs
    )


# -- search -------------------------------------------------------------------------


def _resolve_exports(states, new, outs):
    exports = []
    for k, o in enumerate(outs):
        for s in range(len(states)):
            if np.array_equal(o, states[s]):
                exports.append((k, s, "old"))
                break
            if np.array_equal(o, new[s]):
                exports.append((k, s, "new"))
                break
        else:
            return None, k
    return tuple(exports), None


def _operand_values(h: Hole, n_state: int, n_fields: int) -> list[int]:
    """Encoded operand choices that are bound for this spec, ascending."""
    vals = [h.encode("state", i) for i in range(min(h.states, n_state))]
    vals += [h.encode("field", j) for j in range(min(h.fields, n_fields))]
    lo = -(1 << (h.bits - 1))
    vals += [h.encode("const", c) for c in range(lo, -lo)]
    return vals


def _operand_array(h: Hole, v: int, states, fields, n):
    kind, x = h.decode(v)
    if kind == "state":
        return states[x]
    if kind == "field":
        return fields[x]
    return np.full(n, x, dtype=np.int64)


def _pad_states(tmpl, states, n):
    return list(states) + [np.zeros(n, dtype=np.int64)] * (tmpl.n_state - len(states))


def brute_force(tmpl: AtomTemplate, spec: Spec, states, fields, new, budget=DEFAULT_BUDGET):
    """Lexicographic enumeration of the whole hole space."""
    n = states[0].shape[0] if states else (fields[0].shape[0] if fields else 1)
    domains = []
    for h in tmpl.holes:
        if h.kind == "operand":
            domains.append(_operand_values(h, spec.n_state, spec.n_fields))
        else:
            domains.append(list(h.domain()))
    size = 1
    for d in domains:
        size *= len(d)
    if size > budget:
        raise SearchBudgetExceeded(f"{tmpl.name}: {size} assignments exceed budget {budget}")
    padded = _pad_states(tmpl, states, n)
    names = [h.name for h in tmpl.holes]
    updates = tmpl.body["updates"][: spec.n_state]
    for combo in itertools.product(*domains):
        holes = dict(zip(names, combo))
        if all(
            np.array_equal(np.broadcast_to(eval_tree(u, tmpl, holes, padded, fields, vec=True), (n,)), new[s])
            for s, u in enumerate(updates)
        ):
            return holes
    return None


class _Structured:
    """Bitset tables for one predicated template and one verification table."""

    def __init__(self, tmpl: AtomTemplate, spec: Spec, states, fields, new):
        self.tmpl = tmpl
        self.spec = spec
        n = states[0].shape[0]
        self.n = n
        S, F = spec.n_state, spec.n_fields
        bits = tmpl.shape["bits"]
        arg_hole = next(h for h in tmpl.holes if h.name.endswith(".arg"))
        self.arg_hole = arg_hole

        # update universe, ordered by (kind, operand) like the hole vector
        self.universe = [(0, None)]
        for k in range(1, len(KINDS)):
            for v in _operand_values(arg_hole, S, F):
                self.universe.append((k, v))
        U = len(self.universe)
        agree = np.zeros((tmpl.n_state, U, (n + 63) // 64), dtype=np.uint64)
        ones = pack(np.ones((1, n), dtype=bool))[0]
        for s in range(tmpl.n_state):
            if s >= S:
                agree[s, :] = ones  # unbound slot: anything goes, keep wins
                continue
            rows = np.empty((U, n), dtype=bool)
            for ui, (k, v) in enumerate(self.universe):
                if k == 0:
                    val = states[s]
                else:
                    x = _operand_array(arg_hole, v, states, fields, n)
                    val = x if k == 1 else binop_v("+" if k == 2 else "-", states[s], x)
                rows[ui] = val == new[s]
            agree[s] = pack(rows)
        self.agree = agree
        self.all = ones
        self.preds, self.pred_keys = self._predicates(states, fields, bits)

    def _predicates(self, states, fields, bits):
        tmpl, spec, n = self.tmpl, self.spec, self.n
        if tmpl.shape["depth"] == 0:
            return np.zeros((0, len(self.all)), dtype=np.uint64), []
        xh, yh = tmpl.hole("p1.x"), tmpl.hole("p1.y")
        xs = _operand_values(xh, spec.n_state, spec.n_fields)
        ys = _operand_values(yh, spec.n_state, spec.n_fields)
        X = np.stack([_operand_array(xh, v, states, fields, n) for v in xs])
        Y = np.stack([_operand_array(yh, v, states, fields, n) for v in ys])
        seen = {}
        masks, keys = [], []
        for r, rel in enumerate(RELOPS):
            for i, xv in enumerate(xs):
                block = pack(binop_v(rel, X[i][None, :], Y) != 0)
                for j in range(len(ys)):
                    b = block[j].tobytes()
                    if b not in seen:
                        seen[b] = len(masks)
                        masks.append(block[j])
                        keys.append((r, xv, ys[j]))
        return np.ascontiguousarray(np.stack(masks)), keys

    def cands(self, kinds) -> np.ndarray:
        allowed = {KINDS.index(k) for k in kinds}
        return np.array([i for i, (k, _) in enumerate(self.universe) if k in allowed], dtype=np.int64)

    def leaves(self, region, path, kinds, holes) -> bool:
        cand = self.cands(kinds)
        for s in range(self.tmpl.n_state):
            ci = kernels.leaf_index(region, self.agree[s], cand)
            if ci < 0:
                return False
            k, v = self.universe[cand[ci]]
            holes[f"{path}.s{s}.kind"] = k
            arg = f"{path}.s{s}.arg"
            if arg in self.tmpl._hole_map():
                if v is None:  # unused by keep: smallest bound choice
                    v = _operand_values(self.tmpl.hole(arg), self.spec.n_state, self.spec.n_fields)[0]
                holes[arg] = v
        return True

    def set_pred(self, name, p, holes):
        r, x, y = self.pred_keys[p]
        holes[f"{name}.rel"], holes[f"{name}.x"], holes[f"{name}.y"] = r, x, y

    def solve(self):
        shape = self.tmpl.shape
        kinds = shape["leaf_kinds"]
        holes: dict = {}
        if shape["depth"] == 0:
            return holes if self.leaves(self.all, "l", kinds[0], holes) else None
        if shape["depth"] == 1:
            p = kernels.split(
                self.all, self.preds, self.agree, self.cands(kinds[0]), self.cands(kinds[1]), self.tmpl.n_state
            )
            if p < 0:
                return None
            self.set_pred("p1", p, holes)
            t, e = self.all & self.preds[p], self.all & ~self.preds[p]
            assert self.leaves(t, "t", kinds[0], holes) and self.leaves(e, "e", kinds[1], holes)
            return holes
        if any(list(k) != list(kinds[0]) for k in kinds):
            raise ValueError("depth-2 search expects the same leaf kinds everywhere")
        p, a, b = kernels.nested(self.all, self.preds, self.agree, self.cands(kinds[0]), self.tmpl.n_state)
        if p < 0:
            return None
        self.set_pred("p1", p, holes)
        t, e = self.all & self.preds[p], self.all & ~self.preds[p]
        self.set_pred("p2t", a, holes)
        assert self.leaves(t & self.preds[a], "tt", kinds[0], holes)
        assert self.leaves(t & ~self.preds[a], "tf", kinds[1], holes)
        self.set_pred("p2e", b, holes)
        assert self.leaves(e & self.preds[b], "et", kinds[2], holes)
        assert self.leaves(e & ~self.preds[b], "ee", kinds[3], holes)
        return holes


def _ordered(tmpl: AtomTemplate, holes: dict) -> dict:
    return {h.name: int(holes[h.name]) for h in tmpl.holes if h.name in holes}


def run_template(tmpl: AtomTemplate, holes: dict, states, fields, n: int, seed: int = 0):
    padded = _pad_states(tmpl, states, n)
    return [
        np.broadcast_to(eval_tree(u, tmpl, holes, padded, fields, seed, vec=True), (n,))
        for u in tmpl.body["updates"]
    ]


def _mismatches(tmpl, spec, holes, exports, states, fields, seed):
    n = states[0].shape[0] if states else fields[0].shape[0]
    new, outs = spec.fn(states, fields)
    got = run_template(tmpl, holes, states, fields, n, seed)
    bad = np.zeros(n, dtype=bool)
    for s in range(spec.n_state):
        bad |= got[s] != new[s]
    for k, s, when in exports:
        ref = states[s] if when == "old" else got[s]
        bad |= ref != outs[k]
    return np.flatnonzero(bad)


def synthesize(
    tmpl: AtomTemplate,
    spec: Spec,
    width: int = 2,
    seed: int = 0,
    n_random: int = N_RANDOM,
    max_rounds: int = MAX_ROUNDS,
    budget: int = DEFAULT_BUDGET,
):
    """Return a ``Mapping`` or ``NoMapping`` for ``spec`` on ``tmpl``."""
    if spec.n_state > tmpl.n_state:
        return NoMapping(f"needs {spec.n_state} state variables, {tmpl.name} holds {tmpl.n_state}")
    if spec.n_fields > tmpl.n_fields:
        return NoMapping(f"needs {spec.n_fields} packet operands, {tmpl.name} takes {tmpl.n_fields}")
    if tmpl.shape is None and tmpl.space_size() > budget:
        raise SearchBudgetExceeded(f"{tmpl.name}: hole space {tmpl.space_size()} exceeds {budget}")

    n_vars = spec.n_state + spec.n_fields
    table = _table(n_vars, width, spec.constants)
    rng = np.random.default_rng(seed)
    for rnd in range(1, max_rounds + 1):
        states = list(table[: spec.n_state])
        fields = list(table[spec.n_state :])
        new, outs = spec.fn(states, fields)
        exports, bad_out = _resolve_exports(states, new, outs)
        if exports is None:
            name = spec.output_names[bad_out] if spec.output_names else f"output {bad_out}"
            return NoMapping(f"'{name}' is neither the old nor the new value of a state variable")
        if tmpl.shape is None:
            holes = brute_force(tmpl, spec, states, fields, new, budget)
        else:
            holes = _Structured(tmpl, spec, states, fields, new).solve()
        if holes is None:
            return NoMapping(f"no configuration of {tmpl.name} implements the codelet")
        holes = _ordered(tmpl, holes)

        probe = random_rows(n_vars, n_random, rng, spec.constants)
        bad = _mismatches(
            tmpl, spec, holes, exports, list(probe[: spec.n_state]), list(probe[spec.n_state :]), seed
        )
        if len(bad) == 0:
            return Mapping(holes, exports, rnd, table.shape[1])
        table = np.concatenate([table, probe[:, bad[:MAX_CEX]]], axis=1)
    raise SearchBudgetExceeded(
        f"{tmpl.name}: candidates kept failing random falsification after {max_rounds} rounds"
    )


def verify_exhaustive(tmpl, spec, holes, exports, width=2, seed=0) -> bool:
    """Independent re-check of a mapping on the full small-width table."""
    n_vars = spec.n_state + spec.n_fields
    table = _table(n_vars, width, spec.constants)
    bad = _mismatches(
        tmpl, spec, holes, exports, list(table[: spec.n_state]), list(table[spec.n_state :]), seed
    )
    return len(bad) == 0
