"""Lowering of a validated transaction to straight-line three-address code.

Passes run in a fixed order, each satisfying the next one's precondition:

1. ``remove_branches``  -- if/else becomes conditional assignments
2. ``rewrite_state_flanks`` -- state is read once into a packet temporary and
   written back once at the end
3. ``to_ssa``  -- every packet field is assigned at most once
4. ``to_three_address`` -- expressions are flattened through temporaries

No pass folds constants, removes dead code, or merges temporaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ast import (
    Assign,
    Binary,
    Call,
    Field,
    If,
    IntLit,
    ProgramAst,
    StateRef,
    Ternary,
    Unary,
    fields_read,
    is_atomic,
    map_expr,
    walk,
)
from .interp import exec_body, guard_matches
from .printer import format_program


class NameGen:
    """Deterministic fresh-name source that never reuses a taken name."""

    def __init__(self, taken=()):
        self.taken = set(taken)
        self._next_temp = 0

    def claim(self, name: str) -> str:
        while name in self.taken:
            name += "_"
        self.taken.add(name)
        return name

    def temp(self) -> str:
        while True:
            name = f"_t{self._next_temp}"
            self._next_temp += 1
            if name not in self.taken:
                self.taken.add(name)
                return name

    def version(self, base: str, k: int) -> str:
        sep = "_" if base[-1].isdigit() else ""
        return self.claim(f"{base}{sep}{k}")


def names_for(prog: ProgramAst) -> NameGen:
    # state lives in its own namespace, so ``pkt.<var>`` is free for the flank
    return NameGen(prog.packet_fields)


# -- pass 1: branch removal ----------------------------------------------------


def remove_branches(body, names: NameGen | None = None) -> list[Assign]:
    """Replace every ``if`` by a hoisted condition temporary and conditional
    assignments, innermost first.  Condition temporaries are themselves
    assigned unconditionally: they are fresh and side-effect free."""
    names = names or NameGen()
    cond_temps: set[str] = set()

    def guarded(a: Assign, tmp: str, polarity: bool) -> Assign:
        if isinstance(a.target, Field) and a.target.name in cond_temps:
            return a
        c = Field(tmp)
        if polarity:
            value = Ternary(c, a.value, a.target)
        else:
            value = Ternary(c, a.target, a.value)
        return Assign(a.target, value, a.loc)

    def convert(stmts) -> list[Assign]:
        out = []
        for s in stmts:
            if isinstance(s, Assign):
                out.append(s)
                continue
            then = convert(s.then)
            else_ = convert(s.else_)
            tmp = names.temp()
            cond_temps.add(tmp)
            out.append(Assign(Field(tmp), s.cond, s.loc))
            out.extend(guarded(a, tmp, True) for a in then)
            out.extend(guarded(a, tmp, False) for a in else_)
        return out

    return convert(body)


# -- pass 2: state flanks --------------------------------------------------------


@dataclass(frozen=True)
class Flank:
    var: str
    index: object  # atomic expression or None for scalars
    temp: str  # packet temporary holding the state value


def _state_refs(stmt: Assign):
    for e in (stmt.target, stmt.value):
        for n in walk(e):
            if isinstance(n, StateRef):
                yield n


def rewrite_state_flanks(body, names: NameGen | None = None):
    """Confine state access to one read flank and one write flank per state
    variable.  Returns ``(body, flanks)``."""
    names = names or NameGen()
    first_use: dict[str, int] = {}
    index_of: dict[str, object] = {}
    for i, s in enumerate(body):
        for n in _state_refs(s):
            if n.name not in first_use:
                first_use[n.name] = i
                index_of[n.name] = n.index

    flanks: list[Flank] = []
    before: dict[int, list[Assign]] = {}
    for var, i in first_use.items():
        idx = index_of[var]
        pre = before.setdefault(i, [])
        if idx is not None and not is_atomic(idx):
            t = names.temp()
            pre.append(Assign(Field(t), idx))
            idx = Field(t)
        temp = names.claim(var)
        flanks.append(Flank(var, idx, temp))
        pre.append(Assign(Field(temp), StateRef(var, idx)))

    temp_of = {f.var: f.temp for f in flanks}

    def replace(e):
        if isinstance(e, StateRef):
            return Field(temp_of[e.name], e.loc)
        return e

    out = []
    for i, s in enumerate(body):
        out.extend(before.get(i, ()))
        out.append(Assign(map_expr(s.target, replace), map_expr(s.value, replace), s.loc))
    for f in flanks:
        out.append(Assign(StateRef(f.var, f.index), Field(f.temp)))
    return out, flanks


# -- pass 3: SSA ------------------------------------------------------------------


def to_ssa(body, names: NameGen | None = None):
    """Rename every packet-field assignment to a fresh version.

    Returns ``(body, current, version_base)`` where ``current`` maps each base
    name to its final version and ``version_base`` maps versions back.
    """
    names = names or NameGen()
    current: dict[str, str] = {}
    counter: dict[str, int] = {}
    version_base: dict[str, str] = {}

    def rename(e):
        if isinstance(e, Field) and e.name in current:
            return Field(current[e.name], e.loc)
        return e

    out = []
    for s in body:
        value = map_expr(s.value, rename)
        t = s.target
        if isinstance(t, Field):
            k = counter.get(t.name, 0)
            counter[t.name] = k + 1
            v = names.version(t.name, k)
            version_base[v] = t.name
            current[t.name] = v
            target = Field(v, t.loc)
        else:
            target = map_expr(t, rename)
        out.append(Assign(target, value, s.loc))
    return out, current, version_base


# -- pass 4: three-address code ---------------------------------------------------

STATE_READ = "state_read"
STATE_WRITE = "state_write"
COMPUTE = "compute"
CONDITIONAL = "conditional"
INTRINSIC = "intrinsic"
MOVE = "move"


def stmt_kind(s: Assign) -> str:
    if isinstance(s.target, StateRef):
        return STATE_WRITE
    v = s.value
    if isinstance(v, StateRef):
        return STATE_READ
    if isinstance(v, Call) or isinstance(v, Binary) and (
        isinstance(v.left, Call) or isinstance(v.right, Call)
    ):
        return INTRINSIC
    if isinstance(v, Ternary):
        return CONDITIONAL
    if is_atomic(v):
        return MOVE
    if isinstance(v, Binary):
        return COMPUTE
    raise ValueError(f"statement is not in three-address form: {s!r}")


def is_three_address(s: Assign) -> bool:
    t, v = s.target, s.value
    if isinstance(t, StateRef):
        if t.index is not None and not is_atomic(t.index):
            return False
        return is_atomic(v) or isinstance(v, Ternary) and all(
            is_atomic(x) for x in (v.cond, v.then, v.else_)
        )
    if isinstance(v, StateRef):
        return v.index is None or is_atomic(v.index)
    if is_atomic(v):
        return True
    if isinstance(v, Call):
        return all(is_atomic(a) for a in v.args)
    if isinstance(v, Ternary):
        return all(is_atomic(x) for x in (v.cond, v.then, v.else_))
    if isinstance(v, Binary):
        calls = [x for x in (v.left, v.right) if isinstance(x, Call)]
        if len(calls) > 1:
            return False
        for x in (v.left, v.right):
            if isinstance(x, Call):
                if not all(is_atomic(a) for a in x.args):
                    return False
            elif not is_atomic(x):
                return False
        return True
    return False


def _flatten(body, names: NameGen) -> list[Assign]:
    out: list[Assign] = []

    def operand(e, allow_call=False):
        if is_atomic(e):
            return e
        if allow_call and isinstance(e, Call):
            return Call(e.name, tuple(operand(a) for a in e.args), e.loc)
        t = names.temp()
        emit(Field(t), e)
        return Field(t)

    def emit(target, e, loc=None):
        if isinstance(target, StateRef):
            if isinstance(e, Ternary):
                e = Ternary(operand(e.cond), operand(e.then), operand(e.else_), e.loc)
            else:
                e = operand(e)
        elif isinstance(e, StateRef) or is_atomic(e):
            pass
        elif isinstance(e, Call):
            e = Call(e.name, tuple(operand(a) for a in e.args), e.loc)
        elif isinstance(e, Unary):
            x = operand(e.operand)
            if e.op == "-":
                e = Binary("-", IntLit(0), x, e.loc)
            elif e.op == "!":
                e = Binary("==", x, IntLit(0), e.loc)
            else:
                e = Binary("^", x, IntLit(-1), e.loc)
        elif isinstance(e, Binary):
            left = operand(e.left, allow_call=True)
            right = operand(e.right, allow_call=not isinstance(left, Call))
            e = Binary(e.op, left, right, e.loc)
        elif isinstance(e, Ternary):
            e = Ternary(operand(e.cond), operand(e.then), operand(e.else_), e.loc)
        out.append(Assign(target, e, loc))

    for s in body:
        emit(s.target, s.value, s.loc)
    return out


def _same_scc_fields(stmts, i) -> set[str]:
    """Fields defined in the dependency SCC of statement ``i``, other than
    state read flanks (whose values leave an atom as the old state)."""
    from .pipeline import dependency_succ, tarjan_sccs

    succ, _ = dependency_succ(stmts)
    comp = next(c for c in tarjan_sccs(len(stmts), [sorted(x) for x in succ]) if i in c)
    return {
        stmts[j].target.name
        for j in comp
        if isinstance(stmts[j].target, Field) and not isinstance(stmts[j].value, StateRef)
    }


def _propagate_state_copies(stmts: list[Assign], state_versions: set[str]) -> list[Assign]:
    """Forward a state temporary's copy or conditional definition into the
    copies and write flanks that consume it, dropping the definition once it
    has no other reader.

    A copy into an ordinary field only receives the expression when none of
    its operands are intermediate results computed inside the same stateful
    update; otherwise those internals would have to leave the atom.
    """
    stmts = list(stmts)
    i = 0
    while i < len(stmts):
        s = stmts[i]
        v = s.target.name if isinstance(s.target, Field) else None
        forwardable = v in state_versions and (
            is_atomic(s.value) or isinstance(s.value, Ternary)
        )
        if not forwardable:
            i += 1
            continue
        users = [j for j in range(i + 1, len(stmts)) if v in stmt_reads(stmts[j])]
        ok = users and all(stmts[j].value == Field(v) for j in users)
        if ok and any(isinstance(stmts[j].target, Field) for j in users):
            internal = _same_scc_fields(stmts, i)
            ok = not any(f in internal for f in fields_read(s.value))
        if ok:
            for j in users:
                stmts[j] = Assign(stmts[j].target, s.value, stmts[j].loc)
            del stmts[i]
            continue
        i += 1
    return stmts


def stmt_reads(s: Assign) -> list[str]:
    names = fields_read(s.value)
    if isinstance(s.target, StateRef) and s.target.index is not None:
        names += [n for n in fields_read(s.target.index) if n not in names]
    return names


def to_three_address(body, names: NameGen | None = None, state_versions=frozenset()):
    """Flatten SSA statements to three-address form.  ``state_versions`` are
    the SSA names of state temporaries whose copies may be forwarded into
    write flanks."""
    names = names or NameGen()
    return _propagate_state_copies(_flatten(body, names), set(state_versions))


# -- driver --------------------------------------------------------------------


@dataclass
class NormalizedProgram:
    prog: ProgramAst
    stmts: tuple
    flanks: dict  # state var -> (read temp version, write flank statement)
    field_versions: frozenset
    final_fields: dict  # declared field -> field holding its final value
    passes: dict = field(default_factory=dict, repr=False)  # pass name -> body

    def kinds(self) -> list[str]:
        return [stmt_kind(s) for s in self.stmts]

    def run(self, pkt: dict, state: dict, seed: int = 0) -> dict:
        """Execute one packet sequentially; returns declared output fields."""
        prog = self.prog
        work = {f: pkt.get(f, 0) for f in prog.packet_fields}
        if guard_matches(prog, work, seed):
            exec_body(self.stmts, work, state, seed)
            return {f: work[self.final_fields[f]] for f in prog.packet_fields}
        return work

    def dump(self, pass_name: str) -> str:
        body = self.passes[pass_name]
        temps = []
        for s in body:
            if isinstance(s.target, Field) and s.target.name not in temps:
                temps.append(s.target.name)
        return format_program(self.prog, body=body, extra_fields=temps)


PASS_NAMES = ("branch", "flank", "ssa", "tac")


def normalize(prog: ProgramAst) -> NormalizedProgram:
    """Run all four passes on a validated program."""
    names = names_for(prog)
    branch_free = remove_branches(prog.body, names)
    flanked, flanks = rewrite_state_flanks(branch_free, names)
    ssa, current, version_base = to_ssa(flanked, names)
    state_temps = {f.temp for f in flanks}
    state_versions = {v for v, base in version_base.items() if base in state_temps}
    tac = to_three_address(ssa, names, state_versions)

    flank_map = {}
    for f in flanks:
        read_temp = next(
            s.target.name
            for s in tac
            if isinstance(s.value, StateRef) and s.value.name == f.var
        )
        write = next(s for s in tac if isinstance(s.target, StateRef) and s.target.name == f.var)
        flank_map[f.var] = (read_temp, write)

    versions = frozenset(s.target.name for s in tac if isinstance(s.target, Field))
    finals = {f: current.get(f, f) for f in prog.packet_fields}
    return NormalizedProgram(
        prog=prog,
        stmts=tuple(tac),
        flanks=flank_map,
        field_versions=versions,
        final_fields=finals,
        passes={"branch": branch_free, "flank": flanked, "ssa": ssa, "tac": list(tac)},
    )


__all__ = [
    "COMPUTE",
    "CONDITIONAL",
    "INTRINSIC",
    "MOVE",
    "STATE_READ",
    "STATE_WRITE",
    "Flank",
    "NameGen",
    "NormalizedProgram",
    "PASS_NAMES",
    "is_three_address",
    "normalize",
    "remove_branches",
    "rewrite_state_flanks",
    "stmt_kind",
    "stmt_reads",
    "to_ssa",
    "to_three_address",
]
