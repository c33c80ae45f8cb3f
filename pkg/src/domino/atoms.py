"""Atom templates: parameterized straight-line programs with holes.

A template body is a JSON-friendly expression tree.  Node types:

    {"t": "state", "i": k}           state slot k (value before the update)
    {"t": "field", "i": k}           packet operand slot k
    {"t": "const", "v": c}
    {"t": "hole", "hole": h}         the integer value of constant hole h
    {"t": "operand", "hole": h}      state slot, field slot or constant,
                                     picked by operand hole h
    {"t": "bin", "op": o, "l": a, "r": b}
    {"t": "rel", "hole": h, "l": a, "r": b}    relation picked by hole h
    {"t": "mux", "hole": h, "alts": [...]}     alternative picked by hole h
    {"t": "cond", "c": p, "a": x, "b": y}
    {"t": "alu", "hole": h, "ops": [...], "args": [a, b, c]}
    {"t": "call", "hole": h, "fns": [...], "args": [...]}

Stateful templates update every state slot in parallel from the pre-state.
Stateless and intrinsic templates compute a single destination field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .semantics import (
    binop,
    binop_v,
    call_intrinsic,
    call_intrinsic_v,
    wrap32,
)

RELOPS = ("==", "!=", "<", ">", "<=", ">=")
KINDS = ("keep", "write", "add", "sub")
STATELESS_OPS = (
    "mov", "+", "-", "<<", ">>", "&", "|", "^", "&&", "||",
    "==", "!=", "<", ">", "<=", ">=", "?:",
)  # fmt: skip
INTRINSIC_FNS = ("hash2", "hash3")
INTRINSIC_OPS = ("none", "+", "-", "%", "&", "|", "^", "<<", ">>")

MAX_FIELDS = 3
CONST_BITS = 5
IMM_BITS = 32


class EvalError(Exception):
    """An instance referenced a field or state it was not bound to."""


@dataclass(frozen=True)
class Hole:
    name: str
    kind: str  # choice | constant | operand | relop | kind
    size: int  # number of values; values are 0..size-1 except constants
    lo: int = 0  # constants range over lo..lo+size-1
    states: int = 0  # operand holes: leading state-slot choices
    fields: int = 0  # operand holes: field-slot choices
    bits: int = 0  # operand holes: width of the constant choices

    def domain(self):
        return range(self.lo, self.lo + self.size)

    def decode(self, v: int):
        """Operand value -> ("state", k) | ("field", k) | ("const", c)."""
        if v < self.states:
            return ("state", v)
        v -= self.states
        if v < self.fields:
            return ("field", v)
        v -= self.fields
        return ("const", v - (1 << (self.bits - 1)))

    def encode(self, kind: str, x: int) -> int:
        if kind == "state":
            return x
        if kind == "field":
            return self.states + x
        return self.states + self.fields + x + (1 << (self.bits - 1))

    def to_json(self):
        d = {"name": self.name, "kind": self.kind, "size": self.size}
        if self.lo:
            d["lo"] = self.lo
        if self.kind == "operand":
            d.update(states=self.states, fields=self.fields, bits=self.bits)
        return d


def operand_hole(name, states=0, fields=MAX_FIELDS, bits=CONST_BITS) -> Hole:
    return Hole(name, "operand", states + fields + (1 << bits), states=states, fields=fields, bits=bits)


@dataclass(frozen=True)
class AtomTemplate:
    name: str
    holes: tuple
    body: dict  # {"updates": [tree per state slot]} or {"dst": tree}
    n_state: int = 0
    n_fields: int = MAX_FIELDS
    rank: int | None = None  # position in the stateful hierarchy
    shape: dict | None = field(default=None, compare=False)  # search hints
    description: str = ""

    @property
    def stateful(self) -> bool:
        return self.n_state > 0

    def hole(self, name: str) -> Hole:
        return self._hole_map()[name]

    def _hole_map(self):
        return {h.name: h for h in self.holes}

    def space_size(self) -> int:
        n = 1
        for h in self.holes:
            n *= h.size
        return n

    def to_json(self) -> dict:
        d = {
            "name": self.name,
            "rank": self.rank,
            "n_state": self.n_state,
            "n_fields": self.n_fields,
            "description": self.description,
            "holes": [h.to_json() for h in self.holes],
            "body": self.body,
        }
        if self.shape is not None:
            d["shape"] = self.shape
        return d

    @classmethod
    def from_json(cls, d: dict) -> "AtomTemplate":
        holes = tuple(Hole(**h) for h in d["holes"])
        return cls(
            d["name"],
            holes,
            d["body"],
            d["n_state"],
            d["n_fields"],
            d.get("rank"),
            d.get("shape"),
            d.get("description", ""),
        )


# -- template construction -----------------------------------------------------


def _state(i):
    return {"t": "state", "i": i}


def _operand(name):
    return {"t": "operand", "hole": name}


def _leaf(path, slot, kinds, holes, n_fields, bits):
    kh = f"{path}.s{slot}.kind"
    ah = f"{path}.s{slot}.arg"
    holes.append(Hole(kh, "kind", len(kinds)))
    alts = []
    if len(kinds) > 1:
        holes.append(operand_hole(ah, 0, n_fields, bits))
    for k in kinds:
        if k == "keep":
            alts.append(_state(slot))
        elif k == "write":
            alts.append(_operand(ah))
        else:
            op = "+" if k == "add" else "-"
            alts.append({"t": "bin", "op": op, "l": _state(slot), "r": _operand(ah)})
    return {"t": "mux", "hole": kh, "alts": alts}


def _pred(name, holes, n_state, n_fields, bits):
    holes.append(Hole(f"{name}.rel", "relop", len(RELOPS)))
    holes.append(operand_hole(f"{name}.x", n_state, n_fields, bits))
    holes.append(operand_hole(f"{name}.y", 0, n_fields, bits))
    return {
        "t": "rel",
        "hole": f"{name}.rel",
        "l": _operand(f"{name}.x"),
        "r": _operand(f"{name}.y"),
    }


def predicated_template(
    name, depth, n_state, leaf_kinds, rank=None, n_fields=MAX_FIELDS, bits=CONST_BITS, description=""
) -> AtomTemplate:
    """Build a stateful template: a predicate tree of ``depth`` levels whose
    ``2**depth`` leaves each pick one update per state slot.

    ``leaf_kinds`` lists the allowed update kinds for each leaf, leaves in
    then-before-else order.  Holes are listed in pre-order so that
    lexicographic order on the hole vector is: first predicate, then-arm
    (predicate, then leaves), else-arm.
    """
    holes: list[Hole] = []

    def leaves(path, kinds):
        return [_leaf(path, s, kinds, holes, n_fields, bits) for s in range(n_state)]

    if depth == 0:
        updates = leaves("l", leaf_kinds[0])
    elif depth == 1:
        p = _pred("p1", holes, n_state, n_fields, bits)
        then = leaves("t", leaf_kinds[0])
        else_ = leaves("e", leaf_kinds[1])
        updates = [{"t": "cond", "c": p, "a": a, "b": b} for a, b in zip(then, else_)]
    elif depth == 2:
        p1 = _pred("p1", holes, n_state, n_fields, bits)
        p2t = _pred("p2t", holes, n_state, n_fields, bits)
        tt = leaves("tt", leaf_kinds[0])
        tf = leaves("tf", leaf_kinds[1])
        p2e = _pred("p2e", holes, n_state, n_fields, bits)
        et = leaves("et", leaf_kinds[2])
        ee = leaves("ee", leaf_kinds[3])
        updates = [
            {
                "t": "cond",
                "c": p1,
                "a": {"t": "cond", "c": p2t, "a": tt[s], "b": tf[s]},
                "b": {"t": "cond", "c": p2e, "a": et[s], "b": ee[s]},
            }
            for s in range(n_state)
        ]
    else:
        raise ValueError("predicate depth must be 0, 1 or 2")
    shape = {"depth": depth, "leaf_kinds": [list(k) for k in leaf_kinds], "bits": bits}
    return AtomTemplate(
        name, tuple(holes), {"updates": updates}, n_state, n_fields, rank, shape, description
    )


_RAW = ("keep", "write", "add")
_SUB = KINDS

STATEFUL_SPECS = (
    ("Write", 0, 1, [("keep", "write")], "Read or write a packet field/constant into one state variable."),
    ("RAW", 0, 1, [_RAW], "Add a packet field/constant to the state variable, or write one into it."),
    ("PRAW", 1, 1, [_RAW, ("keep",)], "Run RAW only if a predicate holds, else leave the state unchanged."),
    ("IfElseRAW", 1, 1, [_RAW, _RAW], "Two separate RAWs, one for each outcome of a predicate."),
    ("Sub", 1, 1, [_SUB, _SUB], "IfElseRAW where each arm may also subtract a packet field/constant."),
    ("Nested", 2, 1, [_SUB] * 4, "Sub with a second level of predicates: 4-way predication."),
    ("Pairs", 2, 2, [_SUB] * 4, "Nested over a pair of state variables; predicates may read both."),
)  # fmt: skip

STATEFUL_NAMES = tuple(s[0] for s in STATEFUL_SPECS)


def stateful_template(name: str, n_fields=MAX_FIELDS, bits=CONST_BITS) -> AtomTemplate:
    for rank, (n, depth, n_state, kinds, desc) in enumerate(STATEFUL_SPECS):
        if n == name:
            return predicated_template(n, depth, n_state, kinds, rank, n_fields, bits, desc)
    raise KeyError(f"unknown stateful atom '{name}'")


def stateless_template() -> AtomTemplate:
    holes = (Hole("op", "choice", len(STATELESS_OPS)),) + tuple(
        operand_hole(h, 0, MAX_FIELDS, IMM_BITS) for h in ("a", "b", "c")
    )
    body = {
        "dst": {
            "t": "alu",
            "hole": "op",
            "ops": list(STATELESS_OPS),
            "args": [_operand("a"), _operand("b"), _operand("c")],
        }
    }
    return AtomTemplate(
        "Stateless", holes, body, 0, MAX_FIELDS, None, None,
        "dst = a op b for arithmetic, logical and relational op, or dst = a ? b : c.",
    )  # fmt: skip


def intrinsic_template() -> AtomTemplate:
    holes = (
        Hole("fn", "choice", len(INTRINSIC_FNS)),
        operand_hole("x0", 0, MAX_FIELDS, IMM_BITS),
        operand_hole("x1", 0, MAX_FIELDS, IMM_BITS),
        operand_hole("x2", 0, MAX_FIELDS, IMM_BITS),
        Hole("op", "choice", len(INTRINSIC_OPS)),
        operand_hole("y", 0, MAX_FIELDS, IMM_BITS),
        Hole("swap", "choice", 2),
    )
    call = {"t": "call", "hole": "fn", "fns": list(INTRINSIC_FNS), "args": [_operand(h) for h in ("x0", "x1", "x2")]}
    body = {"dst": {"t": "hashop", "call": call, "op": "op", "ops": list(INTRINSIC_OPS), "y": _operand("y"), "swap": "swap"}}
    return AtomTemplate(
        "Intrinsic", holes, body, 0, MAX_FIELDS, None, None,
        "Hash unit: dst = hashK(args), optionally combined with one operand.",
    )  # fmt: skip


def alu_template(bits=CONST_BITS) -> AtomTemplate:
    """The add-or-subtract-a-constant atom used to illustrate templates."""
    holes = (Hole("choice", "choice", 2), Hole("constant", "constant", 1 << bits, lo=-(1 << (bits - 1))))
    c = {"t": "hole", "hole": "constant"}
    update = {
        "t": "mux",
        "hole": "choice",
        "alts": [
            {"t": "bin", "op": "+", "l": _state(0), "r": c},
            {"t": "bin", "op": "-", "l": _state(0), "r": c},
        ],
    }
    return AtomTemplate(
        "AddSub", holes, {"updates": [update]}, 1, 0, None, None,
        "if (choice) x = x - constant; else x = x + constant;",
    )  # fmt: skip


@dataclass(frozen=True)
class AtomCatalog:
    stateful: tuple
    stateless: AtomTemplate
    intrinsic: AtomTemplate

    def names(self) -> list[str]:
        return [t.name for t in self.stateful]

    def __getitem__(self, name: str) -> AtomTemplate:
        for t in self.stateful + (self.stateless, self.intrinsic):
            if t.name.lower() == name.lower():
                return t
        raise KeyError(f"unknown atom '{name}' (expected one of {', '.join(self.names())})")

    def rank(self, name: str) -> int:
        return self[name].rank

    def to_json(self) -> dict:
        return {
            "stateful": [t.to_json() for t in self.stateful],
            "stateless": self.stateless.to_json(),
            "intrinsic": self.intrinsic.to_json(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    @classmethod
    def from_json(cls, d: dict) -> "AtomCatalog":
        return cls(
            tuple(AtomTemplate.from_json(t) for t in d["stateful"]),
            AtomTemplate.from_json(d["stateless"]),
            AtomTemplate.from_json(d["intrinsic"]),
        )


@lru_cache(maxsize=None)
def catalog() -> AtomCatalog:
    """Write < RAW < PRAW < IfElseRAW < Sub < Nested < Pairs, plus the
    stateless ALU and the hash unit present in every target."""
    return AtomCatalog(
        tuple(stateful_template(n) for n in STATEFUL_NAMES),
        stateless_template(),
        intrinsic_template(),
    )


# -- evaluation ----------------------------------------------------------------


def eval_tree(node, tmpl: AtomTemplate, holes: dict, states, fields, seed=0, vec=False):
    """Evaluate a template tree.  ``states``/``fields`` are sequences of ints,
    or of int64 numpy arrays when ``vec`` is true."""
    bin_ = binop_v if vec else binop

    def ev(n):
        t = n["t"]
        if t == "state":
            return states[n["i"]]
        if t == "field":
            return fields[n["i"]]
        if t == "const":
            return n["v"]
        if t == "hole":
            return holes[n["hole"]]
        if t == "operand":
            return _operand_value(tmpl.hole(n["hole"]), holes[n["hole"]], states, fields)
        if t == "bin":
            return bin_(n["op"], ev(n["l"]), ev(n["r"]))
        if t == "rel":
            return bin_(RELOPS[holes[n["hole"]]], ev(n["l"]), ev(n["r"]))
        if t == "mux":
            return ev(n["alts"][holes[n["hole"]]])
        if t == "cond":
            c = ev(n["c"])
            if vec:
                return np.where(c != 0, ev(n["a"]), ev(n["b"]))
            return ev(n["a"]) if c else ev(n["b"])
        if t == "alu":
            op = n["ops"][holes[n["hole"]]]
            a = ev(n["args"][0])
            if op == "mov":
                return a
            if op == "?:":
                b, c = ev(n["args"][1]), ev(n["args"][2])
                return np.where(a != 0, b, c) if vec else (b if a else c)
            return bin_(op, a, ev(n["args"][1]))
        if t == "call":
            fn = n["fns"][holes[n["hole"]]]
            arity = 2 if fn == "hash2" else 3
            args = [ev(a) for a in n["args"][:arity]]
            return call_intrinsic_v(fn, args, seed) if vec else call_intrinsic(fn, args, seed)
        if t == "hashop":
            h = ev(n["call"])
            op = n["ops"][holes[n["op"]]]
            if op == "none":
                return h
            y = ev(n["y"])
            return bin_(op, y, h) if holes[n["swap"]] else bin_(op, h, y)
        raise ValueError(f"unknown template node '{t}'")

    return ev(node)


def _operand_value(h: Hole, v: int, states, fields):
    kind, x = h.decode(v)
    if kind == "state":
        return states[x]
    if kind == "field":
        if x >= len(fields) or fields[x] is None:
            raise EvalError(f"operand '{h.name}' selects unbound field slot {x}")
        return fields[x]
    return x


@dataclass
class AtomInstance:
    """A template with every hole assigned and its slots bound.

    ``exports`` lists ``(field, slot, "old" | "new")``: a stateful atom hands
    the pre- or post-update value of a state slot back to the packet.
    """

    template: AtomTemplate
    holes: dict
    fields: tuple = ()  # operand slot -> packet field
    state: tuple = ()  # state slot -> state variable
    addresses: tuple = ()  # state slot -> index field (None for scalars)
    dst: str | None = None
    exports: tuple = ()
    codelet: int | None = None

    @property
    def name(self) -> str:
        return self.template.name

    @property
    def stateful(self) -> bool:
        return self.template.stateful

    def reads(self) -> list[str]:
        """Packet fields this instance reads."""
        out = [f for f in self.fields if f is not None]
        out += [a for a in self.addresses if isinstance(a, str) and a not in out]
        return out

    def writes(self) -> list[str]:
        if self.dst is not None:
            return [self.dst]
        return [f for f, _, _ in self.exports]

    def to_json(self) -> dict:
        d = {"atom": self.template.name, "holes": dict(self.holes), "fields": list(self.fields)}
        if self.state:
            d["state"] = list(self.state)
            d["addresses"] = list(self.addresses)
            d["exports"] = [list(e) for e in self.exports]
        if self.dst is not None:
            d["dst"] = self.dst
        if self.codelet is not None:
            d["codelet"] = self.codelet
        return d

    @classmethod
    def from_json(cls, d: dict, cat: AtomCatalog | None = None) -> "AtomInstance":
        tmpl = (cat or catalog())[d["atom"]]
        return cls(
            tmpl,
            dict(d["holes"]),
            tuple(d.get("fields", ())),
            tuple(d.get("state", ())),
            tuple(d.get("addresses", ())),
            d.get("dst"),
            tuple(tuple(e) for e in d.get("exports", ())),
            d.get("codelet"),
        )

    def describe(self) -> str:
        """Readable rendering of the configured behaviour."""
        return render(self)


def fire(inst: AtomInstance, pkt: dict, load, store, seed: int = 0) -> dict:
    """Run one instance on one packet.

    ``load(var, index_value)`` / ``store(var, index_value, value)`` access
    the instance's own state.  Returns the packet fields written.
    """
    tmpl = inst.template
    try:
        fields = [pkt[f] if f is not None else None for f in inst.fields]
        if not tmpl.stateful:
            return {inst.dst: eval_tree(tmpl.body["dst"], tmpl, inst.holes, (), fields, seed)}
        idx = [pkt[a] if isinstance(a, str) else a for a in inst.addresses]
    except KeyError as e:
        raise EvalError(f"{tmpl.name} atom reads unbound field {e}") from None
    old = [load(v, i) for v, i in zip(inst.state, idx)]
    old += [0] * (tmpl.n_state - len(old))  # unbound slots are kept at 0
    new = [
        wrap32(eval_tree(u, tmpl, inst.holes, old, fields, seed)) for u in tmpl.body["updates"]
    ]
    for v, i, x in zip(inst.state, idx, new):
        store(v, i, x)
    return {f: (old[s] if when == "old" else new[s]) for f, s, when in inst.exports}


def evaluate(inst: AtomInstance, packet: dict, state: dict, seed: int = 0):
    """Pure single-packet semantics: returns ``(packet, state)`` copies."""
    state = {k: list(v) if isinstance(v, list) else v for k, v in state.items()}

    def load(var, i):
        v = state[var]
        return v[i % len(v)] if isinstance(v, list) else v

    def store(var, i, x):
        if isinstance(state[var], list):
            state[var][i % len(state[var])] = x
        else:
            state[var] = x

    if any(v not in state for v in inst.state):
        missing = [v for v in inst.state if v not in state]
        raise EvalError(f"unbound state {missing}")
    out = dict(packet)
    out.update(fire(inst, packet, load, store, seed))
    return out, state


# -- rendering -----------------------------------------------------------------


def render(inst: AtomInstance) -> str:
    tmpl = inst.template

    def opnd(hname):
        kind, x = tmpl.hole(hname).decode(inst.holes[hname])
        if kind == "state":
            return inst.state[x] if x < len(inst.state) else f"s{x}"
        if kind == "field":
            return f"pkt.{inst.fields[x]}" if x < len(inst.fields) else f"f{x}"
        return str(x)

    def ex(n):
        t = n["t"]
        if t == "state":
            return inst.state[n["i"]] if n["i"] < len(inst.state) else f"s{n['i']}"
        if t == "field":
            return f"pkt.{inst.fields[n['i']]}"
        if t == "const":
            return str(n["v"])
        if t == "hole":
            return str(inst.holes[n["hole"]])
        if t == "operand":
            return opnd(n["hole"])
        if t == "bin":
            return f"{ex(n['l'])} {n['op']} {ex(n['r'])}"
        if t == "rel":
            return f"{ex(n['l'])} {RELOPS[inst.holes[n['hole']]]} {ex(n['r'])}"
        if t == "mux":
            return ex(n["alts"][inst.holes[n["hole"]]])
        if t == "cond":
            return f"({ex(n['c'])}) ? ({ex(n['a'])}) : ({ex(n['b'])})"
        if t == "alu":
            op = n["ops"][inst.holes[n["hole"]]]
            a, b, c = (ex(x) for x in n["args"])
            if op == "mov":
                return a
            if op == "?:":
                return f"{a} ? {b} : {c}"
            return f"{a} {op} {b}"
        if t == "call":
            fn = n["fns"][inst.holes[n["hole"]]]
            k = 2 if fn == "hash2" else 3
            return f"{fn}({', '.join(ex(a) for a in n['args'][:k])})"
        if t == "hashop":
            h = ex(n["call"])
            op = n["ops"][inst.holes[n["op"]]]
            if op == "none":
                return h
            y = ex(n["y"])
            return f"{y} {op} {h}" if inst.holes[n["swap"]] else f"{h} {op} {y}"
        return "?"

    if not tmpl.stateful:
        return f"pkt.{inst.dst} = {ex(tmpl.body['dst'])};"
    lines = []
    for s, u in enumerate(tmpl.body["updates"]):
        name = inst.state[s] if s < len(inst.state) else f"s{s}"
        lines.append(f"{name} = {ex(u)};")
    for f, s, when in inst.exports:
        lines.append(f"pkt.{f} = {when}({inst.state[s]});")
    return "\n".join(lines)
