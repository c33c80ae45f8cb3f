"""Code generation: codelets to atom instances under resource limits.

Compilation is all-or-nothing.  Either every codelet maps one-to-one onto an
atom of the target and the pipeline fits the machine, or a ``RejectionReport``
explains the first obstacle and no configuration is produced.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .ast import Binary, Call, Field, IntLit, ProgramAst, Ternary, fields_read
from .atoms import (
    INTRINSIC_FNS,
    INTRINSIC_OPS,
    STATELESS_OPS,
    AtomCatalog,
    AtomInstance,
    AtomTemplate,
    catalog,
)
from .frontend import load_program
from .normalize import normalize
from .pipeline import Codelet, CodeletPipeline, build_pipeline
from .printer import format_expr
from .synth.search import NoMapping, codelet_spec, synthesize

DOESNT_MAP = "doesn't map"
CONFIG_FORMAT = "domino-pipeline/1"


@dataclass(frozen=True)
class ResourceLimits:
    depth: int = 32
    stateless_per_stage: int = 300
    stateful_per_stage: int = 10

    def __post_init__(self):
        for name in ("depth", "stateless_per_stage", "stateful_per_stage"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    def to_json(self):
        return {
            "depth": self.depth,
            "stateless_per_stage": self.stateless_per_stage,
            "stateful_per_stage": self.stateful_per_stage,
        }


@dataclass
class RejectionReport:
    kind: str  # "unmappable codelet" | "depth exceeded"
    target: str
    detail: str
    codelet: Codelet | None = None
    packet_param: str = "pkt"

    def format(self) -> str:
        lines = [f"rejected for target {self.target}: {self.kind}: {self.detail}"]
        if self.codelet is not None:
            lines.append(f"codelet {self.codelet.id} (stage {self.codelet.stage}):")
            lines.extend("  " + ln for ln in self.codelet.source(self.packet_param).split("\n"))
        return "\n".join(lines)

    def __bool__(self):
        return False


class CompilationRejected(Exception):
    def __init__(self, report: RejectionReport):
        super().__init__(report.format())
        self.report = report


class ConfigError(ValueError):
    """A pipeline configuration is malformed or inconsistent."""


# -- codelet mapping ----------------------------------------------------------------


def _bind_operand(hole, e, fields: list):
    if isinstance(e, IntLit):
        return hole.encode("const", e.value)
    if e.name not in fields:
        fields.append(e.name)
    return hole.encode("field", fields.index(e.name))


def _map_stateless(stmt, cat: AtomCatalog):
    value = stmt.value
    dst = stmt.target.name
    fields: list[str] = []
    intrinsic = isinstance(value, Call) or isinstance(value, Binary) and (
        isinstance(value.left, Call) or isinstance(value.right, Call)
    )
    if intrinsic:
        tmpl = cat.intrinsic
        swap = 0
        y = None
        op = "none"
        call = value
        if isinstance(value, Binary):
            op = value.op
            if isinstance(value.left, Call):
                call, y = value.left, value.right
            else:
                call, y, swap = value.right, value.left, 1
        if call.name not in INTRINSIC_FNS:
            return NoMapping(f"no atom provides '{call.name}'")
        if op not in INTRINSIC_OPS:
            return NoMapping(f"the hash unit cannot apply '{op}' to its result")
        holes = {"fn": INTRINSIC_FNS.index(call.name)}
        for i, h in enumerate(("x0", "x1", "x2")):
            arg = call.args[i] if i < len(call.args) else IntLit(0)
            holes[h] = _bind_operand(tmpl.hole(h), arg, fields)
        holes["op"] = INTRINSIC_OPS.index(op)
        holes["y"] = _bind_operand(tmpl.hole("y"), y if y is not None else IntLit(0), fields)
        holes["swap"] = swap
    else:
        tmpl = cat.stateless
        if isinstance(value, Ternary):
            op, args = "?:", [value.cond, value.then, value.else_]
        elif isinstance(value, Binary):
            op, args = value.op, [value.left, value.right]
        else:
            op, args = "mov", [value]
        if op not in STATELESS_OPS:
            return NoMapping(f"the stateless atom has no '{op}' operation")
        holes = {"op": STATELESS_OPS.index(op)}
        for h, a in zip(("a", "b", "c"), args + [IntLit(0)] * (3 - len(args))):
            holes[h] = _bind_operand(tmpl.hole(h), a, fields)
    if len(fields) > tmpl.n_fields:
        return NoMapping(f"needs {len(fields)} operands, {tmpl.name} takes {tmpl.n_fields}")
    return AtomInstance(tmpl, holes, tuple(fields), dst=dst)


_cache: dict = {}


def map_codelet(
    codelet: Codelet,
    template: AtomTemplate | None = None,
    verify_width: int = 2,
    seed: int = 0,
    cat: AtomCatalog | None = None,
):
    """Map one codelet to an atom instance, or return ``NoMapping``.

    Stateless codelets (one statement) are built directly on the stateless
    ALU or the hash unit.  Stateful codelets are searched on ``template``.
    """
    cat = cat or catalog()
    if not codelet.stateful:
        if template is not None and template.stateful:
            return NoMapping("stateless codelets map to the stateless atom")
        (stmt,) = codelet.stmts
        inst = _map_stateless(stmt, cat)
        if inst:
            inst.codelet = codelet.id
        return inst
    if template is None or not template.stateful:
        return NoMapping("stateful codelets need a stateful atom")

    key = (
        codelet.stmts,
        codelet.state_vars,
        codelet.inputs,
        codelet.outputs,
        template.name,
        json.dumps(template.shape, sort_keys=True),
        template.n_fields,
        verify_width,
        seed,
    )
    if key not in _cache:
        spec = codelet_spec(codelet.stmts, codelet.state_vars, codelet.inputs, codelet.outputs, seed)
        _cache[key] = synthesize(template, spec, width=verify_width, seed=seed)
    m = _cache[key]
    if not m:
        return m
    return AtomInstance(
        template,
        dict(m.holes),
        tuple(codelet.inputs),
        tuple(codelet.state_vars),
        tuple(codelet.addresses.get(v) for v in codelet.state_vars),
        exports=tuple((codelet.outputs[k], s, when) for k, s, when in m.exports),
        codelet=codelet.id,
    )


def clear_cache():
    _cache.clear()


# -- resource spreading ---------------------------------------------------------------


def _chunks(items, n):
    """``n`` contiguous chunks whose sizes differ by at most one, larger first."""
    q, r = divmod(len(items), n)
    out, i = [], 0
    for k in range(n):
        size = q + (1 if k < r else 0)
        out.append(items[i : i + size])
        i += size
    return out


def spread(stages, limits: ResourceLimits):
    """Split over-wide stages into consecutive stages.  Codelets sharing a
    stage are independent, so any split preserves the schedule."""
    out = []
    for stage in stages:
        stateless = [c for c in stage if not c.stateful]
        stateful = [c for c in stage if c.stateful]
        n = max(
            math.ceil(len(stateless) / limits.stateless_per_stage),
            math.ceil(len(stateful) / limits.stateful_per_stage),
            1,
        )
        if n == 1:
            out.append(list(stage))
            continue
        for a, b in zip(_chunks(stateless, n), _chunks(stateful, n)):
            out.append(sorted(a + b, key=lambda c: c.indices[0]))
    return out


# -- pipeline configuration -----------------------------------------------------------


@dataclass
class PipelineConfig:
    """A grid of atom instances plus everything needed to run it."""

    program: ProgramAst
    target: str
    stages: list  # list of lists of AtomInstance
    field_map: dict  # declared packet field -> field holding its final value
    limits: ResourceLimits = field(default_factory=ResourceLimits)
    live: list = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.stages)

    def placement(self) -> dict:
        """State variable -> (stage, slot) of its owning atom."""
        out = {}
        for k, stage in enumerate(self.stages):
            for j, inst in enumerate(stage):
                for v in inst.state:
                    out[v] = (k, j)
        return out

    def counts(self) -> list[tuple[int, int]]:
        """(stateless, stateful) atoms per stage."""
        return [
            (sum(not i.stateful for i in st), sum(i.stateful for i in st)) for st in self.stages
        ]

    def to_json(self) -> dict:
        prog = self.program
        pkt = prog.packet_param
        return {
            "format": CONFIG_FORMAT,
            "program": prog.name,
            "target": self.target,
            "packet_param": pkt,
            "packet_fields": list(prog.packet_fields),
            "field_map": dict(self.field_map),
            "guard": None if prog.guard is None else format_expr(prog.guard, pkt),
            "state": [
                {"name": d.name, "init": d.init, "size": d.size} for d in prog.state
            ],
            "limits": self.limits.to_json(),
            "stages": [[inst.to_json() for inst in st] for st in self.stages],
            "live": [sorted(x) for x in self.live],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    @classmethod
    def from_json(cls, d: dict, cat: AtomCatalog | None = None) -> "PipelineConfig":
        from .ast import StateDecl
        from .parser import parse_expression

        if d.get("format") != CONFIG_FORMAT:
            raise ConfigError(f"unsupported pipeline format {d.get('format')!r}")
        try:
            pkt = d.get("packet_param", "pkt")
            guard = d.get("guard")
            prog = ProgramAst(
                name=d["program"],
                packet_param=pkt,
                packet_fields=tuple(d["packet_fields"]),
                consts=(),
                state=tuple(StateDecl(s["name"], s["init"], s.get("size")) for s in d["state"]),
                body=(),
                guard=None if guard is None else parse_expression(guard, pkt),
            )
            stages = [[AtomInstance.from_json(i, cat) for i in st] for st in d["stages"]]
            cfg = cls(
                prog,
                d["target"],
                stages,
                dict(d["field_map"]),
                ResourceLimits(**d.get("limits", {})),
                [frozenset(x) for x in d.get("live", [])],
            )
        except (KeyError, TypeError) as e:
            raise ConfigError(f"malformed pipeline configuration: {e}") from None
        check_config(cfg)
        return cfg

    @classmethod
    def loads(cls, text: str, cat: AtomCatalog | None = None) -> "PipelineConfig":
        return cls.from_json(json.loads(text), cat)


def check_config(cfg: PipelineConfig) -> None:
    """Reject configurations a compiler could not have produced: fields read
    before anything writes them, shared or missing state, limit overflow."""
    avail = set(cfg.program.packet_fields)
    decls = {d.name for d in cfg.program.state}
    owner: dict[str, tuple] = {}
    if cfg.depth > cfg.limits.depth:
        raise ConfigError(f"{cfg.depth} stages exceed the depth limit {cfg.limits.depth}")
    for k, stage in enumerate(cfg.stages):
        n_sl = sum(not i.stateful for i in stage)
        n_sf = len(stage) - n_sl
        if n_sl > cfg.limits.stateless_per_stage or n_sf > cfg.limits.stateful_per_stage:
            raise ConfigError(f"stage {k} exceeds the per-stage atom limits")
        written = []
        for j, inst in enumerate(stage):
            for f in inst.reads():
                if f not in avail:
                    raise ConfigError(f"stage {k} atom {j} reads '{f}', which no earlier stage produces")
            for v in inst.state:
                if v not in decls:
                    raise ConfigError(f"stage {k} atom {j} uses undeclared state '{v}'")
                if v in owner:
                    raise ConfigError(f"state '{v}' is placed in two atoms")
                owner[v] = (k, j)
            written += inst.writes()
        avail.update(written)
    for v in decls - owner.keys():
        raise ConfigError(f"state '{v}' is not placed in any atom")
    for f, src in cfg.field_map.items():
        if f not in cfg.program.packet_fields:
            raise ConfigError(f"field map names unknown field '{f}'")
        if src not in avail:
            raise ConfigError(f"output field '{f}' comes from '{src}', which is never produced")


def _live(stages, prog: ProgramAst, finals) -> list[frozenset]:
    def_stage = {f: -1 for f in prog.packet_fields}
    last_use: dict[str, int] = {}
    for k, stage in enumerate(stages):
        for inst in stage:
            for f in inst.reads():
                last_use[f] = max(last_use.get(f, -1), k)
            for f in inst.writes():
                def_stage[f] = k
    finals = set(finals)
    return [
        frozenset(f for f, d in def_stage.items() if d < k and (last_use.get(f, -1) >= k or f in finals))
        for k in range(len(stages) + 1)
    ]


def compile_pipeline(
    pipe: CodeletPipeline,
    target: str,
    limits: ResourceLimits | None = None,
    verify_width: int = 2,
    seed: int = 0,
    cat: AtomCatalog | None = None,
):
    """Map the codelet pipeline onto ``target``.  Returns a ``PipelineConfig``
    or a ``RejectionReport``; never a partial pipeline."""
    cat = cat or catalog()
    limits = limits or ResourceLimits()
    tmpl = cat[target]
    if not tmpl.stateful:
        raise ValueError(f"target must be a stateful atom, not '{target}'")
    prog = pipe.norm.prog
    pkt = prog.packet_param

    stages = spread(pipe.stages, limits)
    if len(stages) > limits.depth:
        return RejectionReport(
            "depth exceeded",
            tmpl.name,
            f"needs {len(stages)} stages, the machine has {limits.depth}",
            packet_param=pkt,
        )

    out = []
    for k, stage in enumerate(stages):
        row = []
        for c in stage:
            inst = map_codelet(c, tmpl if c.stateful else None, verify_width, seed, cat)
            if not inst:
                return RejectionReport("unmappable codelet", tmpl.name, inst.reason, c, pkt)
            row.append(inst)
        out.append(row)
    finals = pipe.norm.final_fields
    return PipelineConfig(prog, tmpl.name, out, dict(finals), limits, _live(out, prog, finals.values()))


def compile_program(
    prog: ProgramAst,
    target: str,
    limits: ResourceLimits | None = None,
    verify_width: int = 2,
    seed: int = 0,
):
    return compile_pipeline(build_pipeline(normalize(prog)), target, limits, verify_width, seed)


# `compile` shadows the builtin only inside this module's namespace
compile = compile_pipeline


@dataclass
class Classification:
    atom: str  # least expressive atom name, or DOESNT_MAP
    results: dict  # atom name -> PipelineConfig | RejectionReport


def classify_detail(
    prog: ProgramAst | str,
    limits: ResourceLimits | None = None,
    verify_width: int = 2,
    seed: int = 0,
    exhaustive: bool = False,
) -> Classification:
    """Try targets from least to most expressive.  With ``exhaustive`` every
    target is compiled, not just up to the first success."""
    if isinstance(prog, str):
        prog = load_program(prog)
    pipe = build_pipeline(normalize(prog))
    results = {}
    found = DOESNT_MAP
    for name in catalog().names():
        r = compile_pipeline(pipe, name, limits, verify_width, seed)
        results[name] = r
        if r and found == DOESNT_MAP:
            found = name
            if not exhaustive:
                break
    return Classification(found, results)


def classify(prog, limits=None, verify_width: int = 2, seed: int = 0) -> str:
    """Least expressive stateful atom whose target compiles ``prog``."""
    return classify_detail(prog, limits, verify_width, seed).atom
