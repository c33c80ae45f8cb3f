"""Dependency analysis, SCC condensation and ASAP stage assignment.

The result is the unconstrained codelet pipeline: any number of stages, any
number of codelets per stage.  Resource limits are applied later by codegen.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .ast import Field, IntLit, StateRef, fields_read
from .normalize import NormalizedProgram, stmt_kind, stmt_reads
from .printer import format_expr


@dataclass(frozen=True)
class DependencyGraph:
    stmts: tuple
    succ: tuple  # succ[i] = sorted tuple of successor node ids
    flank_pairs: dict  # state var -> (read node, write node)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u, vs in enumerate(self.succ) for v in vs]

    def __len__(self):
        return len(self.stmts)


def dependency_succ(stmts) -> tuple[list[set], dict]:
    """Successor sets for read-after-write edges plus a two-way edge between
    each state variable's read and write flank; also the flank pairs."""
    succ = [set() for _ in stmts]
    defs: dict[str, int] = {}
    for j, s in enumerate(stmts):
        for name in stmt_reads(s):
            i = defs.get(name)
            if i is not None:
                succ[i].add(j)
        if isinstance(s.target, Field):
            defs[s.target.name] = j

    pairs = {}
    for j, s in enumerate(stmts):
        if isinstance(s.value, StateRef):
            pairs.setdefault(s.value.name, [None, None])[0] = j
        if isinstance(s.target, StateRef):
            pairs.setdefault(s.target.name, [None, None])[1] = j
    for r, w in pairs.values():
        if r is not None and w is not None:
            succ[r].add(w)
            succ[w].add(r)
    return succ, {v: tuple(p) for v, p in pairs.items()}


def build_dep_graph(norm: NormalizedProgram) -> DependencyGraph:
    stmts = tuple(norm.stmts)
    succ, pairs = dependency_succ(stmts)
    return DependencyGraph(stmts, tuple(tuple(sorted(x)) for x in succ), pairs)


def tarjan_sccs(n: int, succ) -> list[list[int]]:
    """Strongly connected components of a graph on nodes ``0..n-1``.

    Iterative so deep chains do not hit the recursion limit.  Components come
    out in reverse topological order; members are sorted.
    """
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    out: list[list[int]] = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, pos = work[-1]
            nbrs = succ[v]
            if pos < len(nbrs):
                work[-1] = (v, pos + 1)
                w = nbrs[pos]
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                out.append(sorted(comp))
    return out


@dataclass
class Codelet:
    """Sequential block of three-address statements mapped to one atom."""

    id: int
    indices: tuple  # original statement indices, ascending
    stmts: tuple
    state_vars: tuple = ()
    stage: int = -1
    inputs: tuple = ()  # operand fields produced outside the codelet
    outputs: tuple = ()  # fields defined here and needed downstream
    addresses: dict = field(default_factory=dict)  # state var -> index field

    @property
    def stateful(self) -> bool:
        return bool(self.state_vars)

    def defined(self) -> list[str]:
        return [s.target.name for s in self.stmts if isinstance(s.target, Field)]

    def source(self, pkt: str = "pkt") -> str:
        return "\n".join(f"{format_expr(s.target, pkt)} = {format_expr(s.value, pkt)};" for s in self.stmts)


@dataclass
class CodeletDag:
    codelets: list
    succ: list  # codelet id -> sorted successor ids
    graph: DependencyGraph
    norm: NormalizedProgram

    def preds(self) -> list[list[int]]:
        p = [[] for _ in self.codelets]
        for u, vs in enumerate(self.succ):
            for v in vs:
                p[v].append(u)
        return p


def _address(index):
    """Field name, constant, or None (scalar) selecting the state element."""
    if isinstance(index, Field):
        return index.name
    if isinstance(index, IntLit):
        return index.value
    return None


def _operand_reads(s) -> list[str]:
    if isinstance(s.value, StateRef):
        return []
    return fields_read(s.value)


def condense_sccs(g: DependencyGraph, norm: NormalizedProgram) -> CodeletDag:
    """Collapse each SCC into a codelet; codelets are numbered by their
    first statement so the numbering is deterministic."""
    comps = sorted(tarjan_sccs(len(g), g.succ), key=lambda c: c[0])
    comp_of = {}
    for cid, comp in enumerate(comps):
        for i in comp:
            comp_of[i] = cid

    succ = [set() for _ in comps]
    for u, v in g.edges:
        cu, cv = comp_of[u], comp_of[v]
        if cu != cv:
            succ[cu].add(cv)

    codelets = []
    for cid, comp in enumerate(comps):
        stmts = tuple(g.stmts[i] for i in comp)
        state_vars = []
        addresses = {}
        for s in stmts:
            kind = stmt_kind(s)
            if kind in ("state_read", "state_write"):
                ref = s.value if kind == "state_read" else s.target
                if ref.name not in state_vars:
                    state_vars.append(ref.name)
                addresses[ref.name] = _address(ref.index)
        codelets.append(
            Codelet(cid, tuple(comp), stmts, tuple(sorted(state_vars)), addresses=addresses)
        )
    dag = CodeletDag(codelets, [sorted(x) for x in succ], g, norm)
    _annotate_io(dag)
    return dag


def _annotate_io(dag: CodeletDag) -> None:
    norm = dag.norm
    finals = set(norm.final_fields.values())
    used_by: dict[str, set[int]] = {}
    for c in dag.codelets:
        for s in c.stmts:
            for f in stmt_reads(s):
                used_by.setdefault(f, set()).add(c.id)
    for c in dag.codelets:
        local = set(c.defined())
        ins = []
        for s in c.stmts:
            for f in _operand_reads(s):
                if f not in local and f not in ins:
                    ins.append(f)
        c.inputs = tuple(ins)
        c.outputs = tuple(
            f for f in c.defined() if f in finals or used_by.get(f, set()) - {c.id}
        )


@dataclass
class CodeletPipeline:
    stages: list  # list of lists of Codelet
    live: list  # live[k] = fields carried into stage k
    dag: CodeletDag

    @property
    def depth(self) -> int:
        return len(self.stages)

    @property
    def norm(self) -> NormalizedProgram:
        return self.dag.norm

    def codelets(self):
        for stage in self.stages:
            yield from stage

    def to_json(self) -> dict:
        pkt = self.norm.prog.packet_param
        return {
            "program": self.norm.prog.name,
            "depth": self.depth,
            "stages": [
                [
                    {
                        "id": c.id,
                        "state": list(c.state_vars),
                        "inputs": list(c.inputs),
                        "outputs": list(c.outputs),
                        "stmts": c.source(pkt).split("\n"),
                    }
                    for c in stage
                ]
                for stage in self.stages
            ],
            "live": [sorted(x) for x in self.live],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def schedule(dag: CodeletDag) -> CodeletPipeline:
    """As-soon-as-possible stage assignment over the codelet DAG."""
    preds = dag.preds()
    order = _topo_order(len(dag.codelets), dag.succ)
    stage = [0] * len(dag.codelets)
    for v in order:
        if preds[v]:
            stage[v] = 1 + max(stage[u] for u in preds[v])
    depth = max(stage, default=-1) + 1
    stages = [[] for _ in range(depth)]
    for c in dag.codelets:  # already ordered by first statement index
        c.stage = stage[c.id]
        stages[c.stage].append(c)
    return CodeletPipeline(stages, live_fields(stages, dag.norm), dag)


def _topo_order(n: int, succ) -> list[int]:
    indeg = [0] * n
    for vs in succ:
        for v in vs:
            indeg[v] += 1
    ready = [v for v in range(n) if indeg[v] == 0]
    out = []
    while ready:
        v = ready.pop()
        out.append(v)
        for w in succ[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                ready.append(w)
    if len(out) != n:
        raise ValueError("codelet graph has a cycle")
    return out


def live_fields(stages, norm: NormalizedProgram) -> list[frozenset]:
    """Fields that must ride in the packet across each stage boundary.

    ``live[k]`` is the set entering stage ``k``; ``live[depth]`` is what
    leaves the pipeline.
    """
    finals = set(norm.final_fields.values())
    def_stage: dict[str, int] = {f: -1 for f in norm.prog.packet_fields}
    last_use: dict[str, int] = {}
    for k, stage in enumerate(stages):
        for c in stage:
            for s in c.stmts:
                if isinstance(s.target, Field):
                    def_stage[s.target.name] = k
                for f in stmt_reads(s):
                    last_use[f] = max(last_use.get(f, -1), k)
    depth = len(stages)
    live = []
    for k in range(depth + 1):
        live.append(
            frozenset(
                f
                for f, d in def_stage.items()
                if d < k and (last_use.get(f, -1) >= k or f in finals)
            )
        )
    return live


def build_pipeline(norm: NormalizedProgram) -> CodeletPipeline:
    g = build_dep_graph(norm)
    return schedule(condense_sccs(g, norm))


def run_codelets(pipe: CodeletPipeline, pkt: dict, state: dict, seed: int = 0, order=None) -> dict:
    """Execute codelets stage by stage.  ``order`` optionally permutes the
    codelets within each stage (they must be independent)."""
    from .interp import exec_body, guard_matches

    prog = pipe.norm.prog
    work = {f: pkt.get(f, 0) for f in prog.packet_fields}
    if not guard_matches(prog, work, seed):
        return work
    for k, stage in enumerate(pipe.stages):
        cs = stage if order is None else order(k, list(stage))
        for c in cs:
            exec_body(c.stmts, work, state, seed)
    return {f: work[pipe.norm.final_fields[f]] for f in prog.packet_fields}


def to_dot(g: DependencyGraph, dag: CodeletDag | None = None, pkt: str = "pkt") -> str:
    """Dependency graph, and optionally the condensed DAG, in DOT syntax."""

    def label(s):
        text = f"{format_expr(s.target, pkt)} = {format_expr(s.value, pkt)}"
        return json.dumps(text)

    lines = ["digraph deps {", "  node [shape=box];"]
    for i, s in enumerate(g.stmts):
        lines.append(f"  s{i} [label={label(s)}];")
    for u, v in g.edges:
        lines.append(f"  s{u} -> s{v};")
    lines.append("}")
    if dag is not None:
        lines.append("digraph codelets {")
        lines.append("  node [shape=box];")
        for c in dag.codelets:
            text = json.dumps(c.source(pkt))
            style = ", style=filled, fillcolor=grey" if c.stateful else ""
            lines.append(f"  c{c.id} [label={text}{style}];")
        for u, vs in enumerate(dag.succ):
            for v in vs:
                lines.append(f"  c{u} -> c{v};")
        lines.append("}")
    return "\n".join(lines) + "\n"
