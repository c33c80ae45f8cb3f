"""Sequential reference execution and a tick-level pipeline simulator.

Pipeline model: one packet enters per tick.  A packet entering at tick ``i``
occupies stage ``k`` at tick ``i + k`` and leaves after stage ``d - 1``.  In a
tick every stage fires its atoms in parallel on its own packet: all atoms read
the packet as it entered the stage and their writes are merged afterwards.
Packets failing the guard travel through the pipeline untouched.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from .ast import ProgramAst
from .atoms import fire
from .codegen import PipelineConfig
from .interp import guard_matches, initial_state, run_transaction
from .normalize import normalize


class OwnershipError(RuntimeError):
    """An atom touched state owned by another atom."""


class StateStore:
    """Switch state, partitioned among the atoms that own it."""

    def __init__(self, decls, owners: dict | None = None):
        self.sizes = {d.name: d.size for d in decls}
        self.values = {}
        for d in decls:
            self.values[d.name] = d.init if d.size is None else [d.init] * d.size
        self.owners = owners or {}
        self.accesses: list[tuple] = []  # (owner, var) when recording

    def _check(self, owner, var):
        if var not in self.values:
            raise OwnershipError(f"unknown state '{var}'")
        want = self.owners.get(var)
        if owner is not None and want is not None and owner != want:
            raise OwnershipError(f"atom {owner} touched '{var}', owned by atom {want}")

    def load(self, var, index=None, owner=None) -> int:
        self._check(owner, var)
        v = self.values[var]
        return v if self.sizes[var] is None else v[index % self.sizes[var]]

    def store(self, var, index, value, owner=None) -> None:
        self._check(owner, var)
        if self.sizes[var] is None:
            self.values[var] = value
        else:
            self.values[var][index % self.sizes[var]] = value

    def snapshot(self) -> dict:
        return {k: list(v) if isinstance(v, list) else v for k, v in self.values.items()}


@dataclass
class TraceResult:
    outputs: list  # one dict of declared fields per packet, in order
    state: dict
    exit_ticks: list = field(default_factory=list)
    occupancy: list = field(default_factory=list)  # tick -> [packet index or None per stage]

    def same_as(self, other: "TraceResult") -> bool:
        return self.outputs == other.outputs and self.state == other.state


def run_reference(prog: ProgramAst, trace, seed: int = 0) -> TraceResult:
    """Run the transaction to completion on each packet in order."""
    state = initial_state(prog)
    outs = [run_transaction(prog, pkt, state, seed) for pkt in trace]
    return TraceResult(outs, state)


def run_pipeline(
    cfg: PipelineConfig,
    trace,
    seed: int = 0,
    record: bool = False,
    shuffle: random.Random | None = None,
    stage_log: list | None = None,
) -> TraceResult:
    """Simulate ``cfg`` tick by tick.

    ``shuffle`` permutes stage and atom firing order within each tick, which
    must not change the result.  ``stage_log``, when given, receives
    ``(packet, stage, writes)`` for every firing.
    """
    prog = cfg.program
    d = cfg.depth
    owners = {}
    for k, stage in enumerate(cfg.stages):
        for j, inst in enumerate(stage):
            for v in inst.state:
                owners[v] = (k, j)
    store = StateStore(prog.state, owners)
    fields = prog.packet_fields
    trace = list(trace)
    n = len(trace)
    pkts = [None] * n
    active = [False] * n
    outputs = [None] * n
    exit_ticks = [None] * n
    occupancy = []

    for t in range(n + d - 1 if n else 0):
        if t < n:
            pkts[t] = {f: trace[t].get(f, 0) for f in fields}
            active[t] = guard_matches(prog, pkts[t], seed)
        stages = list(range(d))
        if shuffle is not None:
            shuffle.shuffle(stages)
        if record:
            occupancy.append([t - k if 0 <= t - k < n else None for k in range(d)])
        for k in stages:
            i = t - k
            if not 0 <= i < n:
                continue
            if active[i]:
                pkt = pkts[i]
                view = dict(pkt)  # atoms see the packet as it entered the stage
                insts = list(enumerate(cfg.stages[k]))
                if shuffle is not None:
                    shuffle.shuffle(insts)
                writes = {}
                for j, inst in insts:
                    owner = (k, j)
                    writes.update(
                        fire(
                            inst,
                            view,
                            lambda v, x, o=owner: store.load(v, x, o),
                            lambda v, x, val, o=owner: store.store(v, x, val, o),
                            seed,
                        )
                    )
                pkt.update(writes)
                if stage_log is not None:
                    stage_log.append((i, k, writes))
            if k == d - 1:
                pkt = pkts[i]
                if active[i]:
                    outputs[i] = {f: pkt[cfg.field_map[f]] for f in fields}
                else:
                    outputs[i] = {f: pkt[f] for f in fields}
                exit_ticks[i] = t
                pkts[i] = None
    if d == 0:  # nothing to do: packets pass straight through
        outputs = [{f: p.get(f, 0) for f in fields} for p in trace]
    return TraceResult(outputs, store.snapshot(), exit_ticks, occupancy)


# -- random traces and equivalence ---------------------------------------------------


def random_trace(prog: ProgramAst, n: int, seed: int = 0, ranges: dict | None = None, default=(0, 32)):
    """``n`` packets with every declared field drawn uniformly from its
    inclusive range (``ranges`` overrides ``default`` per field)."""
    rng = random.Random(seed)
    ranges = ranges or {}
    out = []
    for _ in range(n):
        pkt = {}
        for f in prog.packet_fields:
            lo, hi = ranges.get(f, default)
            pkt[f] = rng.randint(lo, hi)
        out.append(pkt)
    return out


@dataclass
class Divergence:
    packet: int
    tick: int
    stage: int | None
    fields: dict  # name -> (expected, got)

    def format(self) -> str:
        where = "final state" if self.stage is None else f"stage {self.stage}"
        diff = ", ".join(f"{k}: expected {a}, got {b}" for k, (a, b) in sorted(self.fields.items()))
        return f"packet {self.packet} diverged at tick {self.tick} ({where}): {diff}"


@dataclass
class EquivalenceReport:
    equivalent: bool
    packets: int
    seed: int
    divergence: Divergence | None = None

    def format(self) -> str:
        if self.equivalent:
            return f"equivalent on {self.packets} packets (seed {self.seed})"
        return f"NOT equivalent (seed {self.seed}): {self.divergence.format()}"

    def __bool__(self):
        return self.equivalent


def _locate(prog, cfg, trace, bad: int, seed: int) -> Divergence:
    """Find the first stage whose writes for packet ``bad`` disagree with
    sequential execution of the normalized program."""
    norm = normalize(prog)
    state = initial_state(prog)
    from .interp import exec_body

    expected = None
    for i, pkt in enumerate(trace[: bad + 1]):
        work = {f: pkt.get(f, 0) for f in prog.packet_fields}
        if guard_matches(prog, work, seed):
            exec_body(norm.stmts, work, state, seed)
        if i == bad:
            expected = work
    log: list = []
    run_pipeline(cfg, trace[: bad + 1], seed, stage_log=log)
    for i, k, writes in log:
        if i != bad:
            continue
        diff = {f: (expected.get(f), v) for f, v in writes.items() if expected.get(f) != v}
        if diff:
            return Divergence(bad, bad + k, k, diff)
    return Divergence(bad, bad + cfg.depth - 1, None, {})


def check_equivalence(
    prog: ProgramAst,
    cfg: PipelineConfig,
    n_random: int = 1000,
    seed: int = 0,
    ranges: dict | None = None,
    trace=None,
) -> EquivalenceReport:
    """Compare per-packet outputs and final state of the pipeline against the
    sequential reference over a random trace."""
    if trace is None:
        trace = random_trace(prog, n_random, seed, ranges)
    ref = run_reference(prog, trace, seed)
    got = run_pipeline(cfg, trace, seed)
    for i, (a, b) in enumerate(zip(ref.outputs, got.outputs)):
        if a != b:
            div = _locate(prog, cfg, trace, i, seed)
            out_diff = {f: (a[f], b[f]) for f in a if a[f] != b[f]}
            if div.stage is None:
                div.fields = out_diff
            return EquivalenceReport(False, len(trace), seed, div)
    if ref.state != got.state:
        diff = {}
        for v in ref.state:
            if ref.state[v] != got.state[v]:
                if isinstance(ref.state[v], list):
                    j = next(j for j, (x, y) in enumerate(zip(ref.state[v], got.state[v])) if x != y)
                    diff[f"{v}[{j}]"] = (ref.state[v][j], got.state[v][j])
                else:
                    diff[v] = (ref.state[v], got.state[v])
        last = len(trace) - 1
        return EquivalenceReport(
            False, len(trace), seed, Divergence(last, last + cfg.depth - 1, None, diff)
        )
    return EquivalenceReport(True, len(trace), seed)


# -- trace I/O ------------------------------------------------------------------------


def read_trace(lines) -> list[dict]:
    """JSON-lines: one object of field values per packet; blank lines skipped."""
    out = []
    for n, line in enumerate(lines, 1):
        line = line.strip()
        if not line:
            continue
        obj = json.loads(line)
        if not isinstance(obj, dict) or not all(isinstance(v, int) for v in obj.values()):
            raise ValueError(f"trace line {n}: expected an object of integer fields")
        out.append(obj)
    return out


def write_result(res: TraceResult, out) -> None:
    for pkt in res.outputs:
        out.write(json.dumps(pkt) + "\n")
    out.write(json.dumps({"final_state": res.state}) + "\n")
