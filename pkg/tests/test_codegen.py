import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from domino.atoms import catalog
from domino.codegen import (
    DOESNT_MAP,
    CompilationRejected,
    ConfigError,
    PipelineConfig,
    RejectionReport,
    ResourceLimits,
    _chunks,
    check_config,
    classify_detail,
    compile_program,
    map_codelet,
    spread,
)
from domino.frontend import load_program
from domino.normalize import normalize
from domino.pipeline import build_pipeline
from domino.synth.search import codelet_spec, verify_exhaustive
from strategies import programs


def _stateful_codelets(prog):
    return [c for c in build_pipeline(normalize(prog)).codelets() if c.stateful]


def wide_program(n):
    fields = [f"f{i}" for i in range(n)]
    body = " ".join(f"p.f{i} = p.f{i} + {i};" for i in range(n))
    return load_program(
        "struct Packet { " + " ".join(f"int {f};" for f in fields) + " };\n"
        "void wide(struct Packet p) { " + body + " }"
    )


# -- limits and spreading ----------------------------------------------------------


def test_default_limits():
    lim = ResourceLimits()
    assert (lim.depth, lim.stateless_per_stage, lim.stateful_per_stage) == (32, 300, 10)
    with pytest.raises(ValueError):
        ResourceLimits(depth=0)


@given(st.lists(st.integers(), max_size=40), st.integers(1, 12))
def test_chunks_are_even_and_ordered(items, n):
    parts = _chunks(items, n)
    assert len(parts) == n
    assert [x for p in parts for x in p] == items
    sizes = [len(p) for p in parts]
    assert max(sizes) - min(sizes) <= 1
    assert sizes == sorted(sizes, reverse=True)


def test_spreading_301_statements():
    prog = wide_program(301)
    cfg = compile_program(prog, "Write")
    assert cfg.depth == 2
    assert [n for n, _ in cfg.counts()] == [151, 150]


def test_spreading_then_depth_limit_rejects():
    r = compile_program(wide_program(301), "Write", ResourceLimits(depth=1))
    assert isinstance(r, RejectionReport) and not r
    assert r.kind == "depth exceeded"
    assert "needs 2 stages" in r.format()


def test_stateful_limit_spreads_stateful_atoms(corpus):
    bloom = next(e for e in corpus if e.file == "bloom.domino").program()
    wide = compile_program(bloom, "Write")
    narrow = compile_program(bloom, "Write", ResourceLimits(stateful_per_stage=1))
    assert max(sf for _, sf in wide.counts()) == 3
    assert max(sf for _, sf in narrow.counts()) == 1
    assert narrow.depth == wide.depth + 2


@given(programs(max_stmts=4))
def test_spread_respects_limits_and_keeps_dependencies(p):
    pipe = build_pipeline(normalize(p))
    lim = ResourceLimits(stateless_per_stage=1, stateful_per_stage=1)
    stages = spread(pipe.stages, lim)
    where = {c.id: k for k, st_ in enumerate(stages) for c in st_}
    assert sorted(where) == sorted(c.id for c in pipe.codelets())
    for st_ in stages:
        assert sum(not c.stateful for c in st_) <= 1 and sum(c.stateful for c in st_) <= 1
    for u, vs in enumerate(pipe.dag.succ):
        for v in vs:
            assert where[u] < where[v]


# -- codelet mapping ----------------------------------------------------------------


def test_state_touch_maps_on_write():
    prog = load_program("struct Packet { int a; };\nint x;\nvoid t(struct Packet p) { x = x; }")
    (c,) = _stateful_codelets(prog)
    inst = map_codelet(c, catalog()["Write"])
    assert inst
    spec = codelet_spec(c.stmts, c.state_vars, c.inputs, c.outputs)
    assert verify_exhaustive(inst.template, spec, inst.holes, (), width=2)


def test_stateless_codelet_on_stateful_template_is_refused():
    prog = load_program("struct Packet { int a; int b; };\nvoid t(struct Packet p) { p.b = p.a + 1; }")
    (c,) = build_pipeline(normalize(prog)).codelets()
    assert not map_codelet(c, catalog()["Write"])
    assert map_codelet(c).template.name == "Stateless"


def test_multiplication_has_no_stateless_atom():
    prog = load_program("struct Packet { int a; int b; };\nvoid t(struct Packet p) { p.b = p.a * 3; }")
    r = compile_program(prog, "Pairs")
    assert not r and r.kind == "unmappable codelet" and "'*'" in r.detail


@given(programs(max_stmts=4))
def test_every_mapping_checks_out_exhaustively(p):
    """Soundness, re-checked on a wider table than the search used."""
    for c in _stateful_codelets(p):
        inst = map_codelet(c, catalog()["Pairs"])
        if not inst:
            continue
        spec = codelet_spec(c.stmts, c.state_vars, c.inputs, c.outputs)
        exports = tuple((c.outputs.index(name), s, when) for name, s, when in inst.exports)
        assert verify_exhaustive(inst.template, spec, inst.holes, exports, width=3)


def test_codelet_cache_returns_same_mapping(flowlet):
    from domino.codegen import _cache, clear_cache

    clear_cache()
    (c, _) = _stateful_codelets(flowlet)
    a = map_codelet(c, catalog()["PRAW"])
    n = len(_cache)
    b = map_codelet(c, catalog()["PRAW"])
    assert len(_cache) == n == 1
    assert a.to_json() == b.to_json()


# -- compilation ---------------------------------------------------------------------


def test_flowlet_on_praw(flowlet):
    cfg = compile_program(flowlet, "PRAW")
    assert cfg.depth == 6
    assert max(sf for _, sf in cfg.counts()) == 1
    assert set(cfg.placement()) == {"last_time", "saved_hop"}
    assert cfg.field_map["next_hop"] == "next_hop0"


def test_conga_needs_pairs(corpus):
    conga = next(e for e in corpus if e.file == "conga.domino").program()
    r = compile_program(conga, "Nested")
    assert not r and r.kind == "unmappable codelet"
    text = r.format()
    assert text.startswith("rejected for target Nested: unmappable codelet")
    assert "best_path_util[p.src]" in text  # the offending codelet, pretty-printed
    assert compile_program(conga, "Pairs")


def test_codel_rejected_for_square_root(corpus):
    codel = next(e for e in corpus if e.file == "codel.domino").program()
    r = compile_program(codel, "Pairs")
    assert not r and "sqrt" in r.detail
    with pytest.raises(CompilationRejected):
        raise CompilationRejected(r)


def test_stateless_target_is_not_a_target(flowlet):
    with pytest.raises(ValueError):
        compile_program(flowlet, "Stateless")


def test_classification_is_monotone(corpus):
    for e in corpus:
        if e.file not in ("flowlet.domino", "sampled_netflow.domino", "codel.domino"):
            continue
        cls = classify_detail(e.program(), exhaustive=True)
        assert cls.atom == e.expected
        names = catalog().names()
        k = names.index(cls.atom) if cls.atom != DOESNT_MAP else len(names)
        assert [bool(cls.results[n]) for n in names] == [i >= k for i in range(len(names))]


# -- configuration files -------------------------------------------------------------


def test_config_round_trip(flowlet):
    cfg = compile_program(flowlet, "PRAW")
    again = PipelineConfig.loads(cfg.dumps())
    assert again.dumps() == cfg.dumps()
    assert again.program.guard == flowlet.guard
    assert json.loads(cfg.dumps())["format"] == "domino-pipeline/1"


def _first_stateful(d):
    return next(i for st_ in d["stages"] for i in st_ if i.get("state"))


def _tampered(cfg, edit):
    d = json.loads(cfg.dumps())
    edit(d)
    return d


@pytest.mark.parametrize(
    "edit,fragment",
    [
        (lambda d: d.update(format="other"), "unsupported"),
        (lambda d: d.pop("stages"), "malformed"),
        (lambda d: d["stages"].reverse(), "which no earlier stage produces"),
        (lambda d: d["stages"][-1].append(_first_stateful(d)), "two atoms"),
        (lambda d: d["state"].append({"name": "ghost", "init": 0, "size": None}), "not placed"),
        (lambda d: d["field_map"].update(next_hop="nowhere"), "never produced"),
        (lambda d: d["field_map"].update(bogus="id0"), "unknown field"),
        (lambda d: d["limits"].update(depth=3), "depth limit"),
        (lambda d: d["limits"].update(stateless_per_stage=1), "per-stage"),
    ],
)
def test_inconsistent_configs_are_rejected(flowlet, edit, fragment):
    cfg = compile_program(flowlet, "PRAW")
    with pytest.raises(ConfigError, match=fragment):
        PipelineConfig.from_json(_tampered(cfg, edit))


def test_check_config_accepts_compiled_output(corpus):
    for e in corpus:
        if e.mappable:
            check_config(compile_program(e.program(), e.expected))
