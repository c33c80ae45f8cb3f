"""Command-line driver: ``domino compile|run|verify|classify|dump``.

Exit status: 0 on success, 2 when the program is rejected by code
generation, 1 for usage errors, invalid programs and internal failures.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .atoms import catalog
from .codegen import (
    DOESNT_MAP,
    ConfigError,
    PipelineConfig,
    ResourceLimits,
    classify_detail,
    compile_pipeline,
)
from .errors import DominoError
from .frontend import load_program
from .normalize import PASS_NAMES, normalize
from .pipeline import build_dep_graph, build_pipeline, condense_sccs, to_dot
from .simulator import check_equivalence, read_trace, run_pipeline, write_result

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_REJECTED = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _width(text):
    w = int(text)
    if not 1 <= w <= 4:
        raise argparse.ArgumentTypeError("verify width must be between 1 and 4")
    return w


def _target(text):
    try:
        return catalog()[text].name
    except KeyError:
        raise argparse.ArgumentTypeError(
            f"unknown target '{text}' (choose from {', '.join(catalog().names())})"
        ) from None


def _range(text):
    try:
        name, span = text.split("=")
        lo, hi = span.split(":")
        return name, (int(lo), int(hi))
    except ValueError:
        raise argparse.ArgumentTypeError("expected FIELD=LO:HI") from None


def _add_limits(p):
    d = ResourceLimits()
    p.add_argument("--depth", type=int, default=d.depth, help="pipeline depth (stages)")
    p.add_argument("--stateless-per-stage", type=int, default=d.stateless_per_stage)
    p.add_argument("--stateful-per-stage", type=int, default=d.stateful_per_stage)
    p.add_argument("--verify-width", type=_width, default=2, help="bit width of exhaustive checks")
    p.add_argument("--seed", type=int, default=0, help="hash and search seed (DOMINO_SEED overrides)")


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="domino", description="Compile Domino packet transactions to Banzai pipelines.")
    sub = top.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    p = sub.add_parser("compile", help="compile a program for one target")
    p.add_argument("file")
    p.add_argument("--target", type=_target, required=True)
    p.add_argument("-o", "--output", help="write the pipeline JSON here (default: stdout)")
    _add_limits(p)

    p = sub.add_parser("run", help="simulate a compiled pipeline on a trace")
    p.add_argument("--pipeline", required=True)
    p.add_argument("--trace", required=True, help="JSON-lines packets ('-' for stdin)")
    p.add_argument("-o", "--output", help="egress JSON-lines (default: stdout)")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("verify", help="compile, then compare pipeline and reference")
    p.add_argument("file")
    p.add_argument("--target", type=_target, required=True)
    p.add_argument("--packets", type=int, default=1000)
    p.add_argument("--range", type=_range, action="append", default=[], metavar="FIELD=LO:HI")
    _add_limits(p)

    p = sub.add_parser("classify", help="print the least expressive atom that runs the program")
    p.add_argument("file")
    _add_limits(p)

    p = sub.add_parser("dump", help="print intermediate representations")
    p.add_argument("file", nargs="?", help="program (not needed for --dump-catalog)")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--dump-pass", choices=PASS_NAMES)
    g.add_argument("--dump-dag", action="store_true", help="dependency graph and codelet DAG (DOT)")
    g.add_argument("--dump-pipeline", action="store_true", help="codelet pipeline (JSON)")
    g.add_argument("--dump-catalog", action="store_true", help="atom templates (JSON)")
    return top


def _seed(args) -> int:
    env = os.environ.get("DOMINO_SEED")
    return int(env) if env not in (None, "") else args.seed


def _limits(args) -> ResourceLimits:
    return ResourceLimits(args.depth, args.stateless_per_stage, args.stateful_per_stage)


def _load(path):
    return load_program(Path(path).read_text(encoding="utf-8"))


def _write(text: str, path):
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _cmd_compile(args) -> int:
    prog = _load(args.file)
    res = compile_pipeline(
        build_pipeline(normalize(prog)), args.target, _limits(args), args.verify_width, _seed(args)
    )
    if not res:
        print(res.format(), file=sys.stderr)
        return EXIT_REJECTED
    _write(res.dumps() + "\n", args.output)
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = PipelineConfig.loads(Path(args.pipeline).read_text(encoding="utf-8"))
    if args.trace == "-":
        trace = read_trace(sys.stdin)
    else:
        with open(args.trace, encoding="utf-8") as f:
            trace = read_trace(f)
    res = run_pipeline(cfg, trace, _seed(args))
    if args.output:
        with open(args.output, "w", encoding="utf-8") as f:
            write_result(res, f)
    else:
        write_result(res, sys.stdout)
    return EXIT_OK


def _corpus_ranges(path) -> dict:
    from .corpus import load_corpus

    name = Path(path).name
    for e in load_corpus():
        if e.file == name:
            return dict(e.trace)
    return {}


def _cmd_verify(args) -> int:
    prog = _load(args.file)
    seed = _seed(args)
    res = compile_pipeline(
        build_pipeline(normalize(prog)), args.target, _limits(args), args.verify_width, seed
    )
    if not res:
        print(res.format(), file=sys.stderr)
        return EXIT_REJECTED
    ranges = _corpus_ranges(args.file)
    ranges.update(dict(args.range))
    rep = check_equivalence(prog, res, args.packets, seed, ranges)
    print(rep.format())
    return EXIT_OK if rep else EXIT_ERROR


def _cmd_classify(args) -> int:
    c = classify_detail(_load(args.file), _limits(args), args.verify_width, _seed(args))
    print(c.atom)
    if c.atom == DOESNT_MAP:
        last = c.results[catalog().names()[-1]]
        print(last.format(), file=sys.stderr)
    return EXIT_OK


def _cmd_dump(args) -> int:
    if args.dump_catalog:
        _write(catalog().dumps() + "\n", None)
        return EXIT_OK
    if args.file is None:
        raise ValueError("this dump needs a program file")
    prog = _load(args.file)
    norm = normalize(prog)
    if args.dump_pass:
        _write(norm.dump(args.dump_pass), None)
    elif args.dump_dag:
        g = build_dep_graph(norm)
        _write(to_dot(g, condense_sccs(g, norm), prog.packet_param), None)
    else:
        _write(build_pipeline(norm).dumps() + "\n", None)
    return EXIT_OK


_COMMANDS = {
    "compile": _cmd_compile,
    "run": _cmd_run,
    "verify": _cmd_verify,
    "classify": _cmd_classify,
    "dump": _cmd_dump,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.cmd](args)
    except DominoError as e:
        name = getattr(args, "file", None) or "<input>"
        print(e.format(name), file=sys.stderr)
        return EXIT_ERROR
    except (ConfigError, OSError, ValueError) as e:
        print(f"domino: error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
