"""Compare the numba and numpy search kernels.

Two measurements per backend:

* ``nested``: the depth-2 predicate search on synthetic bitsets where no
  predicate triple succeeds, so the whole space is scanned.
* ``classify``: end-to-end classification of every corpus program.

Usage: ``python3 benchmarks/bench_search.py [--preds N] [--words W] [--repeat R]``
"""

from __future__ import annotations

import argparse
import os
import time

import numpy as np

from domino.codegen import classify, clear_cache
from domino.corpus import load_corpus
from domino.synth import kernels


def _inputs(n_preds: int, words: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    preds = rng.integers(0, 2**63, size=(n_preds, words), dtype=np.uint64)
    # Each update agrees on a random half of rows, so leaves are rarely feasible.
    agree = rng.integers(0, 2**63, size=(1, 8, words), dtype=np.uint64)
    region = np.full(words, np.uint64(2**64 - 1), dtype=np.uint64)
    cand = np.arange(8, dtype=np.int64)
    return region, preds, agree, cand


def _best(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench(backend: str, n_preds: int, words: int, repeat: int) -> dict:
    os.environ["DOMINO_BACKEND"] = backend
    assert kernels.backend() == backend, f"backend {backend} unavailable"
    region, preds, agree, cand = _inputs(n_preds, words)
    kernels.nested(region, preds[:2], agree, cand, 1)  # compile outside the timing
    nested = _best(lambda: kernels.nested(region, preds, agree, cand, 1), repeat)

    corpus = [e.program() for e in load_corpus()]

    def run_all():
        clear_cache()
        for prog in corpus:
            classify(prog)

    run_all()
    return {"nested": nested, "classify": _best(run_all, repeat)}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preds", type=int, default=64)
    ap.add_argument("--words", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    results = {b: bench(b, args.preds, args.words, args.repeat) for b in ("numba", "numpy")}
    print(f"{'kernel':<10}{'numba (s)':>12}{'numpy (s)':>12}{'speedup':>10}")
    for k in ("nested", "classify"):
        a, b = results["numba"][k], results["numpy"][k]
        print(f"{k:<10}{a:>12.4f}{b:>12.4f}{b / a:>9.1f}x")


if __name__ == "__main__":
    main()
