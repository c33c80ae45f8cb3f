"""Bitset kernels for the predicate-tree search.

Rows of the verification table are packed 64 per ``uint64`` word.  For each
state slot ``s`` and candidate update ``u``, ``agree[s, u]`` has a bit set on
every row where ``u`` produces the specified new state.  A leaf covering the
rows in ``region`` is feasible for slot ``s`` iff some candidate ``u`` has
``region & ~agree[s, u] == 0``.

Two interchangeable backends are provided.  ``DOMINO_BACKEND=numpy`` selects
the vectorized numpy one; the default is numba, which falls back to numpy when
numba is unavailable or ``NUMBA_DISABLE_JIT`` is set.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False


def _leaf_index_py(region, agree_s, cand):
    W = region.shape[0]
    for ci in range(cand.shape[0]):
        u = cand[ci]
        ok = True
        for w in range(W):
            if region[w] & ~agree_s[u, w]:
                ok = False
                break
        if ok:
            return ci
    return -1


def _leaves_ok_py(region, agree, cand, n_slots):
    for s in range(n_slots):
        if _leaf_index(region, agree[s], cand) < 0:
            return False
    return True


def _split_py(region, preds, agree, cand_t, cand_e, n_slots):
    """First predicate splitting ``region`` into two feasible leaves."""
    P, W = preds.shape
    t = np.empty(W, dtype=np.uint64)
    e = np.empty(W, dtype=np.uint64)
    for p in range(P):
        for w in range(W):
            t[w] = region[w] & preds[p, w]
            e[w] = region[w] & ~preds[p, w]
        if _leaves_ok(t, agree, cand_t, n_slots) and _leaves_ok(e, agree, cand_e, n_slots):
            return p
    return -1


def _nested_py(region, preds, agree, cand, n_slots):
    """First ``(p1, p2_then, p2_else)`` making all four leaves feasible."""
    P, W = preds.shape
    t = np.empty(W, dtype=np.uint64)
    e = np.empty(W, dtype=np.uint64)
    for p in range(P):
        for w in range(W):
            t[w] = region[w] & preds[p, w]
            e[w] = region[w] & ~preds[p, w]
        a = _split(t, preds, agree, cand, cand, n_slots)
        if a < 0:
            continue
        b = _split(e, preds, agree, cand, cand, n_slots)
        if b < 0:
            continue
        return p, a, b
    return -1, -1, -1


if HAVE_NUMBA:
    _leaf_index = njit(cache=True)(_leaf_index_py)
    _leaves_ok = njit(cache=True)(_leaves_ok_py)
    _split = njit(cache=True)(_split_py)
    _nested = njit(cache=True)(_nested_py)
else:  # pragma: no cover
    _leaf_index, _leaves_ok, _split, _nested = _leaf_index_py, _leaves_ok_py, _split_py, _nested_py


# -- numpy backend -----------------------------------------------------------------


def _feasible_np(regions, agree_s, cand):
    """``regions`` is (R, W); returns (R,) index into cand of the first
    feasible update, or -1."""
    if len(cand) == 0:
        return np.full(regions.shape[0], -1)
    bad = (regions[:, None, :] & ~agree_s[cand][None, :, :]) != 0
    ok = ~bad.any(axis=2)  # (R, C)
    first = ok.argmax(axis=1)
    return np.where(ok.any(axis=1), first, -1)


def _split_ok_np(region, preds, agree, cand_t, cand_e, n_slots):
    t = region[None, :] & preds
    e = region[None, :] & ~preds
    ok = np.ones(preds.shape[0], dtype=bool)
    for s in range(n_slots):
        ok &= _feasible_np(t, agree[s], cand_t) >= 0
        ok &= _feasible_np(e, agree[s], cand_e) >= 0
    return ok


def _split_np(region, preds, agree, cand_t, cand_e, n_slots):
    ok = _split_ok_np(region, preds, agree, cand_t, cand_e, n_slots)
    return int(ok.argmax()) if ok.any() else -1


def _nested_np(region, preds, agree, cand, n_slots):
    for p in range(preds.shape[0]):
        t = region & preds[p]
        a = _split_np(t, preds, agree, cand, cand, n_slots)
        if a < 0:
            continue
        e = region & ~preds[p]
        b = _split_np(e, preds, agree, cand, cand, n_slots)
        if b < 0:
            continue
        return p, a, b
    return -1, -1, -1


def _leaf_index_np(region, agree_s, cand):
    return int(_feasible_np(region[None, :], agree_s, cand)[0])


# -- dispatch -------------------------------------------------------------------------


def backend() -> str:
    """Active backend name: ``numba`` or ``numpy``."""
    want = os.environ.get("DOMINO_BACKEND", "numba").strip().lower()
    if want not in ("numba", "numpy"):
        raise ValueError(f"DOMINO_BACKEND must be 'numba' or 'numpy', not {want!r}")
    if want == "numba" and (not HAVE_NUMBA or os.environ.get("NUMBA_DISABLE_JIT", "0") not in ("", "0")):
        return "numpy"
    return want


def leaf_index(region, agree_s, cand) -> int:
    if backend() == "numba":
        return int(_leaf_index(region, agree_s, cand))
    return _leaf_index_np(region, agree_s, cand)


def split(region, preds, agree, cand_t, cand_e, n_slots) -> int:
    if preds.shape[0] == 0:
        return -1
    if backend() == "numba":
        return int(_split(region, preds, agree, cand_t, cand_e, n_slots))
    return _split_np(region, preds, agree, cand_t, cand_e, n_slots)


def nested(region, preds, agree, cand, n_slots) -> tuple[int, int, int]:
    if preds.shape[0] == 0:
        return -1, -1, -1
    if backend() == "numba":
        p, a, b = _nested(region, preds, agree, cand, n_slots)
        return int(p), int(a), int(b)
    return _nested_np(region, preds, agree, cand, n_slots)
