import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from domino.semantics import (
    BINARY_OPS,
    INT_MAX,
    INT_MIN,
    UNARY_OPS,
    binop,
    binop_v,
    call_intrinsic,
    call_intrinsic_v,
    unop,
    unop_v,
    wrap32,
)

from oracles import c_binop, wrap_np

i32 = st.integers(min_value=INT_MIN, max_value=INT_MAX)


@given(st.sampled_from(BINARY_OPS), i32, i32)
def test_binop_matches_c_int32(op, a, b):
    assert binop(op, a, b) == c_binop(op, a, b)


@pytest.mark.parametrize(
    "op,a,b,want",
    [
        ("/", -7, 2, -3),
        ("%", -7, 2, -1),
        ("/", 7, -2, -3),
        ("%", 7, -2, 1),
        ("/", 5, 0, 0),
        ("%", 5, 0, 0),
        ("+", INT_MAX, 1, INT_MIN),
        ("/", INT_MIN, -1, INT_MIN),
        ("-", INT_MIN, 1, INT_MAX),
    ],
)
def test_division_and_overflow_cases(op, a, b, want):
    assert binop(op, a, b) == want


@given(i32)
def test_unary(a):
    assert unop("-", a) == wrap_np(-a)
    assert unop("!", a) == int(a == 0)
    assert unop("~", a) == wrap_np(-a - 1)


@given(st.lists(st.tuples(i32, i32), min_size=1, max_size=50), st.sampled_from(BINARY_OPS))
def test_vector_forms_agree_with_scalar(pairs, op):
    a = np.array([p[0] for p in pairs], dtype=np.int64)
    b = np.array([p[1] for p in pairs], dtype=np.int64)
    got = binop_v(op, a, b)
    assert got.tolist() == [binop(op, x, y) for x, y in pairs]


@given(st.lists(i32, min_size=1, max_size=50), st.sampled_from(UNARY_OPS))
def test_vector_unary_agrees(xs, op):
    assert unop_v(op, np.array(xs, dtype=np.int64)).tolist() == [unop(op, x) for x in xs]


@given(st.lists(st.tuples(i32, i32, i32), min_size=1, max_size=30), st.integers(0, 2**32 - 1))
def test_hash_nonnegative_seeded_and_vectorized(rows, seed):
    for name, k in (("hash2", 2), ("hash3", 3)):
        scalar = [call_intrinsic(name, list(r[:k]), seed) for r in rows]
        assert all(0 <= h <= INT_MAX for h in scalar)
        cols = [np.array([r[j] for r in rows], dtype=np.int64) for j in range(k)]
        assert call_intrinsic_v(name, cols, seed).tolist() == scalar


def test_hash_depends_on_seed_and_arguments():
    assert call_intrinsic("hash2", [1, 2], 0) != call_intrinsic("hash2", [1, 2], 1)
    assert call_intrinsic("hash2", [1, 2], 0) != call_intrinsic("hash2", [2, 1], 0)
    assert call_intrinsic("hash2", [1, 2], 7) == call_intrinsic("hash2", [1, 2], 7)


@given(st.integers(min_value=0, max_value=INT_MAX))
def test_sqrt_is_integer_floor(x):
    r = call_intrinsic("sqrt", [x])
    assert r * r <= x < (r + 1) * (r + 1)


@given(st.integers(min_value=-(2**40), max_value=2**40))
def test_wrap32_is_mod_2_32(x):
    assert wrap32(x) == wrap_np(x)
    assert (wrap32(x) - x) % (1 << 32) == 0
