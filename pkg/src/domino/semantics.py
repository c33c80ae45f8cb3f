"""Value semantics shared by every evaluator in the package.

All packet fields and state are 32-bit signed two's-complement integers with
wrapping arithmetic.  Each operator has a scalar form (Python ints, used by the
interpreters and the simulator) and a vectorized form (numpy int64 arrays,
used by the synthesis engine to evaluate many inputs at once).  The two forms
are kept side by side so they can be checked against each other.
"""

from __future__ import annotations

import math

import numpy as np

INT_MIN = -(1 << 31)
INT_MAX = (1 << 31) - 1
_MASK32 = 0xFFFFFFFF

ARITH_OPS = ("+", "-", "*", "/", "%", "<<", ">>")
BITWISE_OPS = ("&", "|", "^")
LOGICAL_OPS = ("&&", "||")
RELATIONAL_OPS = ("==", "!=", "<", ">", "<=", ">=")
BINARY_OPS = ARITH_OPS + BITWISE_OPS + LOGICAL_OPS + RELATIONAL_OPS
UNARY_OPS = ("-", "!", "~")

# name -> arity
INTRINSICS = {"hash2": 2, "hash3": 3, "sqrt": 1}


def wrap32(x: int) -> int:
    x &= _MASK32
    return x - (1 << 32) if x & 0x80000000 else x


def _cdiv(a: int, b: int) -> int:
    if b == 0:
        return 0
    q = abs(a) // abs(b)
    return q if (a < 0) == (b < 0) else -q


def _cmod(a: int, b: int) -> int:
    if b == 0:
        return 0
    return a - b * _cdiv(a, b)


_SCALAR = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": _cdiv,
    "%": _cmod,
    "<<": lambda a, b: a << (b & 31),
    ">>": lambda a, b: a >> (b & 31),
    "&": lambda a, b: a & b,
    "|": lambda a, b: a | b,
    "^": lambda a, b: a ^ b,
    "&&": lambda a, b: int(a != 0 and b != 0),
    "||": lambda a, b: int(a != 0 or b != 0),
    "==": lambda a, b: int(a == b),
    "!=": lambda a, b: int(a != b),
    "<": lambda a, b: int(a < b),
    ">": lambda a, b: int(a > b),
    "<=": lambda a, b: int(a <= b),
    ">=": lambda a, b: int(a >= b),
}


def binop(op: str, a: int, b: int) -> int:
    """Apply a binary operator to two int32 values."""
    return wrap32(_SCALAR[op](a, b))


def unop(op: str, a: int) -> int:
    if op == "-":
        return wrap32(-a)
    if op == "!":
        return int(a == 0)
    if op == "~":
        return wrap32(~a)
    raise ValueError(f"unknown unary operator {op!r}")


def ternary(c: int, a: int, b: int) -> int:
    return a if c != 0 else b


# -- vectorized forms -------------------------------------------------------


def wrap32_v(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    return ((x + (1 << 31)) & _MASK32) - (1 << 31)


def _vdiv(a, b):
    safe = np.where(b == 0, 1, b)
    q = np.abs(a) // np.abs(safe)
    q = np.where((a < 0) == (safe < 0), q, -q)
    return np.where(b == 0, 0, q)


def _vmod(a, b):
    return np.where(b == 0, 0, a - b * _vdiv(a, b))


_VECTOR = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    # products of two int32 fit comfortably in int64 before wrapping
    "*": lambda a, b: a * b,
    "/": _vdiv,
    "%": _vmod,
    "<<": lambda a, b: (a << (b & 31)) & _MASK32,
    ">>": lambda a, b: a >> (b & 31),
    "&": lambda a, b: a & b,
    "|": lambda a, b: a | b,
    "^": lambda a, b: a ^ b,
    "&&": lambda a, b: ((a != 0) & (b != 0)).astype(np.int64),
    "||": lambda a, b: ((a != 0) | (b != 0)).astype(np.int64),
    "==": lambda a, b: (a == b).astype(np.int64),
    "!=": lambda a, b: (a != b).astype(np.int64),
    "<": lambda a, b: (a < b).astype(np.int64),
    ">": lambda a, b: (a > b).astype(np.int64),
    "<=": lambda a, b: (a <= b).astype(np.int64),
    ">=": lambda a, b: (a >= b).astype(np.int64),
}


def binop_v(op: str, a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    return wrap32_v(_VECTOR[op](a, b))


def unop_v(op: str, a) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64)
    if op == "-":
        return wrap32_v(-a)
    if op == "!":
        return (a == 0).astype(np.int64)
    if op == "~":
        return wrap32_v(~a)
    raise ValueError(f"unknown unary operator {op!r}")


def ternary_v(c, a, b) -> np.ndarray:
    return np.where(np.asarray(c) != 0, a, b).astype(np.int64)


# -- intrinsics ---------------------------------------------------------------
#
# hash2/hash3: murmur3-style multiply-xor-shift mixing of each argument into a
# seeded accumulator, masked to 31 bits so results are non-negative.

_H_INIT = 0x9E3779B9
_H_M1 = 0x85EBCA6B
_H_M2 = 0xC2B2AE35
_H_M3 = 0x27D4EB2F


def _mix(h: int, x: int) -> int:
    h ^= x & _MASK32
    h = (h * _H_M1) & _MASK32
    h ^= h >> 15
    h = (h * _H_M2) & _MASK32
    h ^= h >> 13
    return h


def _hash(args, seed: int) -> int:
    h = (_H_INIT ^ (seed & _MASK32)) & _MASK32
    for x in args:
        h = _mix(h, x)
    h = (h * _H_M3) & _MASK32
    h ^= h >> 16
    return h & 0x7FFFFFFF


def _mix_v(h, x):
    h = h ^ (x & _MASK32)
    h = (h * _H_M1) & _MASK32
    h = h ^ (h >> 15)
    h = (h * _H_M2) & _MASK32
    h = h ^ (h >> 13)
    return h


def _hash_v(args, seed: int):
    h = np.full(np.shape(args[0]), (_H_INIT ^ (seed & _MASK32)) & _MASK32, dtype=np.int64)
    for x in args:
        h = _mix_v(h, np.asarray(x, dtype=np.int64))
    h = (h * _H_M3) & _MASK32
    h = h ^ (h >> 16)
    return h & 0x7FFFFFFF


def _isqrt(x: int) -> int:
    return math.isqrt(x) if x > 0 else 0


def call_intrinsic(name: str, args, seed: int = 0) -> int:
    if name == "hash2" or name == "hash3":
        return _hash(args, seed)
    if name == "sqrt":
        return _isqrt(args[0])
    raise ValueError(f"unknown intrinsic {name!r}")


def call_intrinsic_v(name: str, args, seed: int = 0) -> np.ndarray:
    if name == "hash2" or name == "hash3":
        return _hash_v(args, seed)
    if name == "sqrt":
        a = np.asarray(args[0], dtype=np.int64)
        r = np.floor(np.sqrt(np.maximum(a, 0).astype(np.float64))).astype(np.int64)
        # float sqrt can be off by one near perfect squares
        r = np.where(r * r > a, r - 1, r)
        r = np.where((r + 1) * (r + 1) <= a, r + 1, r)
        return np.where(a > 0, r, 0)
    raise ValueError(f"unknown intrinsic {name!r}")
