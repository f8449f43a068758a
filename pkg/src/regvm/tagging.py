"""Tagged register words.

A register holds either a tagged integer or a handle to a boxed value.
Tagged integers are host ints equal to the 64-bit word ``(n << 1) | 1``;
handles are the boxed objects themselves, whose word is their (aligned,
low bits 00) address. So ``w.__class__ is int`` is the tag test in the
interpreter, and :func:`word` exposes the raw bit pattern for checks.
"""

from __future__ import annotations

from typing import Any

from .values import INT_MAX, INT_MIN, Int

WORD_BITS = 64
WMIN = -(1 << (WORD_BITS - 1))
WMAX = (1 << (WORD_BITS - 1)) - 1
_WORD_MASK = (1 << WORD_BITS) - 1


def wrap_word(w: int) -> int:
    """Reduce to a signed 64-bit word; tagged ints keep their tag bit."""
    return ((w - WMIN) & _WORD_MASK) + WMIN


def tag_int(n: int) -> int:
    if not INT_MIN <= n <= INT_MAX:
        raise OverflowError(f"{n} does not fit in 63 bits")
    return (n << 1) | 1


def untag_int(w: int) -> int:
    return w >> 1


def word(v: Any) -> int:
    """Machine word for a register value."""
    if v.__class__ is int:
        return v
    return id(v)


def is_int(w: int) -> bool:
    """Tag test on a raw word."""
    return w & 1 == 1


def box(w: Any) -> Any:
    """Boxed value for a register word (identity for handles)."""
    return Int(w >> 1) if w.__class__ is int else w


def unbox(v: Any, tagging: bool = True) -> Any:
    """Register word for a boxed value: tags Ints when tagging is on."""
    if tagging and v.__class__ is Int:
        return (v.v << 1) | 1
    return v


def _unbox_tagged(v: Any) -> Any:
    return (v.v << 1) | 1 if v.__class__ is Int else v
