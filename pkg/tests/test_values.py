"""Integer representation: 63-bit wrapping, tagging and arithmetic semantics."""

from __future__ import annotations

import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import c_div, c_mod, wrap63
from regvm.errors import VMValueError, VMZeroDivisionError
from regvm.frontend import compile_source
from regvm.isa import Opcode
from regvm.machine import STACK_CONFIG, Machine, all_reg_configs, call_value, load_module
from regvm.semantics import int_arith
from regvm.tagging import WMAX, WMIN, box, is_int, tag_int, unbox, untag_int, word, wrap_word
from regvm.values import INT_MAX, INT_MIN, Int, make_int, wrap_int

ints63 = st.integers(min_value=INT_MIN, max_value=INT_MAX)
edges = st.sampled_from([0, 1, -1, 2, -2, INT_MAX, INT_MIN, INT_MAX - 1, INT_MIN + 1, 1 << 31])
operands = st.one_of(ints63, edges, st.integers(-100, 100))


def test_tag_round_trip_100k():
    rng = random.Random(20261015)
    specials = [0, 1, -1, INT_MAX, INT_MIN]
    for k in range(100_000):
        n = specials[k] if k < len(specials) else rng.randint(INT_MIN, INT_MAX)
        w = tag_int(n)
        assert is_int(w)
        assert WMIN <= w <= WMAX
        assert wrap_word(w) == w
        assert untag_int(w) == n
        assert box(w) == Int(n)
        assert unbox(Int(n)) == w


@given(ints63)
def test_tag_round_trip_property(n):
    assert untag_int(tag_int(n)) == n
    assert tag_int(n) & 1 == 1


def test_tag_rejects_out_of_range():
    with pytest.raises(OverflowError):
        tag_int(INT_MAX + 1)
    with pytest.raises(OverflowError):
        tag_int(INT_MIN - 1)


def test_handles_are_untagged():
    obj = [1, 2]
    assert word(obj) == id(obj)
    assert box(obj) is obj
    assert unbox(obj) is obj
    assert unbox(Int(5), tagging=False) == Int(5)


@given(st.integers(-(1 << 80), 1 << 80))
def test_wrap_matches_oracle(n):
    assert wrap_int(n) == wrap63(n)
    assert make_int(n).v == wrap63(n)


_ORACLE = {
    Opcode.BINARY_ADD: lambda x, y: wrap63(x + y),
    Opcode.BINARY_SUBTRACT: lambda x, y: wrap63(x - y),
    Opcode.BINARY_MULTIPLY: lambda x, y: wrap63(x * y),
    Opcode.BINARY_DIVIDE: c_div,
    Opcode.BINARY_MODULO: c_mod,
    Opcode.BINARY_AND: lambda x, y: x & y,
    Opcode.BINARY_OR: lambda x, y: x | y,
    Opcode.BINARY_XOR: lambda x, y: x ^ y,
    Opcode.BINARY_LSHIFT: lambda x, y: wrap63(x << min(y, 64)),
    Opcode.BINARY_RSHIFT: lambda x, y: x >> min(y, 64),
}
_SYMBOL = {
    Opcode.BINARY_ADD: "+", Opcode.BINARY_SUBTRACT: "-", Opcode.BINARY_MULTIPLY: "*",
    Opcode.BINARY_DIVIDE: "/", Opcode.BINARY_MODULO: "%", Opcode.BINARY_AND: "&",
    Opcode.BINARY_OR: "|", Opcode.BINARY_XOR: "^", Opcode.BINARY_LSHIFT: "<<",
    Opcode.BINARY_RSHIFT: ">>",
}


@given(st.sampled_from(sorted(_ORACLE)), operands, operands)
def test_int_arith_matches_oracle(opc, x, y):
    if opc in (Opcode.BINARY_DIVIDE, Opcode.BINARY_MODULO) and y == 0:
        with pytest.raises(VMZeroDivisionError):
            int_arith(opc, x, y)
    elif opc in (Opcode.BINARY_LSHIFT, Opcode.BINARY_RSHIFT) and y < 0:
        with pytest.raises(VMValueError):
            int_arith(opc, x, y)
    else:
        assert int_arith(opc, x, y) == _ORACLE[opc](x, y)


_CONFIGS = [STACK_CONFIG] + all_reg_configs()
_MODULES = {
    opc: compile_source(f"def f(x, y):\n    return x {sym} y\n") for opc, sym in _SYMBOL.items()
}


@given(st.sampled_from(sorted(_ORACLE)), operands, st.one_of(operands, st.integers(0, 70)))
def test_engines_agree_with_arith_oracle(opc, x, y):
    """Each engine's inline fast paths and slow paths give the oracle's answer."""
    bad = (opc in (Opcode.BINARY_DIVIDE, Opcode.BINARY_MODULO) and y == 0) or (
        opc in (Opcode.BINARY_LSHIFT, Opcode.BINARY_RSHIFT) and y < 0)
    for config in _CONFIGS:
        machine = Machine(config)
        g = load_module(_MODULES[opc], machine)
        fn = g.get("f", None)
        if bad:
            with pytest.raises((VMZeroDivisionError, VMValueError)):
                call_value(machine, fn, [make_int(x), make_int(y)])
        else:
            got = call_value(machine, fn, [make_int(x), make_int(y)])
            assert got == Int(_ORACLE[opc](x, y)), config.describe()
