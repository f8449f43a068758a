"""Parser whitelist and stack-code generation."""

from __future__ import annotations

import pytest

from regvm.bench import SUITE, program_source, sample_source
from regvm.errors import CompileError, ParseError
from regvm.frontend import compile_source
from regvm.isa import HAS_DYNAMIC_STACK_EFFECT, Opcode, StackOp, stack_depths, validate

ADD_OPCODES = ["LOAD_FAST", "LOAD_FAST", "BINARY_ADD", "STORE_FAST", "LOAD_FAST", "RETURN_VALUE"]
COUNT_THRESHOLD_OPCODES = [
    "LOAD_GLOBAL", "BUILD_LIST", "LOAD_FAST", "GET_ITER", "FOR_ITER", "STORE_FAST",
    "LOAD_FAST", "LOAD_FAST", "COMPARE_OP", "LIST_APPEND", "JUMP_ABSOLUTE",
    "CALL_FUNCTION", "RETURN_VALUE",
]


def names(code) -> list[str]:
    return [op.opcode.name for op in code.ops]


def test_add_opcode_sequence():
    code = compile_source(sample_source("add")).functions["add"]
    assert names(code) == ADD_OPCODES
    assert [code.varnames[op.arg] for op in code.ops if op.opcode is Opcode.LOAD_FAST] == ["x", "y", "z"]


def test_count_threshold_opcode_sequence():
    code = compile_source(sample_source("count_threshold")).functions["count_threshold"]
    assert names(code) == COUNT_THRESHOLD_OPCODES
    offsets = [op.offset for op in code.ops]
    # the loop header sits at offset 10 and the loop exit at 31
    assert offsets[4] == 10 and offsets[11] == 31
    assert code.ops[4].arg == 31 and code.ops[10].arg == 10
    assert code.names[code.ops[0].arg] == "sum"
    # comprehension variable is a plain local
    assert "xi" in code.varnames


def test_offsets_follow_op_sizes():
    code = compile_source(program_source("fannkuch")).functions["fannkuch"]
    for a, b in zip(code.ops, code.ops[1:]):
        assert b.offset == a.offset + a.size
    assert StackOp(Opcode.BINARY_ADD).size == 1
    assert StackOp(Opcode.LOAD_FAST, 0).size == 3


def test_implicit_return_none():
    code = compile_source("def f():\n    x = 1\n").functions["f"]
    assert names(code)[-2:] == ["LOAD_CONST", "RETURN_VALUE"]
    assert code.consts[code.ops[-2].arg] is None


def test_for_loop_shape():
    code = compile_source("def f(xs):\n    for x in xs:\n        y = x\n").functions["f"]
    seq = names(code)
    i = seq.index("GET_ITER")
    assert seq[i:i + 3] == ["GET_ITER", "FOR_ITER", "STORE_FAST"]
    jumps = [op for op in code.ops if op.opcode is Opcode.JUMP_ABSOLUTE]
    assert jumps[-1].arg == code.ops[i + 1].offset


@pytest.mark.parametrize("name", SUITE)
def test_suite_stack_code_validates(name):
    module = compile_source(program_source(name))
    for _, code in module.all_codes():
        assert validate(code) == []
        stack_depths(code)


def test_try_finally_sets_dynamic_flag():
    module = compile_source(sample_source("finally"))
    flagged = [n for n, c in module.all_codes() if HAS_DYNAMIC_STACK_EFFECT in c.flags]
    assert flagged
    for n, c in module.all_codes():
        has_end = any(op.opcode is Opcode.END_FINALLY for op in c.ops)
        assert has_end == (n in flagged)
        assert validate(c) == []


@pytest.mark.parametrize("source, message", [
    ("def f(x):\n    return x[1:2]\n", "slices are not supported"),
    ("def f(*a):\n    return 1\n", "only plain positional parameters"),
    ("def f():\n    while True:\n        try:\n            break\n        finally:\n            pass\n",
     "'break' inside try/finally"),
    ("def f():\n    continue\n", "'continue' outside loop"),
    ("x = 1 < 2 < 3\n", "chained comparisons"),
    ("def f():\n    try:\n        pass\n    except E:\n        pass\n", "only try/finally"),
    ("def f():\n    def g():\n        pass\n", "nested definitions"),
    ("def f(:\n", ""),
])
def test_rejected_sources(source, message):
    with pytest.raises(CompileError) as info:
        compile_source(source)
    assert message in str(info.value)
    assert info.value.line >= 1


def test_break_in_loop_nested_in_try_is_accepted():
    src = ("def f(n):\n    t = 0\n    try:\n        for i in range(n):\n"
           "            if i == 2:\n                break\n            t += i\n"
           "    finally:\n        t += 10\n    return t\n")
    compile_source(src)


def test_error_position():
    with pytest.raises(ParseError) as info:
        compile_source("def f():\n    return a[1:]\n")
    assert info.value.line == 2
    assert str(info.value).startswith("line 2, column")


def test_integer_literal_range():
    compile_source("def f():\n    return -4611686018427387904\n")
    with pytest.raises(CompileError):
        compile_source("def f():\n    return 4611686018427387904\n")
