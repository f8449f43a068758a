"""Copy propagation, dead code elimination, renaming and the optimize fixpoint."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import regvm.optimizer as optmod
from listing import alpha_equivalent, op_count
from properties import check_pipeline, reg_codes
from reference import COUNT_THRESHOLD_OPT
from regvm.bench import SUITE, program_source, sample_source
from regvm.frontend import compile_source
from regvm.isa import Block, Opcode, RegCode, RegOp, disassemble_reg, validate
from regvm.machine import STACK_CONFIG, VmConfig, run_source
from regvm.optimizer import (
    SideEffect, block_liveness, copy_propagate, eliminate_dead_code, is_deletable,
    live_after, live_ranges, optimize, rename_registers, side_effect_class,
)
from regvm.progen import generate_program
from regvm.translator import Untranslatable, translate


def _reg(src: str, name: str = "f") -> RegCode:
    rc = translate(compile_source(src).functions[name])
    assert not isinstance(rc, Untranslatable)
    return rc


def _ops(code: RegCode) -> list[RegOp]:
    return [op for b in code.blocks for op in b.ops]


SUITE_CODES = [rc for name in SUITE for rc in reg_codes(program_source(name))]


def test_count_threshold_optimized_golden():
    rc = optimize(_reg(sample_source("count_threshold"), "count_threshold"))
    text = disassemble_reg(rc)
    assert op_count(text) == 9
    assert alpha_equivalent(text, COUNT_THRESHOLD_OPT), text


def test_add_optimized_is_two_ops():
    rc = optimize(_reg(sample_source("add"), "add"))
    ops = _ops(rc)
    assert [op.opcode for op in ops] == [Opcode.BINARY_ADD, Opcode.RETURN_VALUE]
    assert ops[1].srcs == (ops[0].dst,)


def test_copy_propagation_rewrites_uses():
    rc = _reg(sample_source("count_threshold"), "count_threshold")
    cp = copy_propagate(rc)
    xi = rc.varnames.index("xi")
    cmp = next(op for op in _ops(cp) if op.opcode is Opcode.COMPARE_OP)
    fi = next(op for op in _ops(cp) if op.opcode is Opcode.FOR_ITER)
    assert cmp.srcs[0] == fi.dst
    assert xi not in cmp.srcs
    # the move itself stays until DCE
    assert cp.op_count() == rc.op_count()
    dce = eliminate_dead_code(cp)
    assert dce.op_count() == rc.op_count() - 1
    assert not any(op.opcode is Opcode.MOVE for op in _ops(dce))


def test_copy_not_propagated_past_redefinition():
    src = "def f(a, b):\n    x = a\n    a = b\n    return x\n"
    cp = copy_propagate(_reg(src))
    ret = next(op for op in _ops(cp) if op.opcode is Opcode.RETURN_VALUE)
    # x = a is killed by the write to a, so the return must not read a
    assert ret.srcs != (0,)
    for c in (STACK_CONFIG, VmConfig()):
        assert run_source(src + "\ndef main():\n    print(f(1, 2))\n", c).output == "1\n"


def test_copy_not_propagated_across_loop_redefinition():
    src = ("def f(n):\n    a = 0\n    b = a\n    i = 0\n    while i < n:\n"
           "        a = a + 1\n        i = i + 1\n    return b\n")
    for c in (STACK_CONFIG, VmConfig(), VmConfig(tagging=False)):
        assert run_source(src + "\ndef main():\n    print(f(3))\n", c).output == "0\n"


def test_dce_keeps_effectful_ops():
    src = "def f(a, b):\n    t = a + b\n    g()\n    return 0\n"
    rc = optimize(_reg(src))
    opcodes = [op.opcode for op in _ops(rc)]
    assert Opcode.BINARY_ADD in opcodes
    assert Opcode.CALL_FUNCTION in opcodes
    assert Opcode.LOAD_GLOBAL in opcodes


def test_dce_removes_dead_list_but_not_nonempty_map():
    rc = optimize(_reg("def f(a):\n    x = [a, a]\n    y = {}\n    z = {a: 1}\n    return 0\n"))
    opcodes = [op.opcode for op in _ops(rc)]
    assert Opcode.BUILD_LIST not in opcodes
    assert opcodes.count(Opcode.BUILD_MAP) == 1


def test_side_effect_classes():
    assert side_effect_class(RegOp(Opcode.MOVE, 1, (2,))) is SideEffect.PURE_MOVE
    assert side_effect_class(RegOp(Opcode.BINARY_ADD, 1, (2, 3))) is SideEffect.MAY_RUN_USER_CODE
    assert side_effect_class(RegOp(Opcode.BUILD_LIST, 1)) is SideEffect.ALLOCATES
    assert is_deletable(RegOp(Opcode.MOVE, 1, (2,)))
    assert not is_deletable(RegOp(Opcode.LOAD_ATTR, 1, (2,), arg=0))
    assert not is_deletable(RegOp(Opcode.BUILD_MAP, 1, (2, 3), arg=1))


def test_rename_shares_slots():
    src = "def f(a):\n    b = a * 2 + 1\n    c = b * 3 + 1\n    return c * 4 + 1\n"
    before = _reg(src)
    after = optimize(before)
    assert after.num_registers < before.num_registers
    temps = sorted(r for r in live_ranges(before))
    assert len(temps) > after.num_registers - after.temp_base


def test_live_ranges_of_count_threshold():
    rc = optimize(_reg(sample_source("count_threshold"), "count_threshold"))
    ranges = live_ranges(rc)
    for r, pts in ranges.items():
        assert r >= rc.temp_base
        assert pts
    # the iterator is live across the whole loop
    get_iter = next(op for op in _ops(rc) if op.opcode is Opcode.GET_ITER)
    assert {lab for lab, _ in ranges[get_iter.dst]} >= {"bb_0", "bb_10", "bb_13"}


def test_liveness_equations():
    for rc in SUITE_CODES:
        live_in, live_out = block_liveness(rc)
        bm = rc.block_map()
        for b in rc.blocks:
            assert live_out[b.label] == set().union(*(live_in[s] for s in b.succs if s in bm))
        # nothing but locals and constants may be live on entry
        entry = live_in[rc.blocks[0].label]
        assert all(r < rc.temp_base for r in entry), (rc.name, entry)


def test_live_after_matches_block_liveness():
    for rc in SUITE_CODES[:10]:
        live_in, _ = block_liveness(rc)
        after = live_after(rc)
        for b in rc.blocks:
            live = set(after[b.label][0]) if b.ops else set()
            op = b.ops[0]
            if op.dst is not None:
                live.discard(op.dst)
            live.update(op.srcs)
            assert live == live_in[b.label]


@pytest.mark.parametrize("name", SUITE)
def test_suite_pipeline_properties(name):
    for rc in reg_codes(program_source(name)):
        check_pipeline(rc)


@settings(max_examples=60)
@given(st.integers(0, 1_000_000))
def test_random_program_pipeline_properties(seed):
    for rc in reg_codes(generate_program(seed)):
        check_pipeline(rc)


@pytest.mark.parametrize("single_pass", ["copy_propagate", "dce", "rename"])
def test_each_pass_preserves_behaviour(monkeypatch, single_pass):
    """Run programs with the optimizer replaced by one pass at a time."""
    passes = {
        "copy_propagate": copy_propagate,
        "dce": eliminate_dead_code,
        "rename": rename_registers,
    }
    monkeypatch.setattr(optmod, "optimize", passes[single_pass])
    for seed in range(40):
        src = generate_program(seed)
        ref = run_source(src, STACK_CONFIG)
        got = run_source(src, VmConfig(tagging=False))
        assert (got.output, type(got.error)) == (ref.output, type(ref.error)), seed


def test_optimizer_handles_empty_and_straight_line():
    rc = _reg("def f():\n    pass\n")
    assert optimize(rc).op_count() == 1


def test_dce_reattaches_fallthrough():
    # a block whose last op is a dead move must keep its successor edge
    blocks = [
        Block("bb_0", [RegOp(Opcode.LOAD_GLOBAL, 2, arg=0),
                       RegOp(Opcode.MOVE, 1, (0,), targets=("bb_1",))]),
        Block("bb_1", [RegOp(Opcode.RETURN_VALUE, srcs=(2,))]),
    ]
    rc = RegCode("t", 1, ("a", "b"), (), ("g",), 3, blocks)
    assert validate(rc) == []
    out = eliminate_dead_code(rc)
    assert validate(out) == []
    assert [op.opcode for op in out.blocks[0].ops] == [Opcode.LOAD_GLOBAL]
    assert out.blocks[0].ops[-1].targets == ("bb_1",)
