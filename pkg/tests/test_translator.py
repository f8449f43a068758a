"""Stack-to-register translation."""

from __future__ import annotations

import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from listing import alpha_equivalent, op_count, parse
from reference import COUNT_THRESHOLD_UNOPT
from regvm.bench import SUITE, program_source, sample_source
from regvm.frontend import compile_source
from regvm.isa import Opcode, disassemble_reg, validate
from regvm.machine import STACK_CONFIG, VmConfig, run_source
from regvm.translator import (
    RegisterAllocator, Untranslatable, parallel_moves, split_blocks, translate,
)


def _fn(src: str, name: str = "f"):
    return compile_source(src).functions[name]


def test_count_threshold_blocks():
    code = compile_source(sample_source("count_threshold")).functions["count_threshold"]
    cfg = split_blocks(code)
    assert [b.label for b in cfg.blocks] == ["bb_0", "bb_10", "bb_13", "bb_31"]
    assert sorted(cfg.edges()) == sorted([
        ("bb_0", "bb_10"), ("bb_10", "bb_13"), ("bb_10", "bb_31"), ("bb_13", "bb_10"),
    ])


def test_count_threshold_unoptimized_golden():
    code = compile_source(sample_source("count_threshold")).functions["count_threshold"]
    rc = translate(code)
    text = disassemble_reg(rc)
    assert op_count(text) == 10
    assert len(rc.blocks) == 4
    assert alpha_equivalent(text, COUNT_THRESHOLD_UNOPT), text
    # the store to xi is a register move from the FOR_ITER result
    moves = [it for it in parse(text) if it[0] == "op" and it[2] == "MOVE"]
    assert len(moves) == 1
    xi = code.varnames.index("xi")
    assert moves[0][1] == f"r{xi}"
    assert validate(rc) == []


def test_add_unoptimized_has_store_then_read():
    rc = translate(_fn(sample_source("add"), "add"))
    ops = [op for b in rc.blocks for op in b.ops]
    assert [op.opcode for op in ops] == [Opcode.BINARY_ADD, Opcode.MOVE, Opcode.RETURN_VALUE]
    z = rc.varnames.index("z")
    assert ops[1].dst == z and ops[2].srcs == (z,)
    assert ops[0].srcs == (0, 1)


def test_register_layout():
    rc = translate(_fn("def f(a, b):\n    c = a * 3\n    return c + b\n"))
    assert rc.num_locals == 3
    assert rc.temp_base == rc.num_locals + rc.num_consts
    for b in rc.blocks:
        for op in b.ops:
            if op.dst is not None and op.opcode is not Opcode.MOVE:
                assert op.dst >= rc.temp_base


def test_end_finally_is_untranslatable():
    module = compile_source(sample_source("finally"))
    results = {n: translate(c) for n, c in module.all_codes()}
    bad = [n for n, r in results.items() if isinstance(r, Untranslatable)]
    assert bad
    assert str(results[bad[0]]) == "<untranslatable: dynamic stack effect>"
    for n, r in results.items():
        if n not in bad:
            assert validate(r) == []


def test_merge_inserts_moves():
    src = "def f(c, a, b):\n    return (a if c else b) + 1\n"
    rc = translate(_fn(src))
    assert validate(rc) == []
    moves = [op for b in rc.blocks for op in b.ops if op.opcode is Opcode.MOVE]
    assert moves, disassemble_reg(rc)
    for c, want in ((True, 3), (False, 5)):
        out = run_source(f"{src}\ndef main():\n    print(f({c}, 2, 4))\n",
                         VmConfig(optimize=False)).output
        assert out.strip() == str(want)


def test_block_final_ops_carry_fallthrough():
    rc = translate(_fn(sample_source("count_threshold"), "count_threshold"))
    labels = {b.label for b in rc.blocks}
    for b in rc.blocks:
        last = b.ops[-1]
        if last.opcode is not Opcode.RETURN_VALUE:
            assert last.targets and set(last.targets) <= labels


@pytest.mark.parametrize("name", SUITE)
def test_suite_translates_and_validates(name):
    module = compile_source(program_source(name))
    for _, code in module.all_codes():
        rc = translate(code)
        assert not isinstance(rc, Untranslatable)
        assert validate(rc) == []


@given(st.lists(st.integers(0, 7), min_size=1, max_size=8), st.randoms())
def test_parallel_moves_match_simultaneous_assignment(srcs, rnd):
    dsts = list(range(len(srcs)))
    rnd.shuffle(dsts)
    pairs = list(zip(dsts, srcs))
    fresh = RegisterAllocator(100)
    before = {r: f"v{r}" for r in range(8)}
    want = dict(before)
    for d, s in pairs:
        want[d] = before[s]
    regs = dict(before)
    for op in parallel_moves(pairs, fresh):
        regs[op.dst] = regs[op.srcs[0]]
    assert {r: regs[r] for r in range(8)} == want


def test_parallel_moves_swap_uses_temp():
    ops = parallel_moves([(0, 1), (1, 0)], RegisterAllocator(10))
    assert len(ops) == 3
    assert any(op.dst >= 10 for op in ops)


def test_translation_preserves_semantics_on_samples():
    for name in ("add", "count_threshold", "finally"):
        src = sample_source(name)
        ref = run_source(src, STACK_CONFIG).output
        assert run_source(src, VmConfig(optimize=False)).output == ref


def test_translate_random_functions_validate():
    from regvm.progen import generate_program

    for seed in random.Random(7).sample(range(10_000), 30):
        module = compile_source(generate_program(seed))
        for _, code in module.all_codes():
            rc = translate(code)
            if not isinstance(rc, Untranslatable):
                assert validate(rc) == []
