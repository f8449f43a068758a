"""Register VM: dispatch strategies, counting, hints and the stack-VM fallback."""

from __future__ import annotations

import pytest

from adversarial import ADVERSARIAL, expected
from regvm.bench import program_source, sample_source
from regvm.frontend import compile_source
from regvm.isa import Opcode
from regvm.machine import (
    STACK_CONFIG, Dispatch, Engine, Machine, VmConfig, all_reg_configs, load_module, run_source,
)
from regvm.optimizer import optimize
from regvm.reg_vm import exec_reg, resolve_dispatch
from regvm.translator import translate
from regvm.values import Int

ALL = [STACK_CONFIG] + all_reg_configs() + [VmConfig(optimize=False)]

@pytest.mark.parametrize("name", sorted(ADVERSARIAL))
def test_adversarial_hint_programs(name):
    src = ADVERSARIAL[name][0]
    want = expected(name)
    for config in ALL:
        r = run_source(src, config)
        assert r.error is None, (config.describe(), r.error)
        assert r.output == want, config.describe()
    on = run_source(src, VmConfig(hints=True, count_instructions=True))
    off = run_source(src, VmConfig(hints=False, count_instructions=True))
    assert on.output == off.output
    assert off.counters.hint_hits == off.counters.hint_misses == 0


def test_monomorphic_attr_loop_hit_rate():
    r = run_source(program_source("attr_loop"), VmConfig(count_instructions=True))
    hits, misses = r.counters.hint_hits, r.counters.hint_misses
    assert hits + misses >= 60_000
    assert hits / (hits + misses) >= 0.9


def test_method_call_sites_are_not_hinted():
    src = ("class C:\n    def m(self):\n        return 1\n\n"
           "def main():\n    c = C()\n    t = 0\n    for i in range(50):\n        t = t + c.m()\n    print(t)\n")
    r = run_source(src, VmConfig(count_instructions=True))
    assert r.output == "50\n"
    assert r.counters.hint_hits == 0


@pytest.mark.parametrize("dispatch", list(Dispatch))
def test_resolve_dispatch_links_instructions(dispatch):
    module = compile_source(sample_source("count_threshold"))
    rc = optimize(translate(module.functions["count_threshold"]))
    p = resolve_dispatch(rc, dispatch)
    assert len(p.instrs) == rc.op_count()
    assert p.entry is p.instrs[0]
    if dispatch is Dispatch.DIRECT:
        assert all(callable(i.h) for i in p.instrs)
    else:
        assert len(p.table) >= len(Opcode)
    fi = next(i for i in p.instrs if i.opcode == Opcode.FOR_ITER)
    assert fi.next is not None and fi.jump is not None


def test_exec_reg_direct_call():
    module = compile_source(sample_source("add"))
    rc = optimize(translate(module.functions["add"]))
    for config in all_reg_configs():
        m = Machine(config)
        g = load_module(module, m)
        assert exec_reg(rc, [Int(3), Int(4)], g, m) == Int(7)


def test_dynamic_counts_deterministic_and_dispatch_independent():
    src = program_source("quicksort")
    totals = set()
    for d in Dispatch:
        for _ in range(2):
            r = run_source(src, VmConfig(dispatch=d, count_instructions=True))
            totals.add(r.counters.reg_total)
    assert len(totals) == 1
    stack = run_source(src, STACK_CONFIG.with_(count_instructions=True))
    assert stack.counters.reg_total == 0 and stack.counters.stack_total > 0
    # the register form executes fewer instructions than the stack form
    assert totals.pop() < stack.counters.stack_total


def test_optimized_executes_fewer_instructions():
    src = program_source("matmul")
    u = run_source(src, VmConfig(optimize=False, count_instructions=True)).counters.total
    o = run_source(src, VmConfig(count_instructions=True)).counters.total
    assert o < u


def test_end_finally_function_falls_back_to_stack_vm():
    src = sample_source("finally")
    for config in all_reg_configs() + [VmConfig(optimize=False)]:
        r = run_source(src, config.with_(count_instructions=True))
        assert r.error is None
        assert r.output == "1\n"
        counts = r.counters.as_dict()
        assert "END_FINALLY" in counts["stack"] or "SETUP_FINALLY" in counts["stack"]
        assert counts["reg"]


def test_finally_runs_on_every_exit():
    src = """
log = []

def work(n):
    try:
        if n == 0:
            return "zero"
        for i in range(n):
            if i == 2:
                return i
        log.append(n)
    finally:
        log.append(-n)
    return "done"

def main():
    print(work(0), work(1), work(5), log)
"""
    for config in ALL:
        r = run_source(src, config)
        assert r.output == "zero done 2 [0, 1, -1, -5]\n", config.describe()


@pytest.mark.parametrize("config", ALL, ids=lambda c: c.describe())
def test_runtime_errors_match(config):
    cases = {
        "def main():\n    print(1 / 0)\n": "ZeroDivision",
        "def main():\n    x = [1]\n    print(x[5])\n": "Index",
        "def main():\n    print(undefined_name)\n": "Name",
        "def main():\n    print(1 + 'a')\n": "Type",
        "def main():\n    print(1 << -1)\n": "Value",
        "def f():\n    return f()\n\ndef main():\n    f()\n": "Recursion",
    }
    for src, kind in cases.items():
        r = run_source(src, config)
        assert r.error is not None and kind in type(r.error).__name__, (src, r.error)


def test_unassigned_local_reads_none():
    src = "def f(c):\n    if c:\n        x = 1\n    return x\n\ndef main():\n    print(f(False), f(True))\n"
    for config in ALL:
        assert run_source(src, config).output == "None 1\n"


def test_engine_field():
    assert STACK_CONFIG.engine is Engine.STACK
    assert len(all_reg_configs()) == 12
    assert len({c.describe() for c in all_reg_configs()}) == 12
