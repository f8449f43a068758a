"""Comparison key for differential runs: output, error and final globals."""

from __future__ import annotations

from regvm.machine import STACK_CONFIG, VmConfig, all_reg_configs, run_module
from regvm.values import Class, snapshot

DIFF_CONFIGS = all_reg_configs()


def _state(v) -> object:
    # class attributes are part of the observable global state
    if v.__class__ is Class:
        return snapshot(v), snapshot(v.dict)
    return snapshot(v)


def outcome(result) -> tuple:
    g = result.globals
    state = None if g is None else tuple((k, _state(v)) for k, v in zip(g.keys, g.values))
    err = None if result.error is None else (type(result.error).__name__, str(result.error))
    return result.output, err, state


def mismatches(module, configs: list[VmConfig] = DIFF_CONFIGS) -> list[str]:
    """Configs whose outcome differs from the stack VM's."""
    ref = outcome(run_module(module, STACK_CONFIG, worker=False))
    bad = []
    for c in configs:
        if outcome(run_module(module, c, worker=False)) != ref:
            bad.append(c.describe())
    return bad
