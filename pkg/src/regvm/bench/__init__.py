"""Benchmark corpus and measurement harness.

Each benchmark is a ``.fal`` program whose ``main()`` prints a
deterministic result. :func:`run_suite` measures every benchmark under the
baseline stack VM and three register-VM variants and reports one
:class:`BenchResult` per (benchmark, config) pair.
"""

from __future__ import annotations

import csv
import gc
import io
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, TextIO

from ..frontend import CompiledModule, compile_source
from ..machine import STACK_CONFIG, RunResult, VmConfig, run_module
from ..optimizer import optimize
from ..translator import Untranslatable, translate

SUITE = (
    "matmul",
    "decision_tree",
    "wordcount",
    "xtea",
    "quicksort",
    "fasta",
    "count_threshold",
    "fannkuch",
)
# Extra programs outside the measured suite.
MICRO = ("dispatch_loop", "attr_loop")

CSV_HEADER = (
    "benchmark",
    "config",
    "median_ms",
    "dynamic_ops",
    "static_stack_ops",
    "static_reg_ops_unopt",
    "static_reg_ops_opt",
    "compile_ms",
)

BENCH_CONFIGS = (
    STACK_CONFIG,
    VmConfig(optimize=False, tagging=False),
    VmConfig(optimize=True, tagging=False),
    VmConfig(optimize=True, tagging=True),
)


def program_source(name: str) -> str:
    return resources.files(__package__).joinpath("programs", f"{name}.fal").read_text()


def sample_source(name: str) -> str:
    """One of the small reference programs (``add``, ``count_threshold``, ``finally``)."""
    return resources.files(__package__).joinpath("samples", f"{name}.fal").read_text()


def build_suite() -> dict[str, str]:
    return {name: program_source(name) for name in SUITE}


class BenchmarkFailed(RuntimeError):
    pass


@dataclass
class StaticCounts:
    stack_ops: int
    reg_ops_unopt: int
    reg_ops_opt: int
    registers_unopt: int
    registers_opt: int
    # per function: translate + optimize wall time in ms
    compile_ms: dict[str, float]


def static_counts(module: CompiledModule) -> StaticCounts:
    """Static op counts over the module's translatable code objects."""
    stack = unopt = opt = regs_u = regs_o = 0
    times: dict[str, float] = {}
    for name, code in module.all_codes():
        t0 = time.perf_counter()
        rc = translate(code)
        if isinstance(rc, Untranslatable):
            continue
        oc = optimize(rc)
        times[name] = (time.perf_counter() - t0) * 1000.0
        stack += len(code.ops)
        unopt += rc.op_count()
        opt += oc.op_count()
        regs_u += rc.num_registers
        regs_o += oc.num_registers
    return StaticCounts(stack, unopt, opt, regs_u, regs_o, times)


@dataclass
class BenchResult:
    benchmark: str
    config: str
    median_ms: float
    dynamic_ops: int
    static_stack_ops: int
    static_reg_ops_unopt: int
    static_reg_ops_opt: int
    compile_ms: float
    output: str = ""
    runs_ms: tuple[float, ...] = ()

    def row(self) -> list[str]:
        return [
            self.benchmark,
            self.config,
            f"{self.median_ms:.3f}",
            str(self.dynamic_ops),
            str(self.static_stack_ops),
            str(self.static_reg_ops_unopt),
            str(self.static_reg_ops_opt),
            f"{self.compile_ms:.3f}",
        ]


def _checked(name: str, config: VmConfig, result: RunResult) -> RunResult:
    if result.error is not None:
        raise BenchmarkFailed(f"{name} [{config.describe()}]: {result.error}")
    return result


def time_configs(
    name: str,
    module: CompiledModule,
    configs: Iterable[VmConfig],
    runs: int = 5,
    warmup: int = 1,
) -> dict[VmConfig, tuple[list[float], RunResult]]:
    """Wall times per config; runs are interleaved across configs so slow
    drift in machine speed affects every config alike. The host garbage
    collector is paused during each timed run."""
    configs = list(configs)
    times: dict[VmConfig, list[float]] = {c: [] for c in configs}
    last: dict[VmConfig, RunResult] = {}
    for k in range(warmup + runs):
        for c in configs:
            gc.collect()
            gc.disable()
            try:
                t0 = time.perf_counter()
                r = run_module(module, c)
                dt = (time.perf_counter() - t0) * 1000.0
            finally:
                gc.enable()
            last[c] = _checked(name, c, r)
            if k >= warmup:
                times[c].append(dt)
    return {c: (times[c], last[c]) for c in configs}


def paired_ratio(base: list[float], other: list[float]) -> float:
    """Median of per-round ``base / other`` for samples from :func:`time_configs`.

    Runs with the same index come from the same interleaved round, so the
    ratio cancels drift that a ratio of medians would pick up.
    """
    return statistics.median(b / o for b, o in zip(base, other))


def measure(
    name: str,
    source: str,
    configs: Iterable[VmConfig] = BENCH_CONFIGS,
    runs: int = 5,
    warmup: int = 1,
) -> list[BenchResult]:
    if runs < 1:
        raise ValueError("runs must be >= 1")
    module = compile_source(source)
    counts = static_counts(module)
    configs = list(configs)
    timed = time_configs(name, module, configs, runs, warmup)
    reference = timed[configs[0]][1].output
    results = []
    for c in configs:
        samples, r = timed[c]
        if r.output != reference:
            raise BenchmarkFailed(f"{name}: output of {c.describe()} differs from "
                                  f"{configs[0].describe()}")
        counted = _checked(name, c, run_module(module, c.with_(count_instructions=True)))
        compile_ms = sum(r.machine.compile_ms.values())
        results.append(BenchResult(
            name, c.describe(), statistics.median(samples), counted.counters.total,
            counts.stack_ops, counts.reg_ops_unopt, counts.reg_ops_opt, compile_ms,
            r.output, tuple(samples),
        ))
    return results


def run_suite(
    names: Iterable[str] = SUITE,
    configs: Iterable[VmConfig] = BENCH_CONFIGS,
    runs: int = 5,
    warmup: int = 1,
    parallel: bool = False,
    sources: dict[str, str] | None = None,
) -> list[BenchResult]:
    names = list(names)
    configs = list(configs)

    def one(name: str) -> list[BenchResult]:
        src = sources[name] if sources and name in sources else program_source(name)
        return measure(name, src, configs, runs, warmup)

    if parallel:
        with ThreadPoolExecutor(max_workers=len(names) or 1) as pool:
            chunks = list(pool.map(one, names))
    else:
        chunks = [one(n) for n in names]
    return [r for chunk in chunks for r in chunk]


def write_csv(results: Iterable[BenchResult], out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in results:
        w.writerow(r.row())


def to_csv(results: Iterable[BenchResult]) -> str:
    buf = io.StringIO()
    write_csv(results, buf)
    return buf.getvalue()


def reduction(before: int, after: int) -> float:
    return 1.0 - after / before if before else 0.0


def summarize(results: list[BenchResult]) -> dict[str, float]:
    """Suite-wide means of the static reductions plus the matmul tagging ratio."""
    per_bench: dict[str, BenchResult] = {}
    for r in results:
        per_bench.setdefault(r.benchmark, r)
    stack_to_reg = [reduction(r.static_stack_ops, r.static_reg_ops_unopt) for r in per_bench.values()]
    opt = [reduction(r.static_reg_ops_unopt, r.static_reg_ops_opt) for r in per_bench.values()]
    summary = {
        "mean_static_reduction_stack_to_reg": statistics.mean(stack_to_reg) if stack_to_reg else 0.0,
        "mean_static_reduction_optimizer": statistics.mean(opt) if opt else 0.0,
    }
    by_key = {(r.benchmark, r.config): r for r in results}
    tagged = by_key.get(("matmul", "reg-opt-tagged-direct-hints"))
    untagged = by_key.get(("matmul", "reg-opt-untagged-direct-hints"))
    if tagged and untagged and tagged.median_ms > 0:
        summary["matmul_tagged_speedup"] = untagged.median_ms / tagged.median_ms
    return summary


__all__ = [
    "BENCH_CONFIGS", "BenchResult", "BenchmarkFailed", "CSV_HEADER", "MICRO",
    "SUITE", "StaticCounts", "build_suite", "measure", "paired_ratio", "program_source",
    "reduction", "run_suite", "sample_source", "static_counts", "summarize", "time_configs",
    "to_csv", "write_csv",
]
