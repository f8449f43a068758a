"""Command-line front end: ``regvm compile|lower|run|bench|stats``.

Exit codes: 0 success, 1 user error (bad source, runtime error, failing
benchmark), 2 internal error.
"""

from __future__ import annotations

import argparse
import sys
import traceback
from pathlib import Path
from typing import NoReturn, Sequence, TextIO

from . import bench
from .errors import CompileError, TranslationError, VMError
from .frontend import CompiledModule, compile_source
from .isa import disassemble_reg, disassemble_stack
from .machine import Dispatch, Engine, VmConfig, run_module
from .optimizer import optimize
from .translator import Untranslatable, translate

EXIT_OK = 0
EXIT_USER = 1
EXIT_INTERNAL = 2


class UserError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # bad arguments are a user error, not argparse's default status 2
    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USER, f"{self.prog}: error: {message}\n")


def _load(path: str) -> CompiledModule:
    try:
        source = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise UserError(f"cannot read {path}: {e.strerror or e}") from e
    try:
        return compile_source(source)
    except CompileError as e:
        raise UserError(f"{path}: {e}") from e


def cmd_compile(args: argparse.Namespace, out: TextIO) -> int:
    module = _load(args.file)
    chunks = [f"{name}:\n{disassemble_stack(code)}" for name, code in module.all_codes()]
    out.write("\n".join(chunks))
    return EXIT_OK


def lower_text(module: CompiledModule, opt: bool = True) -> str:
    chunks = []
    for name, code in module.all_codes():
        rc = translate(code)
        if isinstance(rc, Untranslatable):
            body = f"{rc}\n"
        else:
            body = disassemble_reg(optimize(rc) if opt else rc)
        chunks.append(f"{name}:\n{body}")
    return "\n".join(chunks)


def cmd_lower(args: argparse.Namespace, out: TextIO) -> int:
    out.write(lower_text(_load(args.file), opt=not args.no_opt))
    return EXIT_OK


def _config(args: argparse.Namespace) -> VmConfig:
    return VmConfig(
        engine=Engine(args.engine),
        dispatch=Dispatch(args.dispatch),
        tagging=args.tagged,
        hints=args.hints,
        count_instructions=args.count,
        optimize=not args.no_opt,
    )


def _histogram(counts: dict[str, int]) -> list[str]:
    width = max((len(k) for k in counts), default=0)
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [f"  {name:<{width}} {n}" for name, n in ordered]


def cmd_run(args: argparse.Namespace, out: TextIO) -> int:
    module = _load(args.file)
    config = _config(args)
    result = run_module(module, config, out=out.write)
    out.flush()
    if args.count:
        counters = result.counters.as_dict()
        lines = [f"-- instruction counts ({config.describe()}) --"]
        for engine in ("stack", "reg"):
            if counters[engine]:
                lines.append(f"{engine}: {sum(counters[engine].values())}")
                lines.extend(_histogram(counters[engine]))
        hints = counters["hints"]
        if hints["hits"] or hints["misses"]:
            lines.append(f"hints: {hints['hits']} hits, {hints['misses']} misses")
        out.write("\n".join(lines) + "\n")
    if result.error is not None:
        print(f"{args.file}: {result.error}", file=sys.stderr)
        return EXIT_USER
    return EXIT_OK


def cmd_bench(args: argparse.Namespace, out: TextIO) -> int:
    if args.suite_dir:
        root = Path(args.suite_dir)
        files = sorted(root.glob("*.fal"))
        if not files:
            raise UserError(f"no .fal programs in {root}")
        sources = {p.stem: p.read_text(encoding="utf-8") for p in files}
        names = list(sources)
    else:
        sources = None
        names = list(bench.SUITE)
    if args.only:
        unknown = [n for n in args.only if n not in names]
        if unknown:
            raise UserError(f"unknown benchmark(s): {', '.join(unknown)}")
        names = [n for n in names if n in args.only]
    try:
        results = bench.run_suite(names, runs=args.runs, warmup=args.warmup,
                                  parallel=args.parallel, sources=sources)
    except bench.BenchmarkFailed as e:
        print(f"benchmark failed: {e}", file=sys.stderr)
        return EXIT_USER
    except CompileError as e:
        raise UserError(str(e)) from e
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            bench.write_csv(results, fh)
    else:
        bench.write_csv(results, out)
    summary = bench.summarize(results)
    for key, value in summary.items():
        print(f"{key}: {value:.3f}", file=sys.stderr)
    return EXIT_OK


def cmd_stats(args: argparse.Namespace, out: TextIO) -> int:
    module = _load(args.file)
    counts = bench.static_counts(module)
    out.write(f"static ops: stack {counts.stack_ops}, reg {counts.reg_ops_unopt} unoptimized, "
              f"{counts.reg_ops_opt} optimized\n")
    out.write(f"registers: {counts.registers_unopt} unoptimized, {counts.registers_opt} optimized\n")
    for name, ms in counts.compile_ms.items():
        out.write(f"  compile {name}: {ms:.3f} ms\n")
    if args.dynamic:
        for config in (bench.BENCH_CONFIGS[0], bench.BENCH_CONFIGS[-1]):
            r = run_module(module, config.with_(count_instructions=True), out=lambda s: None)
            if r.error is not None:
                print(f"{args.file}: {r.error}", file=sys.stderr)
                return EXIT_USER
            line = f"dynamic ops [{config.describe()}]: {r.counters.total}"
            if r.counters.hint_hits or r.counters.hint_misses:
                line += f" (hints {r.counters.hint_hits} hits, {r.counters.hint_misses} misses)"
            out.write(line + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="regvm",
        description="Compile .fal programs to stack and register bytecode and run them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="print stack bytecode")
    p.add_argument("file")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("lower", help="print register bytecode")
    p.add_argument("file")
    p.add_argument("--no-opt", action="store_true", help="skip the optimizer")
    p.set_defaults(func=cmd_lower)

    p = sub.add_parser("run", help="execute main()")
    p.add_argument("file")
    p.add_argument("--engine", choices=[e.value for e in Engine], default=Engine.REG.value)
    p.add_argument("--dispatch", choices=[d.value for d in Dispatch], default=Dispatch.DIRECT.value)
    p.add_argument("--tagged", action=argparse.BooleanOptionalAction, default=True,
                   help="tagged integer registers")
    p.add_argument("--hints", action=argparse.BooleanOptionalAction, default=True,
                   help="attribute lookup hints")
    p.add_argument("--count", action="store_true", help="print an opcode histogram")
    p.add_argument("--no-opt", action="store_true", help="skip the optimizer")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="run the benchmark suite and emit CSV")
    p.add_argument("suite_dir", nargs="?", help="directory of .fal programs (default: built-in suite)")
    p.add_argument("--csv", metavar="PATH", help="write CSV here instead of standard output")
    p.add_argument("--runs", type=int, default=5, help="measured runs per config (default 5)")
    p.add_argument("--warmup", type=int, default=1)
    p.add_argument("--parallel", action="store_true", help="run benchmarks on separate threads")
    p.add_argument("--only", nargs="+", metavar="NAME", help="subset of benchmarks")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("stats", help="static (and optionally dynamic) instruction counts")
    p.add_argument("file")
    p.add_argument("--dynamic", action="store_true", help="also run main() with counting")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv: Sequence[str] | None = None, out: TextIO | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "runs", 1) < 1:
        parser.error("--runs must be at least 1")
    out = out or sys.stdout
    try:
        return args.func(args, out)
    except UserError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USER
    except (TranslationError, VMError) as e:
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception:  # noqa: BLE001 - last-resort report for the exit code contract
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
