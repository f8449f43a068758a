"""Execution context, configuration, the shared call path and module loading."""

from __future__ import annotations

import io
import itertools
import sys
import threading
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable

from .builtins import BUILTINS
from .errors import VMArityError, VMError, VMRecursionError, VMTypeError
from .frontend import CompiledModule, compile_source
from .isa import NUM_OPCODES, Opcode, RegCode, StackCode
from .values import (
    BoundBuiltin,
    BoundMethod,
    Builtin,
    Class,
    Dict,
    Function,
    Instance,
    type_name,
)

RECURSION_LIMIT = 1000
# Host frames consumed per guest frame stay well below this, and the big
# worker stack keeps the C stack from overflowing first.
_HOST_RECURSION_LIMIT = 200_000
_WORKER_STACK_BYTES = 512 * 1024 * 1024


class Dispatch(Enum):
    SWITCH = "switch"
    TOKEN = "token"
    DIRECT = "direct"


class Engine(Enum):
    STACK = "stack"
    REG = "reg"


@dataclass(frozen=True)
class VmConfig:
    engine: Engine = Engine.REG
    dispatch: Dispatch = Dispatch.DIRECT
    tagging: bool = True
    hints: bool = True
    count_instructions: bool = False
    optimize: bool = True

    def with_(self, **changes: Any) -> VmConfig:
        return replace(self, **changes)

    def describe(self) -> str:
        if self.engine is Engine.STACK:
            return "stack"
        parts = [
            "reg",
            "opt" if self.optimize else "unopt",
            "tagged" if self.tagging else "untagged",
            self.dispatch.value,
            "hints" if self.hints else "nohints",
        ]
        return "-".join(parts)


def all_reg_configs(**common: Any) -> list[VmConfig]:
    """The 3 x 2 x 2 dispatch/tagging/hints grid."""
    return [
        VmConfig(dispatch=d, tagging=t, hints=h, **common)
        for d, t, h in itertools.product(Dispatch, (False, True), (False, True))
    ]


STACK_CONFIG = VmConfig(engine=Engine.STACK)


@dataclass
class Counters:
    stack: list[int] = field(default_factory=lambda: [0] * NUM_OPCODES)
    reg: list[int] = field(default_factory=lambda: [0] * NUM_OPCODES)
    # [hits, misses] of hinted LOAD_ATTR executions
    hints: list[int] = field(default_factory=lambda: [0, 0])

    @property
    def stack_total(self) -> int:
        return sum(self.stack)

    @property
    def reg_total(self) -> int:
        return sum(self.reg)

    @property
    def total(self) -> int:
        return self.stack_total + self.reg_total

    @property
    def hint_hits(self) -> int:
        return self.hints[0]

    @property
    def hint_misses(self) -> int:
        return self.hints[1]

    def as_dict(self) -> dict[str, dict[str, int]]:
        def named(counts: list[int]) -> dict[str, int]:
            return {Opcode(i).name: n for i, n in enumerate(counts) if n}

        return {
            "stack": named(self.stack),
            "reg": named(self.reg),
            "hints": {"hits": self.hints[0], "misses": self.hints[1]},
        }


class Machine:
    """State for one program execution: config, counters, caches, output."""

    def __init__(self, config: VmConfig | None = None, out: Callable[[str], Any] | None = None) -> None:
        self.config = config or VmConfig()
        self.counters = Counters()
        self.depth = 0
        self._buffer: io.StringIO | None = None
        if out is None:
            self._buffer = io.StringIO()
            out = self._buffer.write
        self.write = out
        self.use_reg = self.config.engine is Engine.REG
        self._reg: dict[int, tuple[StackCode, RegCode | None]] = {}
        self.prepared: dict[int, Any] = {}
        self.stack_decoded: dict[int, Any] = {}
        self.compile_ms: dict[str, float] = {}
        self.check_depths = False

    @property
    def output(self) -> str:
        return self._buffer.getvalue() if self._buffer is not None else ""

    def regcode_for(self, code: StackCode) -> RegCode | None:
        """Translated (and optionally optimized) form of ``code``; None if untranslatable."""
        entry = self._reg.get(id(code))
        if entry is None:
            from .optimizer import optimize
            from .translator import Untranslatable, translate

            t0 = time.perf_counter()
            rc = translate(code)
            if isinstance(rc, Untranslatable):
                rc = None
            elif self.config.optimize:
                rc = optimize(rc)
            self.compile_ms[code.name] = (time.perf_counter() - t0) * 1000.0
            entry = self._reg[id(code)] = (code, rc)
        return entry[1]

    def call_function(self, fn: Function, args: list) -> Any:
        code = fn.code
        n = len(args)
        if n != code.argcount:
            need = code.argcount - len(fn.defaults)
            if need <= n < code.argcount:
                args = args + list(fn.defaults[n - need:])
            else:
                raise VMArityError(
                    f"{fn.name}() takes {code.argcount} positional arguments but {n} were given"
                )
        self.depth += 1
        try:
            if self.depth > RECURSION_LIMIT:
                raise VMRecursionError("maximum recursion depth exceeded")
            if code.__class__ is RegCode:
                from .reg_vm import exec_reg

                return exec_reg(code, args, fn.globals, self)
            if self.use_reg:
                rc = self.regcode_for(code)
                if rc is not None:
                    from .reg_vm import exec_reg

                    return exec_reg(rc, args, fn.globals, self)
            from .stack_vm import exec_stack

            return exec_stack(code, args, fn.globals, self)
        finally:
            self.depth -= 1


def call_value(machine: Machine, callee: Any, args: list) -> Any:
    """The single call path shared by both engines. Arguments are boxed."""
    c = callee.__class__
    if c is Function:
        return machine.call_function(callee, args)
    if c is BoundMethod:
        return call_value(machine, callee.func, [callee.self, *args])
    if c is Builtin:
        return callee.fn(machine, args)
    if c is BoundBuiltin:
        return callee.fn(machine, callee.obj, args)
    if c is Class:
        obj = Instance(callee)
        found = callee.find("__init__")
        if found is not None:
            k, slot = found
            call_value(machine, k.dict.values[slot], [obj, *args])
        elif args:
            raise VMArityError(f"{callee.name}() takes no arguments ({len(args)} given)")
        return obj
    raise VMTypeError(f"'{type_name(callee)}' object is not callable")


# ---------------------------------------------------------------------------
# modules

def new_globals() -> Dict:
    g = Dict()
    for name, b in BUILTINS.items():
        g.set(name, b)
    return g


def load_module(module: CompiledModule, machine: Machine) -> Dict:
    """Bind hoisted functions and classes, then run the module's init code."""
    g = new_globals()
    for name, code in module.functions.items():
        g.set(name, Function(name, code, code.defaults, g))
    for info in module.classes:
        parent = None
        if info.parent is not None:
            parent = g.get(info.parent, None)
            if parent.__class__ is not Class:
                raise VMTypeError(f"base of class '{info.name}' is not a class: '{info.parent}'")
        cls = Class(info.name, parent)
        for attr, value in info.attrs:
            cls.dict.set(attr, value)
        for mname, code in info.methods.items():
            cls.dict.set(mname, Function(f"{info.name}.{mname}", code, code.defaults, g))
        g.set(info.name, cls)
    machine.call_function(Function(module.init.name, module.init, (), g), [])
    return g


@dataclass
class RunResult:
    output: str
    globals: Dict | None
    value: Any
    error: VMError | None
    counters: Counters
    machine: Machine


def run_in_worker(fn: Callable[[], Any]) -> Any:
    """Run ``fn`` on a thread with a large stack so deep guest recursion is safe."""
    if sys.getrecursionlimit() < _HOST_RECURSION_LIMIT:
        sys.setrecursionlimit(_HOST_RECURSION_LIMIT)
    box: dict[str, Any] = {}

    def target() -> None:
        try:
            box["value"] = fn()
        except BaseException as e:  # re-raised on the calling thread
            box["error"] = e

    old = threading.stack_size()
    threading.stack_size(_WORKER_STACK_BYTES)
    try:
        t = threading.Thread(target=target, name="regvm-exec")
        t.start()
    finally:
        threading.stack_size(old)
    t.join()
    if "error" in box:
        raise box["error"]
    return box.get("value")


def run_module(
    module: CompiledModule,
    config: VmConfig | None = None,
    *,
    entry: str | None = "main",
    out: Callable[[str], Any] | None = None,
    worker: bool = True,
) -> RunResult:
    """Load ``module`` and call ``entry`` (if present). Runtime errors are captured."""
    machine = Machine(config, out)
    state: dict[str, Any] = {"globals": None, "value": None}

    def body() -> None:
        g = load_module(module, machine)
        state["globals"] = g
        if entry is not None:
            fn = g.get(entry, None)
            if fn is None:
                raise VMTypeError(f"no '{entry}' function defined")
            state["value"] = call_value(machine, fn, [])

    error = None
    try:
        run_in_worker(body) if worker else body()
    except VMError as e:
        error = e
    return RunResult(machine.output, state["globals"], state["value"], error,
                     machine.counters, machine)


def run_source(source: str, config: VmConfig | None = None, **kw: Any) -> RunResult:
    return run_module(compile_source(source), config, **kw)
