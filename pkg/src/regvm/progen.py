"""Random program generator for differential testing.

Programs mix integer arithmetic (including values near the 63-bit edge),
branches, bounded loops, lists, globals, instances, class attribute updates
and try/finally. Every generated program terminates: loops run a bounded
number of times and functions only call functions defined before them, so
there is no recursion. Division and modulo use odd (hence nonzero)
divisors, and shift counts are masked, so most programs run to completion;
the few that fault do so identically on every engine.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

_EDGE_INTS = (0, 1, -1, 2, 3, 7, 100, -100, 4611686018427387903, -4611686018427387904,
              2147483647, 1 << 40)
_INT_OPS = ("+", "-", "*", "&", "|", "^", "/", "%", "<<", ">>")
_CMP_OPS = ("<", "<=", "==", "!=", ">", ">=")


@dataclass
class _Scope:
    ints: list[str] = field(default_factory=list)
    lists: list[str] = field(default_factory=list)
    objs: list[str] = field(default_factory=list)
    counters: int = 0
    in_loop: bool = False


class ProgramGenerator:
    def __init__(self, seed: int, max_depth: int = 3) -> None:
        self.rng = random.Random(seed)
        self.max_depth = max_depth
        self.functions: list[tuple[str, int]] = []
        self.lines: list[str] = []
        self.n_globals = 0
        self.fresh = 0

    # -- helpers
    def _name(self, prefix: str) -> str:
        self.fresh += 1
        return f"{prefix}{self.fresh}"

    def _emit(self, indent: int, text: str) -> None:
        self.lines.append("    " * indent + text)

    def _lit(self) -> str:
        r = self.rng
        if r.random() < 0.25:
            return str(r.choice(_EDGE_INTS))
        return str(r.randint(-20, 50))

    # -- expressions
    def int_expr(self, sc: _Scope, depth: int = 0) -> str:
        r = self.rng
        roll = r.random()
        if depth >= self.max_depth or roll < 0.3:
            pool = sc.ints + [f"G{k}" for k in range(self.n_globals)]
            if pool and r.random() < 0.7:
                return r.choice(pool)
            return self._lit()
        if roll < 0.6:
            op = r.choice(_INT_OPS)
            a = self.int_expr(sc, depth + 1)
            b = self.int_expr(sc, depth + 1)
            if op in ("/", "%"):
                b = f"({b} | 1)"
            elif op in ("<<", ">>"):
                b = f"({b} & 15)"
            return f"({a} {op} {b})"
        if roll < 0.68:
            return f"(-{self.int_expr(sc, depth + 1)})"
        if roll < 0.74 and sc.lists:
            lst = r.choice(sc.lists)
            return f"{lst}[{self.int_expr(sc, depth + 1)} % len({lst})]"
        if roll < 0.78 and sc.lists:
            return f"len({r.choice(sc.lists)})"
        if roll < 0.85 and sc.objs:
            return f"{r.choice(sc.objs)}.{r.choice(('a', 'b', 'k'))}"
        if roll < 0.88 and sc.objs:
            return f"{r.choice(sc.objs)}.total()"
        if roll < 0.95 and self.functions:
            name, arity = r.choice(self.functions)
            args = ", ".join(self.int_expr(sc, depth + 1) for _ in range(arity))
            return f"{name}({args})"
        c = self.bool_expr(sc, depth + 1)
        return f"({self.int_expr(sc, depth + 1)} if {c} else {self.int_expr(sc, depth + 1)})"

    def bool_expr(self, sc: _Scope, depth: int = 0) -> str:
        r = self.rng
        roll = r.random()
        if depth < self.max_depth and roll < 0.15:
            return f"not {self.bool_expr(sc, depth + 1)}"
        if depth < self.max_depth and roll < 0.3:
            op = r.choice(("and", "or"))
            return f"({self.bool_expr(sc, depth + 1)} {op} {self.bool_expr(sc, depth + 1)})"
        if roll < 0.38 and sc.lists:
            return f"{self.int_expr(sc, depth + 1)} in {r.choice(sc.lists)}"
        op = r.choice(_CMP_OPS)
        return f"{self.int_expr(sc, depth + 1)} {op} {self.int_expr(sc, depth + 1)}"

    def list_expr(self, sc: _Scope) -> str:
        r = self.rng
        roll = r.random()
        if roll < 0.5:
            n = r.randint(1, 4)
            return "[" + ", ".join(self.int_expr(sc, 1) for _ in range(n)) + "]"
        if roll < 0.8:
            v = self._name("c")
            return (f"[{v} * {r.randint(1, 5)} for {v} in range({r.randint(1, 6)})"
                    f" if {v} != {r.randint(0, 3)}]")
        if sc.lists:
            return f"{r.choice(sc.lists)} + [{self.int_expr(sc, 1)}]"
        return f"[{self.int_expr(sc, 1)}]"

    # -- statements
    def block(self, sc: _Scope, indent: int, n: int, depth: int) -> None:
        # names first bound inside a nested block may be unbound after it
        marks = (len(sc.ints), len(sc.lists), len(sc.objs))
        for _ in range(n):
            self.stmt(sc, indent, depth)
        if depth > 0:
            del sc.ints[marks[0]:], sc.lists[marks[1]:], sc.objs[marks[2]:]

    def stmt(self, sc: _Scope, indent: int, depth: int) -> None:
        r = self.rng
        roll = r.random()
        nested = depth < 2
        if roll < 0.22 or not sc.ints:
            if sc.ints and r.random() < 0.4:
                name = r.choice(sc.ints)
            else:
                name = self._name("v")
            self._emit(indent, f"{name} = {self.int_expr(sc)}")
            if name not in sc.ints:
                sc.ints.append(name)
        elif roll < 0.3:
            op = r.choice(("+=", "-=", "*=", "^="))
            self._emit(indent, f"{r.choice(sc.ints)} {op} {self.int_expr(sc, 1)}")
        elif roll < 0.37:
            self._emit(indent, f"print({self.int_expr(sc)}, {self.bool_expr(sc, 1)})")
        elif roll < 0.42:
            name = self._name("l")
            self._emit(indent, f"{name} = {self.list_expr(sc)}")
            sc.lists.append(name)
        elif roll < 0.47 and sc.lists:
            lst = r.choice(sc.lists)
            if r.random() < 0.5:
                self._emit(indent, f"{lst}.append({self.int_expr(sc, 1)})")
            else:
                self._emit(indent, f"{lst}[{self.int_expr(sc, 1)} % len({lst})] = {self.int_expr(sc, 1)}")
        elif roll < 0.52 and sc.objs:
            obj = r.choice(sc.objs)
            self._emit(indent, f"{obj}.{r.choice(('a', 'b'))} = {self.int_expr(sc, 1)}")
        elif roll < 0.55 and self.n_globals:
            g = f"G{r.randrange(self.n_globals)}"
            self._emit(indent, f"global {g}")
            self._emit(indent, f"{g} = {self.int_expr(sc, 1)}")
        elif roll < 0.57:
            self._emit(indent, f"Box.k = {self.int_expr(sc, 1)}")
        elif roll < 0.68 and nested:
            self._emit(indent, f"if {self.bool_expr(sc)}:")
            self.block(sc, indent + 1, r.randint(1, 3), depth + 1)
            if r.random() < 0.3:
                self._emit(indent, f"elif {self.bool_expr(sc)}:")
                self.block(sc, indent + 1, r.randint(1, 2), depth + 1)
            if r.random() < 0.5:
                self._emit(indent, "else:")
                self.block(sc, indent + 1, r.randint(1, 2), depth + 1)
        elif roll < 0.76 and nested:
            ctr = self._name("i")
            self._emit(indent, f"{ctr} = 0")
            self._emit(indent, f"while {ctr} < {r.randint(1, 6)}:")
            self._emit(indent + 1, f"{ctr} = {ctr} + 1")
            self._loop_body(sc, indent + 1, depth)
        elif roll < 0.84 and nested:
            var = self._name("x")
            if sc.lists and r.random() < 0.5:
                src = r.choice(sc.lists)
            else:
                src = f"range({r.randint(0, 6)})"
            self._emit(indent, f"for {var} in {src}:")
            sc.ints.append(var)
            self._loop_body(sc, indent + 1, depth)
            sc.ints.remove(var)
        elif roll < 0.87 and sc.in_loop:
            self._emit(indent, f"if {self.bool_expr(sc, 1)}:")
            self._emit(indent + 1, r.choice(("break", "continue")))
        elif roll < 0.9 and nested:
            # break/continue may not leave a try/finally
            was = sc.in_loop
            sc.in_loop = False
            self._emit(indent, "try:")
            self.block(sc, indent + 1, r.randint(1, 2), depth + 1)
            self._emit(indent, "finally:")
            self.block(sc, indent + 1, 1, depth + 1)
            sc.in_loop = was
        elif roll < 0.94:
            name = self._name("o")
            self._emit(indent, f"{name} = Box({self.int_expr(sc, 1)}, {self.int_expr(sc, 1)})")
            sc.objs.append(name)
        else:
            self._emit(indent, f"{r.choice(sc.ints)} = {self.int_expr(sc)}")

    def _loop_body(self, sc: _Scope, indent: int, depth: int) -> None:
        was = sc.in_loop
        sc.in_loop = True
        self.block(sc, indent, self.rng.randint(1, 3), depth + 1)
        sc.in_loop = was

    # -- program
    def function(self, name: str, arity: int) -> None:
        params = [f"p{k}" for k in range(arity)]
        self._emit(0, f"def {name}({', '.join(params)}):")
        sc = _Scope(ints=list(params))
        self.block(sc, 1, self.rng.randint(2, 5), 0)
        if self.rng.random() < 0.3:
            self._emit(1, f"if {self.bool_expr(sc, 1)}:")
            self._emit(2, f"return {self.int_expr(sc, 1)}")
        self._emit(1, f"return {self.int_expr(sc)}")
        self._emit(0, "")

    def generate(self) -> str:
        r = self.rng
        self.n_globals = r.randint(1, 3)
        for k in range(self.n_globals):
            self._emit(0, f"G{k} = {self._lit()}")
        self._emit(0, "")
        self._emit(0, "class Box:")
        self._emit(1, f"k = {self._lit()}")
        self._emit(0, "")
        self._emit(1, "def __init__(self, a, b):")
        self._emit(2, "self.a = a")
        self._emit(2, "self.b = b")
        self._emit(0, "")
        self._emit(1, "def total(self):")
        self._emit(2, "return self.a + self.b + self.k")
        self._emit(0, "")
        for k in range(r.randint(1, 3)):
            name = f"f{k}"
            arity = r.randint(0, 3)
            self.function(name, arity)
            self.functions.append((name, arity))
        self._emit(0, "def main():")
        sc = _Scope()
        self.block(sc, 1, r.randint(4, 9), 0)
        for v in sc.ints[:4]:
            self._emit(1, f"print({v})")
        self._emit(0, "")
        return "\n".join(self.lines) + "\n"


def generate_program(seed: int, max_depth: int = 3) -> str:
    """Source text of a random terminating program with a ``main()``."""
    return ProgramGenerator(seed, max_depth).generate()
