"""Parsing for ``.fal`` sources.

The language is a strict subset of Python's surface syntax, so the host
``ast`` module does the lexing and parsing; this module rejects every
construct outside the subset with a positioned ParseError.
"""

from __future__ import annotations

import ast

from ..errors import ParseError

BIN_OPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Mod, ast.LShift, ast.RShift,
           ast.BitAnd, ast.BitOr, ast.BitXor)
CMP_OPS = (ast.Lt, ast.LtE, ast.Eq, ast.NotEq, ast.Gt, ast.GtE, ast.In, ast.NotIn,
           ast.Is, ast.IsNot)


def _fail(node: ast.AST, message: str) -> ParseError:
    return ParseError(message, getattr(node, "lineno", 0), getattr(node, "col_offset", 0) + 1)


def parse(source: str) -> ast.Module:
    """Parse source text into a validated syntax tree.

    Every node carries ``lineno``/``col_offset``. Raises ParseError for
    malformed input and for syntax outside the supported subset.
    """
    try:
        tree = ast.parse(source, mode="exec")
    except SyntaxError as e:
        raise ParseError(e.msg, e.lineno or 0, e.offset or 0) from None
    _Checker().check_module(tree)
    return tree


class _Checker:
    def __init__(self) -> None:
        self.loop_depth = 0
        self.try_depth = 0
        self.in_function = False

    def check_module(self, mod: ast.Module) -> None:
        for stmt in mod.body:
            if isinstance(stmt, ast.FunctionDef):
                self.check_function(stmt)
            elif isinstance(stmt, ast.ClassDef):
                self.check_class(stmt)
            else:
                self.stmt(stmt)

    def check_function(self, fn: ast.FunctionDef) -> None:
        if fn.decorator_list:
            raise _fail(fn, "decorators are not supported")
        a = fn.args
        if a.vararg or a.kwarg or a.kwonlyargs or a.posonlyargs:
            raise _fail(fn, "only plain positional parameters are supported")
        if fn.returns is not None or any(p.annotation for p in a.args):
            raise _fail(fn, "annotations are not supported")
        for d in a.defaults:
            if not is_literal(d):
                raise _fail(d, "parameter defaults must be literal constants")
        saved = (self.loop_depth, self.try_depth, self.in_function)
        self.loop_depth, self.try_depth, self.in_function = 0, 0, True
        for stmt in fn.body:
            if isinstance(stmt, (ast.FunctionDef, ast.ClassDef)):
                raise _fail(stmt, "nested definitions are not supported")
            self.stmt(stmt)
        self.loop_depth, self.try_depth, self.in_function = saved

    def check_class(self, cls: ast.ClassDef) -> None:
        if cls.decorator_list or cls.keywords:
            raise _fail(cls, "class decorators and keywords are not supported")
        if len(cls.bases) > 1:
            raise _fail(cls, "only single inheritance is supported")
        if cls.bases and not isinstance(cls.bases[0], ast.Name):
            raise _fail(cls.bases[0], "base class must be a name")
        for stmt in cls.body:
            if isinstance(stmt, ast.FunctionDef):
                self.check_function(stmt)
            elif isinstance(stmt, ast.Assign):
                if len(stmt.targets) != 1 or not isinstance(stmt.targets[0], ast.Name):
                    raise _fail(stmt, "class attributes must be simple names")
                if not is_literal(stmt.value):
                    raise _fail(stmt.value, "class attributes must be literal constants")
            elif isinstance(stmt, ast.Pass):
                pass
            elif isinstance(stmt, ast.Expr) and isinstance(stmt.value, ast.Constant):
                pass
            else:
                raise _fail(stmt, "class bodies may contain only methods and constant attributes")

    # -- statements

    def stmt(self, s: ast.stmt) -> None:
        if isinstance(s, ast.Return):
            if not self.in_function:
                raise _fail(s, "'return' outside function")
            if s.value is not None:
                self.expr(s.value)
        elif isinstance(s, ast.Assign):
            for t in s.targets:
                self.target(t)
            self.expr(s.value)
        elif isinstance(s, ast.AugAssign):
            if not isinstance(s.op, BIN_OPS):
                raise _fail(s, f"unsupported operator {type(s.op).__name__}")
            self.target(s.target)
            if isinstance(s.target, ast.Attribute) and not is_simple(s.target.value):
                raise _fail(s.target, "augmented attribute target must have a simple base")
            if isinstance(s.target, ast.Subscript) and not (
                is_simple(s.target.value) and is_simple(s.target.slice)
            ):
                raise _fail(s.target, "augmented subscript target must be simple")
            self.expr(s.value)
        elif isinstance(s, ast.If):
            self.expr(s.test)
            self.body(s.body)
            self.body(s.orelse)
        elif isinstance(s, ast.While):
            if s.orelse:
                raise _fail(s, "'while ... else' is not supported")
            self.expr(s.test)
            self.loop_body(s.body)
        elif isinstance(s, ast.For):
            if s.orelse:
                raise _fail(s, "'for ... else' is not supported")
            if not isinstance(s.target, ast.Name):
                raise _fail(s.target, "loop target must be a name")
            self.expr(s.iter)
            self.loop_body(s.body)
        elif isinstance(s, ast.Expr):
            self.expr(s.value)
        elif isinstance(s, (ast.Break, ast.Continue)):
            if self.loop_depth == 0:
                raise _fail(s, f"'{type(s).__name__.lower()}' outside loop")
            if self.try_depth:
                raise _fail(s, f"'{type(s).__name__.lower()}' inside try/finally is not supported")
        elif isinstance(s, ast.Pass):
            pass
        elif isinstance(s, ast.Global):
            if not self.in_function:
                raise _fail(s, "'global' outside function")
        elif isinstance(s, ast.Try):
            if s.handlers or s.orelse or not s.finalbody:
                raise _fail(s, "only try/finally is supported")
            if not self.in_function:
                raise _fail(s, "try/finally is only supported inside functions")
            self.try_depth += 1
            self.body(s.body)
            self.body(s.finalbody)
            self.try_depth -= 1
        elif isinstance(s, (ast.FunctionDef, ast.ClassDef)):
            raise _fail(s, "definitions are only allowed at module level")
        else:
            raise _fail(s, f"unsupported statement: {type(s).__name__}")

    def body(self, stmts: list[ast.stmt]) -> None:
        for s in stmts:
            self.stmt(s)

    def loop_body(self, stmts: list[ast.stmt]) -> None:
        # try_depth counts only try blocks between a break and its loop
        saved_try = self.try_depth
        self.loop_depth += 1
        self.try_depth = 0
        self.body(stmts)
        self.loop_depth -= 1
        self.try_depth = saved_try

    def target(self, t: ast.expr) -> None:
        if isinstance(t, ast.Name):
            return
        if isinstance(t, ast.Attribute):
            self.expr(t.value)
            return
        if isinstance(t, ast.Subscript):
            if isinstance(t.slice, ast.Slice):
                raise _fail(t, "slices are not supported")
            self.expr(t.value)
            self.expr(t.slice)
            return
        raise _fail(t, "unsupported assignment target")

    # -- expressions

    def expr(self, e: ast.expr) -> None:
        if isinstance(e, ast.Constant):
            if not (e.value is None or isinstance(e.value, (bool, int, float, str))):
                raise _fail(e, f"unsupported literal {e.value!r}")
        elif isinstance(e, ast.Name):
            pass
        elif isinstance(e, ast.BinOp):
            if not isinstance(e.op, BIN_OPS):
                raise _fail(e, f"unsupported operator {type(e.op).__name__}")
            self.expr(e.left)
            self.expr(e.right)
        elif isinstance(e, ast.UnaryOp):
            if not isinstance(e.op, (ast.USub, ast.UAdd, ast.Not)):
                raise _fail(e, f"unsupported operator {type(e.op).__name__}")
            self.expr(e.operand)
        elif isinstance(e, ast.BoolOp):
            for v in e.values:
                self.expr(v)
        elif isinstance(e, ast.Compare):
            if len(e.ops) != 1:
                raise _fail(e, "chained comparisons are not supported")
            if not isinstance(e.ops[0], CMP_OPS):
                raise _fail(e, "unsupported comparison")
            self.expr(e.left)
            self.expr(e.comparators[0])
        elif isinstance(e, ast.Subscript):
            if isinstance(e.slice, ast.Slice):
                raise _fail(e, "slices are not supported")
            self.expr(e.value)
            self.expr(e.slice)
        elif isinstance(e, ast.Attribute):
            self.expr(e.value)
        elif isinstance(e, ast.Call):
            if e.keywords:
                raise _fail(e, "keyword arguments are not supported")
            self.expr(e.func)
            for a in e.args:
                if isinstance(a, ast.Starred):
                    raise _fail(a, "star arguments are not supported")
                self.expr(a)
        elif isinstance(e, ast.List):
            for x in e.elts:
                if isinstance(x, ast.Starred):
                    raise _fail(x, "star expressions are not supported")
                self.expr(x)
        elif isinstance(e, ast.Dict):
            for k, v in zip(e.keys, e.values):
                if k is None:
                    raise _fail(v, "dict unpacking is not supported")
                self.expr(k)
                self.expr(v)
        elif isinstance(e, ast.ListComp):
            if len(e.generators) != 1:
                raise _fail(e, "only one 'for' clause per comprehension is supported")
            g = e.generators[0]
            if g.is_async or not isinstance(g.target, ast.Name):
                raise _fail(g.target, "comprehension target must be a name")
            self.expr(g.iter)
            for c in g.ifs:
                self.expr(c)
            self.expr(e.elt)
        elif isinstance(e, ast.IfExp):
            self.expr(e.test)
            self.expr(e.body)
            self.expr(e.orelse)
        else:
            raise _fail(e, f"unsupported expression: {type(e).__name__}")


def is_literal(e: ast.expr) -> bool:
    if isinstance(e, ast.Constant):
        return e.value is None or isinstance(e.value, (bool, int, float, str))
    return (
        isinstance(e, ast.UnaryOp)
        and isinstance(e.op, ast.USub)
        and isinstance(e.operand, ast.Constant)
        and type(e.operand.value) in (int, float)
    )


def is_simple(e: ast.expr) -> bool:
    """Expressions that may be evaluated twice without observable effect."""
    if isinstance(e, (ast.Name, ast.Constant)):
        return True
    return is_literal(e)
