"""Stack-code generation.

Emits CPython-2-shaped bytecode: functions start at offset 0, ops with an
argument occupy 3 bytes, list comprehensions are inlined into the
enclosing function with a function-local loop variable, and the implicit
``return None`` is omitted when the body already ends in a return.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field
from typing import Any

from ..errors import CodegenError
from ..isa import (
    HAS_DYNAMIC_STACK_EFFECT,
    CMP_OPS,
    Op,
    StackCode,
    StackOp,
    op_size,
)
from ..values import FALSE, INT_MAX, INT_MIN, TRUE, make_int
from .parser import is_literal, parse

_BINOP = {
    ast.Add: Op.BINARY_ADD,
    ast.Sub: Op.BINARY_SUBTRACT,
    ast.Mult: Op.BINARY_MULTIPLY,
    ast.Div: Op.BINARY_DIVIDE,
    ast.Mod: Op.BINARY_MODULO,
    ast.LShift: Op.BINARY_LSHIFT,
    ast.RShift: Op.BINARY_RSHIFT,
    ast.BitAnd: Op.BINARY_AND,
    ast.BitOr: Op.BINARY_OR,
    ast.BitXor: Op.BINARY_XOR,
}
_CMPOP = {
    ast.Lt: "<", ast.LtE: "<=", ast.Eq: "==", ast.NotEq: "!=", ast.Gt: ">",
    ast.GtE: ">=", ast.In: "in", ast.NotIn: "not in", ast.Is: "is", ast.IsNot: "is not",
}

MODULE_CODE_NAME = "<module>"


@dataclass
class ClassInfo:
    name: str
    parent: str | None
    methods: dict[str, StackCode] = field(default_factory=dict)
    attrs: list[tuple[str, Any]] = field(default_factory=list)


@dataclass
class CompiledModule:
    functions: dict[str, StackCode]
    classes: list[ClassInfo]
    init: StackCode

    def all_codes(self) -> list[tuple[str, StackCode]]:
        """Every code object, methods qualified as ``Class.method``; init last."""
        out = list(self.functions.items())
        for c in self.classes:
            out.extend((f"{c.name}.{m}", code) for m, code in c.methods.items())
        out.append((MODULE_CODE_NAME, self.init))
        return out


def literal_value(e: ast.expr) -> Any:
    if isinstance(e, ast.UnaryOp):
        return _box_const(-e.operand.value, e)
    return _box_const(e.value, e)


def _box_const(v: Any, node: ast.AST) -> Any:
    if v is True:
        return TRUE
    if v is False:
        return FALSE
    if isinstance(v, int):
        if not INT_MIN <= v <= INT_MAX:
            raise CodegenError("integer literal out of 63-bit range",
                               getattr(node, "lineno", 0), getattr(node, "col_offset", 0) + 1)
        return make_int(v)
    return v


def _const_key(v: Any) -> tuple:
    if v is TRUE or v is FALSE:
        return ("bool", v.b)
    if v is None:
        return ("none",)
    if isinstance(v, float):
        return ("float", repr(v), math.copysign(1.0, v))
    if isinstance(v, str):
        return ("str", v)
    return ("int", v.v)


class _Label:
    __slots__ = ("index", "used")

    def __init__(self) -> None:
        self.index: int | None = None
        self.used = False


class _FunctionCompiler:
    def __init__(self, name: str, params: list[str], local_names: list[str],
                 is_module: bool = False) -> None:
        self.name = name
        self.argcount = len(params)
        self.varnames: list[str] = list(params)
        for n in local_names:
            if n not in self.varnames:
                self.varnames.append(n)
        self.local_set = set() if is_module else set(self.varnames)
        self.consts: list[Any] = []
        self.const_index: dict[tuple, int] = {}
        self.names: list[str] = []
        self.name_index: dict[str, int] = {}
        self.instrs: list[list] = []  # [opcode, arg | _Label, lineno]
        self.loops: list[tuple[_Label, _Label, bool]] = []  # (continue, break, is_for)
        self.has_finally = False
        self.lineno = 0

    # -- emission helpers

    def emit(self, opcode: Op, arg: Any = None) -> None:
        if isinstance(arg, _Label):
            arg.used = True
        self.instrs.append([opcode, arg])

    def label(self) -> _Label:
        return _Label()

    def bind(self, lbl: _Label) -> None:
        lbl.index = len(self.instrs)

    def const(self, v: Any) -> int:
        key = _const_key(v)
        idx = self.const_index.get(key)
        if idx is None:
            idx = self.const_index[key] = len(self.consts)
            self.consts.append(v)
        return idx

    def name_idx(self, n: str) -> int:
        idx = self.name_index.get(n)
        if idx is None:
            idx = self.name_index[n] = len(self.names)
            self.names.append(n)
        return idx

    def last_is_return(self) -> bool:
        return bool(self.instrs) and self.instrs[-1][0] is Op.RETURN_VALUE

    def ends_in_jump(self) -> bool:
        return bool(self.instrs) and self.instrs[-1][0] in (Op.RETURN_VALUE, Op.JUMP_ABSOLUTE)

    def fail(self, node: ast.AST, msg: str) -> CodegenError:
        return CodegenError(msg, getattr(node, "lineno", 0), getattr(node, "col_offset", 0) + 1)

    # -- assembly

    def assemble(self, defaults: tuple = ()) -> StackCode:
        end = len(self.instrs)
        ends_at_label = any(lbl.index == end and lbl.used for lbl in self._labels())
        if not self.last_is_return() or ends_at_label:
            self.emit(Op.LOAD_CONST, self.const(None))
            self.emit(Op.RETURN_VALUE)
        offsets = []
        pos = 0
        for opcode, _ in self.instrs:
            offsets.append(pos)
            pos += op_size(opcode)
        offsets.append(pos)
        ops = []
        for (opcode, arg), off in zip(self.instrs, offsets):
            if isinstance(arg, _Label):
                arg = offsets[arg.index]
            ops.append(StackOp(opcode, arg, off))
        flags = frozenset({HAS_DYNAMIC_STACK_EFFECT}) if self.has_finally else frozenset()
        return StackCode(
            name=self.name,
            argcount=self.argcount,
            varnames=tuple(self.varnames),
            consts=tuple(self.consts),
            names=tuple(self.names),
            ops=tuple(ops),
            flags=flags,
            defaults=defaults,
        )

    def _labels(self) -> list[_Label]:
        return [arg for _, arg in self.instrs if isinstance(arg, _Label)]

    # -- statements

    def body(self, stmts: list[ast.stmt]) -> None:
        for s in stmts:
            self.stmt(s)

    def stmt(self, s: ast.stmt) -> None:
        if isinstance(s, ast.Assign):
            self.expr(s.value)
            for _ in s.targets[1:]:
                self.emit(Op.DUP_TOP)
            for t in s.targets:
                self.store(t)
        elif isinstance(s, ast.AugAssign):
            self.augassign(s)
        elif isinstance(s, ast.Return):
            if s.value is None:
                self.emit(Op.LOAD_CONST, self.const(None))
            else:
                self.expr(s.value)
            self.emit(Op.RETURN_VALUE)
        elif isinstance(s, ast.Expr):
            if isinstance(s.value, ast.Constant):
                return  # docstring or bare literal: no code, as CPython
            self.expr(s.value)
            self.emit(Op.POP_TOP)
        elif isinstance(s, ast.If):
            self.if_stmt(s)
        elif isinstance(s, ast.While):
            self.while_stmt(s)
        elif isinstance(s, ast.For):
            self.for_stmt(s)
        elif isinstance(s, ast.Break):
            cont, brk, is_for = self.loops[-1]
            if is_for:
                self.emit(Op.POP_TOP)
            self.emit(Op.JUMP_ABSOLUTE, brk)
        elif isinstance(s, ast.Continue):
            cont, brk, is_for = self.loops[-1]
            self.emit(Op.JUMP_ABSOLUTE, cont)
        elif isinstance(s, (ast.Pass, ast.Global)):
            pass
        elif isinstance(s, ast.Try):
            self.try_finally(s)
        else:
            raise self.fail(s, f"cannot compile {type(s).__name__}")

    def store(self, t: ast.expr) -> None:
        if isinstance(t, ast.Name):
            self.store_name(t.id)
        elif isinstance(t, ast.Attribute):
            self.expr(t.value)
            self.emit(Op.STORE_ATTR, self.name_idx(t.attr))
        elif isinstance(t, ast.Subscript):
            self.expr(t.value)
            self.expr(t.slice)
            self.emit(Op.STORE_SUBSCR)
        else:
            raise self.fail(t, "unsupported assignment target")

    def store_name(self, n: str) -> None:
        if n in self.local_set:
            self.emit(Op.STORE_FAST, self.varnames.index(n))
        else:
            self.emit(Op.STORE_GLOBAL, self.name_idx(n))

    def augassign(self, s: ast.AugAssign) -> None:
        op = _BINOP[type(s.op)]
        t = s.target
        if isinstance(t, ast.Name):
            self.load_name(t.id)
            self.expr(s.value)
            self.emit(op)
            self.store_name(t.id)
        elif isinstance(t, ast.Attribute):
            self.expr(t.value)
            self.emit(Op.LOAD_ATTR, self.name_idx(t.attr))
            self.expr(s.value)
            self.emit(op)
            self.expr(t.value)
            self.emit(Op.STORE_ATTR, self.name_idx(t.attr))
        else:
            self.expr(t.value)
            self.expr(t.slice)
            self.emit(Op.BINARY_SUBSCR)
            self.expr(s.value)
            self.emit(op)
            self.expr(t.value)
            self.expr(t.slice)
            self.emit(Op.STORE_SUBSCR)

    def jump_if_false(self, test: ast.expr, target: _Label) -> None:
        if isinstance(test, ast.UnaryOp) and isinstance(test.op, ast.Not):
            self.expr(test.operand)
            self.emit(Op.POP_JUMP_IF_TRUE, target)
        else:
            self.expr(test)
            self.emit(Op.POP_JUMP_IF_FALSE, target)

    def if_stmt(self, s: ast.If) -> None:
        end = self.label()
        orelse = self.label() if s.orelse else end
        self.jump_if_false(s.test, orelse)
        self.body(s.body)
        if s.orelse:
            if not self.ends_in_jump():
                self.emit(Op.JUMP_ABSOLUTE, end)
            self.bind(orelse)
            self.body(s.orelse)
        self.bind(end)

    def while_stmt(self, s: ast.While) -> None:
        top, end = self.label(), self.label()
        self.bind(top)
        always = isinstance(s.test, ast.Constant) and bool(s.test.value)
        if not always:
            self.jump_if_false(s.test, end)
        self.loops.append((top, end, False))
        self.body(s.body)
        self.loops.pop()
        self.emit(Op.JUMP_ABSOLUTE, top)
        self.bind(end)

    def for_stmt(self, s: ast.For) -> None:
        top, end = self.label(), self.label()
        self.expr(s.iter)
        self.emit(Op.GET_ITER)
        self.bind(top)
        self.emit(Op.FOR_ITER, end)
        self.store(s.target)
        self.loops.append((top, end, True))
        self.body(s.body)
        self.loops.pop()
        self.emit(Op.JUMP_ABSOLUTE, top)
        self.bind(end)

    def try_finally(self, s: ast.Try) -> None:
        self.has_finally = True
        handler = self.label()
        self.emit(Op.SETUP_FINALLY, handler)
        self.body(s.body)
        self.emit(Op.LOAD_CONST, self.const(None))
        self.bind(handler)
        self.body(s.finalbody)
        self.emit(Op.END_FINALLY)

    # -- expressions

    def load_name(self, n: str) -> None:
        if n in self.local_set:
            self.emit(Op.LOAD_FAST, self.varnames.index(n))
        else:
            self.emit(Op.LOAD_GLOBAL, self.name_idx(n))

    def expr(self, e: ast.expr) -> None:
        if isinstance(e, ast.Constant):
            self.emit(Op.LOAD_CONST, self.const(_box_const(e.value, e)))
        elif isinstance(e, ast.Name):
            self.load_name(e.id)
        elif isinstance(e, ast.BinOp):
            self.expr(e.left)
            self.expr(e.right)
            self.emit(_BINOP[type(e.op)])
        elif isinstance(e, ast.UnaryOp):
            if is_literal(e):
                self.emit(Op.LOAD_CONST, self.const(literal_value(e)))
            elif isinstance(e.op, ast.UAdd):
                self.expr(e.operand)
            else:
                self.expr(e.operand)
                self.emit(Op.UNARY_NOT if isinstance(e.op, ast.Not) else Op.UNARY_NEGATIVE)
        elif isinstance(e, ast.BoolOp):
            end = self.label()
            jump = Op.POP_JUMP_IF_FALSE if isinstance(e.op, ast.And) else Op.POP_JUMP_IF_TRUE
            for v in e.values[:-1]:
                self.expr(v)
                self.emit(Op.DUP_TOP)
                self.emit(jump, end)
                self.emit(Op.POP_TOP)
            self.expr(e.values[-1])
            self.bind(end)
        elif isinstance(e, ast.Compare):
            self.expr(e.left)
            self.expr(e.comparators[0])
            self.emit(Op.COMPARE_OP, CMP_OPS.index(_CMPOP[type(e.ops[0])]))
        elif isinstance(e, ast.Subscript):
            self.expr(e.value)
            self.expr(e.slice)
            self.emit(Op.BINARY_SUBSCR)
        elif isinstance(e, ast.Attribute):
            self.expr(e.value)
            self.emit(Op.LOAD_ATTR, self.name_idx(e.attr))
        elif isinstance(e, ast.Call):
            self.expr(e.func)
            for a in e.args:
                self.expr(a)
            self.emit(Op.CALL_FUNCTION, len(e.args))
        elif isinstance(e, ast.List):
            for x in e.elts:
                self.expr(x)
            self.emit(Op.BUILD_LIST, len(e.elts))
        elif isinstance(e, ast.Dict):
            for k, v in zip(e.keys, e.values):
                self.expr(k)
                self.expr(v)
            self.emit(Op.BUILD_MAP, len(e.keys))
        elif isinstance(e, ast.ListComp):
            self.listcomp(e)
        elif isinstance(e, ast.IfExp):
            orelse, end = self.label(), self.label()
            self.jump_if_false(e.test, orelse)
            self.expr(e.body)
            self.emit(Op.JUMP_ABSOLUTE, end)
            self.bind(orelse)
            self.expr(e.orelse)
            self.bind(end)
        else:
            raise self.fail(e, f"cannot compile {type(e).__name__}")

    def listcomp(self, e: ast.ListComp) -> None:
        gen = e.generators[0]
        top, end = self.label(), self.label()
        self.emit(Op.BUILD_LIST, 0)
        self.expr(gen.iter)
        self.emit(Op.GET_ITER)
        self.bind(top)
        self.emit(Op.FOR_ITER, end)
        self.store(gen.target)
        for cond in gen.ifs:
            self.jump_if_false(cond, top)
        self.expr(e.elt)
        self.emit(Op.LIST_APPEND, 2)
        self.emit(Op.JUMP_ABSOLUTE, top)
        self.bind(end)


def _assigned_names(stmts: list[ast.stmt], declared_global: set[str]) -> list[str]:
    """Names bound in a function body, in source order."""
    out: list[str] = []

    def add(n: str) -> None:
        if n not in declared_global and n not in out:
            out.append(n)

    def visit(node: ast.AST) -> None:
        if isinstance(node, ast.Name) and isinstance(node.ctx, ast.Store):
            add(node.id)
        elif isinstance(node, ast.AugAssign) and isinstance(node.target, ast.Name):
            add(node.target.id)
        elif isinstance(node, ast.comprehension):
            visit(node.iter)
            visit(node.target)
            for c in node.ifs:
                visit(c)
            return
        elif isinstance(node, ast.ListComp):
            for g in node.generators:
                visit(g)
            visit(node.elt)
            return
        for child in ast.iter_child_nodes(node):
            visit(child)

    for s in stmts:
        visit(s)
    return out


def _globals_declared(stmts: list[ast.stmt]) -> set[str]:
    out: set[str] = set()
    for s in stmts:
        for node in ast.walk(s):
            if isinstance(node, ast.Global):
                out.update(node.names)
    return out


def compile_function(fn: ast.FunctionDef, qualname: str | None = None) -> StackCode:
    params = [a.arg for a in fn.args.args]
    if len(set(params)) != len(params):
        raise CodegenError("duplicate parameter name", fn.lineno, fn.col_offset + 1)
    declared = _globals_declared(fn.body)
    clash = declared.intersection(params)
    if clash:
        raise CodegenError(f"name '{sorted(clash)[0]}' is parameter and global",
                           fn.lineno, fn.col_offset + 1)
    fc = _FunctionCompiler(qualname or fn.name, params, _assigned_names(fn.body, declared))
    fc.body(fn.body)
    defaults = tuple(literal_value(d) for d in fn.args.defaults)
    return fc.assemble(defaults)


def compile_module(tree: ast.Module) -> CompiledModule:
    """Lower a parsed module: one StackCode per function and method, plus init code.

    Function and class definitions are hoisted: the loader binds them in the
    module globals before the init code runs.
    """
    functions: dict[str, StackCode] = {}
    classes: list[ClassInfo] = []
    init = _FunctionCompiler(MODULE_CODE_NAME, [], [], is_module=True)
    for stmt in tree.body:
        if isinstance(stmt, ast.FunctionDef):
            functions[stmt.name] = compile_function(stmt)
        elif isinstance(stmt, ast.ClassDef):
            info = ClassInfo(stmt.name, stmt.bases[0].id if stmt.bases else None)
            for item in stmt.body:
                if isinstance(item, ast.FunctionDef):
                    info.methods[item.name] = compile_function(item, f"{stmt.name}.{item.name}")
                elif isinstance(item, ast.Assign):
                    info.attrs.append((item.targets[0].id, literal_value(item.value)))
            classes.append(info)
        else:
            init.stmt(stmt)
    return CompiledModule(functions, classes, init.assemble())


def compile_source(source: str) -> CompiledModule:
    return compile_module(parse(source))
