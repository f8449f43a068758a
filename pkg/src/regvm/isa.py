"""Instruction sets, code objects, disassembly and structural validation.

Two instruction sets share one opcode vocabulary:

* stack code (``StackOp``): CPython-2-shaped; operands flow through an
  implicit value stack; offsets are byte offsets (3 bytes for ops that
  carry an argument, 1 byte otherwise), so block names line up with
  ``dis`` output of that era.
* register code (``RegOp``): each op names its destination and source
  registers explicitly; control flow is expressed as basic blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Any, NamedTuple, Union

from .values import to_repr


class Opcode(IntEnum):
    LOAD_FAST = 0
    STORE_FAST = 1
    LOAD_CONST = 2
    LOAD_GLOBAL = 3
    STORE_GLOBAL = 4
    BINARY_ADD = 5
    BINARY_SUBTRACT = 6
    BINARY_MULTIPLY = 7
    BINARY_DIVIDE = 8
    BINARY_MODULO = 9
    BINARY_LSHIFT = 10
    BINARY_RSHIFT = 11
    BINARY_AND = 12
    BINARY_OR = 13
    BINARY_XOR = 14
    BINARY_SUBSCR = 15
    STORE_SUBSCR = 16
    UNARY_NEGATIVE = 17
    UNARY_NOT = 18
    COMPARE_OP = 19
    BUILD_LIST = 20
    BUILD_MAP = 21
    LIST_APPEND = 22
    GET_ITER = 23
    FOR_ITER = 24
    JUMP_ABSOLUTE = 25
    POP_JUMP_IF_FALSE = 26
    POP_JUMP_IF_TRUE = 27
    CALL_FUNCTION = 28
    LOAD_ATTR = 29
    STORE_ATTR = 30
    RETURN_VALUE = 31
    POP_TOP = 32
    DUP_TOP = 33
    SETUP_FINALLY = 34
    END_FINALLY = 35
    MOVE = 36


NUM_OPCODES = len(Opcode)
Op = Opcode

BINARY_OPS = frozenset({
    Op.BINARY_ADD, Op.BINARY_SUBTRACT, Op.BINARY_MULTIPLY, Op.BINARY_DIVIDE,
    Op.BINARY_MODULO, Op.BINARY_LSHIFT, Op.BINARY_RSHIFT, Op.BINARY_AND,
    Op.BINARY_OR, Op.BINARY_XOR,
})
UNARY_OPS = frozenset({Op.UNARY_NEGATIVE, Op.UNARY_NOT})

HAS_ARG = frozenset({
    Op.LOAD_FAST, Op.STORE_FAST, Op.LOAD_CONST, Op.LOAD_GLOBAL, Op.STORE_GLOBAL,
    Op.COMPARE_OP, Op.BUILD_LIST, Op.BUILD_MAP, Op.LIST_APPEND, Op.FOR_ITER,
    Op.JUMP_ABSOLUTE, Op.POP_JUMP_IF_FALSE, Op.POP_JUMP_IF_TRUE,
    Op.CALL_FUNCTION, Op.LOAD_ATTR, Op.STORE_ATTR, Op.SETUP_FINALLY,
})
JUMP_OPS = frozenset({
    Op.FOR_ITER, Op.JUMP_ABSOLUTE, Op.POP_JUMP_IF_FALSE, Op.POP_JUMP_IF_TRUE,
    Op.SETUP_FINALLY,
})
NAME_OPS = frozenset({Op.LOAD_GLOBAL, Op.STORE_GLOBAL, Op.LOAD_ATTR, Op.STORE_ATTR})
# Ops that end a basic block in register code.
TERMINATORS = frozenset({
    Op.JUMP_ABSOLUTE, Op.POP_JUMP_IF_FALSE, Op.POP_JUMP_IF_TRUE, Op.FOR_ITER,
    Op.RETURN_VALUE,
})
TERMINATOR_ARITY = {
    Op.JUMP_ABSOLUTE: 1, Op.POP_JUMP_IF_FALSE: 2, Op.POP_JUMP_IF_TRUE: 2,
    Op.FOR_ITER: 2, Op.RETURN_VALUE: 0,
}

# COMPARE_OP argument encoding.
CMP_OPS = ("<", "<=", "==", "!=", ">", ">=", "in", "not in", "is", "is not")
CMP_LT, CMP_LE, CMP_EQ, CMP_NE, CMP_GT, CMP_GE, CMP_IN, CMP_NOT_IN, CMP_IS, CMP_IS_NOT = range(10)

HAS_DYNAMIC_STACK_EFFECT = "HAS_DYNAMIC_STACK_EFFECT"


def op_size(opcode: Opcode) -> int:
    return 3 if opcode in HAS_ARG else 1


# ---------------------------------------------------------------------------
# stack code

@dataclass(frozen=True)
class StackOp:
    opcode: Opcode
    arg: int | None = None
    offset: int = 0

    @property
    def size(self) -> int:
        return op_size(self.opcode)


@dataclass(frozen=True)
class StackCode:
    name: str
    argcount: int
    varnames: tuple[str, ...]
    consts: tuple[Any, ...]
    names: tuple[str, ...]
    ops: tuple[StackOp, ...]
    flags: frozenset[str] = frozenset()
    defaults: tuple[Any, ...] = ()

    @property
    def num_locals(self) -> int:
        return len(self.varnames)

    def index_of_offset(self) -> dict[int, int]:
        return {op.offset: i for i, op in enumerate(self.ops)}

    @property
    def end_offset(self) -> int:
        if not self.ops:
            return 0
        last = self.ops[-1]
        return last.offset + last.size


class Effect(NamedTuple):
    pops: int
    pushes: int


class BranchEffect(NamedTuple):
    fallthrough: Effect
    taken: Effect


class _Dynamic:
    def __repr__(self) -> str:
        return "Dynamic"


DYNAMIC = _Dynamic()

StackEffect = Union[Effect, BranchEffect, _Dynamic]

_FIXED_EFFECTS = {
    Op.LOAD_FAST: Effect(0, 1),
    Op.LOAD_CONST: Effect(0, 1),
    Op.LOAD_GLOBAL: Effect(0, 1),
    Op.STORE_FAST: Effect(1, 0),
    Op.STORE_GLOBAL: Effect(1, 0),
    Op.BINARY_SUBSCR: Effect(2, 1),
    Op.STORE_SUBSCR: Effect(3, 0),
    Op.COMPARE_OP: Effect(2, 1),
    Op.LIST_APPEND: Effect(1, 0),
    Op.GET_ITER: Effect(1, 1),
    Op.JUMP_ABSOLUTE: Effect(0, 0),
    Op.POP_JUMP_IF_FALSE: Effect(1, 0),
    Op.POP_JUMP_IF_TRUE: Effect(1, 0),
    Op.LOAD_ATTR: Effect(1, 1),
    Op.STORE_ATTR: Effect(2, 0),
    Op.RETURN_VALUE: Effect(1, 0),
    Op.POP_TOP: Effect(1, 0),
    Op.DUP_TOP: Effect(1, 2),
    Op.SETUP_FINALLY: Effect(0, 0),
    Op.MOVE: Effect(0, 0),
}


def stack_effect(op: StackOp) -> StackEffect:
    """Static (pops, pushes) of a stack op; FOR_ITER has one per edge."""
    opc = op.opcode
    if opc in BINARY_OPS:
        return Effect(2, 1)
    if opc in UNARY_OPS:
        return Effect(1, 1)
    if opc is Op.BUILD_LIST:
        return Effect(op.arg, 1)
    if opc is Op.BUILD_MAP:
        return Effect(2 * op.arg, 1)
    if opc is Op.CALL_FUNCTION:
        return Effect(op.arg + 1, 1)
    if opc is Op.FOR_ITER:
        # fallthrough keeps the iterator and pushes the element;
        # the exit edge pops the exhausted iterator
        return BranchEffect(Effect(0, 1), Effect(1, 0))
    if opc is Op.END_FINALLY:
        return DYNAMIC
    return _FIXED_EFFECTS[opc]


def stack_successors(code: StackCode, i: int, offset_index: dict[int, int]) -> list[tuple[int, int]]:
    """Control successors of op ``i`` as (op index, depth delta relative to entry of op i)."""
    op = code.ops[i]
    opc = op.opcode
    nxt = i + 1
    if opc is Op.RETURN_VALUE or opc is Op.END_FINALLY:
        return []
    if opc is Op.JUMP_ABSOLUTE:
        return [(offset_index[op.arg], 0)]
    if opc is Op.FOR_ITER:
        return [(nxt, 1), (offset_index[op.arg], -1)]
    if opc is Op.POP_JUMP_IF_FALSE or opc is Op.POP_JUMP_IF_TRUE:
        return [(nxt, -1), (offset_index[op.arg], -1)]
    if opc is Op.SETUP_FINALLY:
        return [(nxt, 0), (offset_index[op.arg], 1)]
    eff = stack_effect(op)
    return [(nxt, eff.pushes - eff.pops)]


class DepthError(Exception):
    pass


def stack_depths(code: StackCode) -> dict[int, int]:
    """Entry stack depth for every reachable op index.

    Raises DepthError on underflow, inconsistent merge depth, a jump outside
    the code, or on falling off the end. Only meaningful for code without
    END_FINALLY.
    """
    ops = code.ops
    if not ops:
        raise DepthError("empty code")
    offset_index = code.index_of_offset()
    depths: dict[int, int] = {0: 0}
    work = [0]
    while work:
        i = work.pop()
        d = depths[i]
        op = ops[i]
        eff = stack_effect(op)
        if eff is DYNAMIC:
            raise DepthError(f"offset {op.offset}: dynamic stack effect")
        need = eff.fallthrough.pops if isinstance(eff, BranchEffect) else eff.pops
        if op.opcode is Op.FOR_ITER:
            need = 1
        if op.opcode is Op.LIST_APPEND:
            need = max(need, (op.arg or 0) + 1)
        if d < need:
            raise DepthError(f"offset {op.offset}: stack underflow ({op.opcode.name} at depth {d})")
        try:
            succs = stack_successors(code, i, offset_index)
        except KeyError:
            raise DepthError(f"offset {op.offset}: jump to invalid offset {op.arg}") from None
        for j, delta in succs:
            if j >= len(ops):
                raise DepthError(f"offset {op.offset}: control falls off the end of the code")
            nd = d + delta
            seen = depths.get(j)
            if seen is None:
                depths[j] = nd
                work.append(j)
            elif seen != nd:
                raise DepthError(
                    f"offset {ops[j].offset}: inconsistent stack depth ({seen} vs {nd})"
                )
    return depths


def max_stack_depth(code: StackCode) -> int:
    depths = stack_depths(code)
    best = 0
    for i, d in depths.items():
        eff = stack_effect(code.ops[i])
        if isinstance(eff, BranchEffect):
            best = max(best, d + 1)
        else:
            best = max(best, d - eff.pops + eff.pushes, d)
    return best


# ---------------------------------------------------------------------------
# register code

@dataclass(frozen=True)
class RegOp:
    opcode: Opcode
    dst: int | None = None
    srcs: tuple[int, ...] = ()
    arg: int | None = None
    hint_slot: int | None = None
    targets: tuple[str, ...] = ()


@dataclass
class Block:
    label: str
    ops: list[RegOp] = field(default_factory=list)

    @property
    def succs(self) -> tuple[str, ...]:
        return self.ops[-1].targets if self.ops else ()


@dataclass
class RegCode:
    name: str
    argcount: int
    varnames: tuple[str, ...]
    consts: tuple[Any, ...]
    names: tuple[str, ...]
    num_registers: int
    blocks: list[Block]
    num_hint_slots: int = 0
    defaults: tuple[Any, ...] = ()

    @property
    def num_locals(self) -> int:
        return len(self.varnames)

    @property
    def num_consts(self) -> int:
        return len(self.consts)

    local_base = 0

    @property
    def const_base(self) -> int:
        return self.num_locals

    @property
    def temp_base(self) -> int:
        return self.num_locals + self.num_consts

    def op_count(self) -> int:
        return sum(len(b.ops) for b in self.blocks)

    def block_map(self) -> dict[str, Block]:
        return {b.label: b for b in self.blocks}

    def preds(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {b.label: [] for b in self.blocks}
        for b in self.blocks:
            for t in b.succs:
                if t in out and b.label not in out[t]:
                    out[t].append(b.label)
        return out


def reg_defs(op: RegOp) -> int | None:
    return op.dst


# ---------------------------------------------------------------------------
# disassembly

def _stack_argrepr(code: StackCode, op: StackOp) -> str:
    opc = op.opcode
    a = op.arg
    if opc is Op.LOAD_FAST or opc is Op.STORE_FAST:
        return code.varnames[a]
    if opc is Op.LOAD_CONST:
        return to_repr(code.consts[a])
    if opc in NAME_OPS:
        return code.names[a]
    if opc is Op.COMPARE_OP:
        return CMP_OPS[a]
    if opc in JUMP_OPS:
        return f"to {a}"
    return str(a)


def disassemble_stack(code: StackCode) -> str:
    lines = []
    for op in code.ops:
        if op.opcode in HAS_ARG:
            lines.append(f"{op.offset:>4}: {op.opcode.name:<18} ({_stack_argrepr(code, op)})")
        else:
            lines.append(f"{op.offset:>4}: {op.opcode.name}")
    return "\n".join(lines) + "\n"


def format_regop(op: RegOp, names: tuple[str, ...]) -> str:
    if op.opcode is Op.MOVE:
        text = f"r{op.dst} = r{op.srcs[0]}"
    else:
        args = [f"r{s}" for s in op.srcs]
        if op.opcode in NAME_OPS:
            args.append(names[op.arg])
        if op.opcode is Op.COMPARE_OP:
            bracket = f"[{CMP_OPS[op.arg]}]"
        elif op.opcode is Op.CALL_FUNCTION:
            bracket = f"[{op.arg}]"
        else:
            bracket = ""
        text = f"{op.opcode.name}{bracket}({', '.join(args)})"
        if op.dst is not None:
            text = f"r{op.dst} = {text}"
    if op.targets:
        text += " -> " + ",".join(op.targets)
    return text


def disassemble_reg(code: RegCode) -> str:
    """Block-ordered listing; single-block code is printed without a label."""
    lines = []
    show_labels = len(code.blocks) > 1
    for b in code.blocks:
        if show_labels:
            lines.append(f"{b.label}:")
        for op in b.ops:
            lines.append("  " + format_regop(op, code.names))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# validation

def _validate_stack(code: StackCode) -> list[str]:
    problems = []
    offsets = code.index_of_offset()
    expected = 0
    has_end_finally = False
    for op in code.ops:
        if op.offset != expected:
            problems.append(f"offset {op.offset}: expected offset {expected}")
        expected = op.offset + op.size
        opc = op.opcode
        a = op.arg
        if opc is Op.MOVE:
            problems.append(f"offset {op.offset}: MOVE is not a stack op")
        if opc is Op.END_FINALLY:
            has_end_finally = True
        if opc in HAS_ARG and a is None:
            problems.append(f"offset {op.offset}: {opc.name} requires an argument")
            continue
        if opc in (Op.LOAD_FAST, Op.STORE_FAST) and not 0 <= a < code.num_locals:
            problems.append(f"offset {op.offset}: local index {a} out of range")
        elif opc is Op.LOAD_CONST and not 0 <= a < len(code.consts):
            problems.append(f"offset {op.offset}: const index {a} out of range")
        elif opc in NAME_OPS and not 0 <= a < len(code.names):
            problems.append(f"offset {op.offset}: name index {a} out of range")
        elif opc in JUMP_OPS and a not in offsets:
            problems.append(f"offset {op.offset}: jump target {a} is not an instruction offset")
        elif opc is Op.COMPARE_OP and not 0 <= a < len(CMP_OPS):
            problems.append(f"offset {op.offset}: unknown comparison {a}")
        elif opc in (Op.BUILD_LIST, Op.BUILD_MAP, Op.CALL_FUNCTION) and a < 0:
            problems.append(f"offset {op.offset}: negative count")
    flagged = HAS_DYNAMIC_STACK_EFFECT in code.flags
    if flagged != has_end_finally:
        problems.append("HAS_DYNAMIC_STACK_EFFECT flag does not match presence of END_FINALLY")
    if code.argcount > code.num_locals:
        problems.append("argcount exceeds number of locals")
    if not problems and not has_end_finally:
        try:
            stack_depths(code)
        except DepthError as e:
            problems.append(str(e))
    return problems


_REG_SRC_ARITY = {
    Op.MOVE: 1, Op.LOAD_GLOBAL: 0, Op.STORE_GLOBAL: 1, Op.BINARY_SUBSCR: 2,
    Op.STORE_SUBSCR: 3, Op.COMPARE_OP: 2, Op.LIST_APPEND: 2, Op.GET_ITER: 1,
    Op.FOR_ITER: 1, Op.JUMP_ABSOLUTE: 0, Op.POP_JUMP_IF_FALSE: 1,
    Op.POP_JUMP_IF_TRUE: 1, Op.LOAD_ATTR: 1, Op.STORE_ATTR: 2, Op.RETURN_VALUE: 1,
}
_REG_HAS_DST = frozenset({
    Op.MOVE, Op.LOAD_GLOBAL, Op.BINARY_SUBSCR, Op.COMPARE_OP, Op.BUILD_LIST,
    Op.BUILD_MAP, Op.GET_ITER, Op.FOR_ITER, Op.CALL_FUNCTION, Op.LOAD_ATTR,
}) | BINARY_OPS | UNARY_OPS
_NOT_REG_OPS = frozenset({
    Op.LOAD_FAST, Op.STORE_FAST, Op.LOAD_CONST, Op.POP_TOP, Op.DUP_TOP,
    Op.SETUP_FINALLY, Op.END_FINALLY,
})


def _validate_reg(code: RegCode) -> list[str]:
    problems = []
    nregs = code.num_registers
    cbase, tbase = code.const_base, code.temp_base
    if tbase > nregs:
        problems.append("register file smaller than locals + constants")
    labels = [b.label for b in code.blocks]
    label_set = set(labels)
    if len(label_set) != len(labels):
        problems.append("duplicate block labels")
    if not code.blocks:
        problems.append("code has no blocks")
    for b in code.blocks:
        where = b.label
        if not b.ops:
            problems.append(f"{where}: empty block")
            continue
        last = len(b.ops) - 1
        for k, op in enumerate(b.ops):
            at = f"{where}[{k}] {op.opcode.name}"
            opc = op.opcode
            if opc in _NOT_REG_OPS:
                problems.append(f"{at}: not a register op")
                continue
            for s in op.srcs:
                if not 0 <= s < nregs:
                    problems.append(f"{at}: read of r{s} outside register file")
            arity = _REG_SRC_ARITY.get(opc)
            if opc in BINARY_OPS:
                arity = 2
            elif opc in UNARY_OPS:
                arity = 1
            elif opc is Op.CALL_FUNCTION:
                arity = (op.arg or 0) + 1
            elif opc is Op.BUILD_LIST:
                arity = op.arg
            elif opc is Op.BUILD_MAP:
                arity = 2 * (op.arg or 0)
            if arity is not None and len(op.srcs) != arity:
                problems.append(f"{at}: expected {arity} sources, got {len(op.srcs)}")
            if opc in _REG_HAS_DST:
                if op.dst is None:
                    problems.append(f"{at}: missing destination")
                elif not 0 <= op.dst < nregs:
                    problems.append(f"{at}: write to r{op.dst} outside register file")
                elif cbase <= op.dst < tbase:
                    problems.append(f"{at}: write to constant register r{op.dst}")
            elif op.dst is not None:
                problems.append(f"{at}: unexpected destination")
            if opc is Op.LOAD_ATTR:
                if op.hint_slot is None or not 0 <= op.hint_slot < code.num_hint_slots:
                    problems.append(f"{at}: invalid hint slot {op.hint_slot}")
            elif op.hint_slot is not None:
                problems.append(f"{at}: hint slot on non-LOAD_ATTR op")
            if opc in NAME_OPS and not (op.arg is not None and 0 <= op.arg < len(code.names)):
                problems.append(f"{at}: name index {op.arg} out of range")
            if opc is Op.COMPARE_OP and not (op.arg is not None and 0 <= op.arg < len(CMP_OPS)):
                problems.append(f"{at}: unknown comparison {op.arg}")
            for t in op.targets:
                if t not in label_set:
                    problems.append(f"{at}: branch to unknown block {t}")
            if k < last:
                if opc in TERMINATORS:
                    problems.append(f"{at}: terminator in the middle of a block")
                if op.targets:
                    problems.append(f"{at}: branch targets on a non-final op")
            else:
                if opc in TERMINATORS:
                    if len(op.targets) != TERMINATOR_ARITY[opc]:
                        problems.append(f"{at}: expected {TERMINATOR_ARITY[opc]} branch targets")
                elif len(op.targets) != 1:
                    problems.append(f"{at}: block must end in a terminator or a fallthrough edge")
    return problems


def validate(code: StackCode | RegCode) -> list[str]:
    """Every structural invariant violation found (empty list means ok)."""
    if isinstance(code, StackCode):
        return _validate_stack(code)
    if isinstance(code, RegCode):
        return _validate_reg(code)
    raise TypeError(f"cannot validate {type(code).__name__}")
