"""Baseline stack-bytecode interpreter.

Stack code is decoded once per machine into a linked list of ``SInstr``
records carrying a pre-resolved handler, so the loop is just
``ins = ins.h(ins, frame)``. The register VM's speedup is then measured
against a baseline with the same handler-call cost per instruction.
"""

from __future__ import annotations

from typing import Any

from .errors import StackUnderflow, VMIndexError, VMNameError, VMTypeError
from .isa import (
    BINARY_OPS, CMP_IN, CMP_NOT_IN, HAS_DYNAMIC_STACK_EFFECT, Op, StackCode, stack_depths,
)
from .semantics import (
    BOXED_FAST_EXPR,
    CMP_HOST,
    binary_op,
    compare_op,
    get_attr,
    get_iter,
    int_arith,
    store_attr,
    store_subscr,
    subscr,
    unary_negative,
)
from .values import (
    FALSE,
    INT_MAX,
    INT_MIN,
    STOP,
    TRUE,
    Dict,
    Function,
    Int,
    ListIter,
    RangeIter,
    truthy,
    wrap_int,
)


class SInstr:
    __slots__ = ("opcode", "arg", "val", "fn", "h", "next", "jump", "index", "offset")


class StackFrame:
    __slots__ = ("code", "locals", "stack", "globals", "machine", "blocks", "ret")

    def __init__(self, code: StackCode, locals: list, globals: Dict, machine: Any) -> None:
        self.code = code
        self.locals = locals
        self.stack: list = []
        self.globals = globals
        self.machine = machine
        # try/finally records: (handler SInstr, stack depth at setup)
        self.blocks: list = []
        self.ret: Any = None


class PendingReturn:
    """Marker pushed for END_FINALLY when a return unwinds through a finally."""

    __slots__ = ("value",)

    def __init__(self, value: Any) -> None:
        self.value = value


def _no_in(a: Any, b: Any) -> bool:
    raise VMTypeError("argument of type 'int' is not iterable")


def compare_fn(code: int):
    """Host comparator for two unboxed ints under ``code``."""
    if code == CMP_IN or code == CMP_NOT_IN:
        return _no_in
    return CMP_HOST[code]


# ---------------------------------------------------------------------------
# handlers: h(ins, frame) -> next SInstr or None to leave the frame

def _load_fast(i, f):
    f.stack.append(f.locals[i.arg])
    return i.next


def _store_fast(i, f):
    f.locals[i.arg] = f.stack.pop()
    return i.next


def _load_const(i, f):
    f.stack.append(i.val)
    return i.next


def _load_global(i, f):
    g = f.globals
    slot = g.index.get(i.val)
    if slot is None:
        raise VMNameError(f"name '{i.val}' is not defined")
    f.stack.append(g.values[slot])
    return i.next


def _store_global(i, f):
    f.globals.set(i.val, f.stack.pop())
    return i.next


_BINARY_TEMPLATE = """
def h(i, f):
    s = f.stack
    b = s.pop()
    a = s[-1]
    if a.__class__ is Int and b.__class__ is Int:
        r = EXPR
        s[-1] = Int(r) if IMIN <= r <= IMAX else Int(wrap_int(r))
    else:
        s[-1] = binary_op(f.machine, OPC, a, b)
    return i.next
"""


def _make_binary(opc: Op):
    expr = BOXED_FAST_EXPR[opc]
    src = _BINARY_TEMPLATE.replace("EXPR", expr).replace("OPC", str(int(opc)))
    ns = {"Int": Int, "IMIN": INT_MIN, "IMAX": INT_MAX, "wrap_int": wrap_int,
          "binary_op": binary_op, "int_arith": int_arith}
    exec(compile(src, f"<stack {opc.name}>", "exec"), ns)
    return ns["h"]


def _binary_subscr(i, f):
    s = f.stack
    k = s.pop()
    c = s[-1]
    if c.__class__ is list and k.__class__ is Int:
        try:
            s[-1] = c[k.v]
        except IndexError:
            raise VMIndexError("list index out of range") from None
    else:
        s[-1] = subscr(f.machine, c, k)
    return i.next


def _store_subscr(i, f):
    s = f.stack
    k = s.pop()
    c = s.pop()
    v = s.pop()
    if c.__class__ is list and k.__class__ is Int:
        try:
            c[k.v] = v
        except IndexError:
            raise VMIndexError("list assignment index out of range") from None
    else:
        store_subscr(f.machine, c, k, v)
    return i.next


def _unary_negative(i, f):
    s = f.stack
    a = s[-1]
    s[-1] = Int(wrap_int(-a.v)) if a.__class__ is Int else unary_negative(f.machine, a)
    return i.next


def _unary_not(i, f):
    s = f.stack
    s[-1] = FALSE if truthy(s[-1]) else TRUE
    return i.next


def _compare_op(i, f):
    s = f.stack
    b = s.pop()
    a = s[-1]
    if a.__class__ is Int and b.__class__ is Int:
        s[-1] = TRUE if i.fn(a.v, b.v) else FALSE
    else:
        s[-1] = compare_op(f.machine, i.arg, a, b)
    return i.next


def _build_list(i, f):
    s = f.stack
    n = i.arg
    if n:
        items = s[-n:]
        del s[-n:]
        s.append(items)
    else:
        s.append([])
    return i.next


def _build_map(i, f):
    s = f.stack
    n = 2 * i.arg
    d = Dict()
    if n:
        flat = s[-n:]
        del s[-n:]
        for k in range(0, n, 2):
            d.set(flat[k], flat[k + 1])
    s.append(d)
    return i.next


def _list_append(i, f):
    s = f.stack
    v = s.pop()
    s[-i.arg].append(v)
    return i.next


def _get_iter(i, f):
    s = f.stack
    s[-1] = get_iter(s[-1])
    return i.next


def _for_iter(i, f):
    s = f.stack
    it = s[-1]
    if it.__class__ is RangeIter:
        c = it.cur
        if (c < it.stop) if it.step > 0 else (c > it.stop):
            it.cur = c + it.step
            s.append(Int(c))
            return i.next
        s.pop()
        return i.jump
    if it.__class__ is ListIter:
        k = it.i
        if k < len(it.seq):
            it.i = k + 1
            s.append(it.seq[k])
            return i.next
        s.pop()
        return i.jump
    v = it.next()
    if v is STOP:
        s.pop()
        return i.jump
    s.append(v)
    return i.next


def _jump_absolute(i, f):
    return i.jump


def _pop_jump_if_false(i, f):
    v = f.stack.pop()
    if v is FALSE:
        return i.jump
    if v is TRUE:
        return i.next
    return i.next if truthy(v) else i.jump


def _pop_jump_if_true(i, f):
    v = f.stack.pop()
    if v is TRUE:
        return i.jump
    if v is FALSE:
        return i.next
    return i.jump if truthy(v) else i.next


def _call_function(i, f):
    s = f.stack
    n = i.arg
    if n:
        args = s[-n:]
        del s[-n:]
    else:
        args = []
    fn = s[-1]
    m = f.machine
    if fn.__class__ is Function:
        s[-1] = m.call_function(fn, args)
    else:
        from .machine import call_value

        s[-1] = call_value(m, fn, args)
    return i.next


def _load_attr(i, f):
    s = f.stack
    s[-1] = get_attr(f.machine, s[-1], i.val)
    return i.next


def _store_attr(i, f):
    s = f.stack
    o = s.pop()
    v = s.pop()
    store_attr(f.machine, o, i.val, v)
    return i.next


def _return_value(i, f):
    f.ret = f.stack.pop()
    return None


def _return_in_try(i, f):
    v = f.stack.pop()
    if f.blocks:
        handler, depth = f.blocks[-1]
        del f.stack[depth:]
        f.stack.append(PendingReturn(v))
        return handler
    f.ret = v
    return None


def _pop_top(i, f):
    f.stack.pop()
    return i.next


def _dup_top(i, f):
    s = f.stack
    s.append(s[-1])
    return i.next


def _setup_finally(i, f):
    f.blocks.append((i.jump, len(f.stack)))
    return i.next


def _end_finally(i, f):
    v = f.stack.pop()
    if v is None:
        return i.next
    if v.__class__ is PendingReturn:
        if f.blocks:
            handler, depth = f.blocks[-1]
            del f.stack[depth:]
            f.stack.append(v)
            return handler
        f.ret = v.value
        return None
    raise StackUnderflow(f"END_FINALLY found unexpected {v!r}")


HANDLERS: dict[Op, Any] = {
    Op.LOAD_FAST: _load_fast,
    Op.STORE_FAST: _store_fast,
    Op.LOAD_CONST: _load_const,
    Op.LOAD_GLOBAL: _load_global,
    Op.STORE_GLOBAL: _store_global,
    Op.BINARY_SUBSCR: _binary_subscr,
    Op.STORE_SUBSCR: _store_subscr,
    Op.UNARY_NEGATIVE: _unary_negative,
    Op.UNARY_NOT: _unary_not,
    Op.COMPARE_OP: _compare_op,
    Op.BUILD_LIST: _build_list,
    Op.BUILD_MAP: _build_map,
    Op.LIST_APPEND: _list_append,
    Op.GET_ITER: _get_iter,
    Op.FOR_ITER: _for_iter,
    Op.JUMP_ABSOLUTE: _jump_absolute,
    Op.POP_JUMP_IF_FALSE: _pop_jump_if_false,
    Op.POP_JUMP_IF_TRUE: _pop_jump_if_true,
    Op.CALL_FUNCTION: _call_function,
    Op.LOAD_ATTR: _load_attr,
    Op.STORE_ATTR: _store_attr,
    Op.RETURN_VALUE: _return_value,
    Op.POP_TOP: _pop_top,
    Op.DUP_TOP: _dup_top,
    Op.SETUP_FINALLY: _setup_finally,
    Op.END_FINALLY: _end_finally,
}
for _opc in BINARY_OPS:
    HANDLERS[_opc] = _make_binary(_opc)


def _enter_handler(h):
    """Wrap the first op of a finally handler: arriving there retires its block."""

    def entry(i, f):
        f.blocks.pop()
        return h(i, f)

    return entry


# ---------------------------------------------------------------------------

class DecodedCode:
    __slots__ = ("code", "entry", "instrs", "depths")

    def __init__(self, code: StackCode, entry: SInstr, instrs: list, depths: dict | None) -> None:
        self.code = code
        self.entry = entry
        self.instrs = instrs
        self.depths = depths


def decode(code: StackCode) -> DecodedCode:
    has_try = HAS_DYNAMIC_STACK_EFFECT in code.flags
    index = code.index_of_offset()
    instrs = []
    for n, op in enumerate(code.ops):
        ins = SInstr()
        ins.opcode = int(op.opcode)
        ins.arg = op.arg
        ins.index = n
        ins.offset = op.offset
        ins.val = None
        ins.fn = None
        ins.next = None
        ins.jump = None
        if op.opcode is Op.LOAD_CONST:
            ins.val = code.consts[op.arg]
        elif op.opcode in (Op.LOAD_GLOBAL, Op.STORE_GLOBAL, Op.LOAD_ATTR, Op.STORE_ATTR):
            ins.val = code.names[op.arg]
        elif op.opcode is Op.COMPARE_OP:
            ins.fn = compare_fn(op.arg)
        h = HANDLERS[op.opcode]
        if op.opcode is Op.RETURN_VALUE and has_try:
            h = _return_in_try
        ins.h = h
        instrs.append(ins)
    handler_targets = set()
    for n, (ins, op) in enumerate(zip(instrs, code.ops)):
        ins.next = instrs[n + 1] if n + 1 < len(instrs) else None
        if op.opcode in (Op.FOR_ITER, Op.JUMP_ABSOLUTE, Op.POP_JUMP_IF_FALSE,
                         Op.POP_JUMP_IF_TRUE, Op.SETUP_FINALLY):
            ins.jump = instrs[index[op.arg]]
            if op.opcode is Op.SETUP_FINALLY:
                handler_targets.add(index[op.arg])
    for n in handler_targets:
        instrs[n].h = _enter_handler(instrs[n].h)
    depths = None if has_try else stack_depths(code)
    return DecodedCode(code, instrs[0], instrs, depths)


def decoded_for(machine: Any, code: StackCode) -> DecodedCode:
    d = machine.stack_decoded.get(id(code))
    if d is None or d.code is not code:
        d = machine.stack_decoded[id(code)] = decode(code)
    return d


def exec_stack(code: StackCode, args: list, globals: Dict, machine: Any = None) -> Any:
    """Run ``code`` with boxed ``args``; returns the boxed result."""
    if machine is None:
        from .machine import Machine, STACK_CONFIG

        machine = Machine(STACK_CONFIG)
    dec = decoded_for(machine, code)
    nl = len(code.varnames)
    if len(args) != code.argcount:
        from .errors import VMArityError

        raise VMArityError(f"{code.name}() takes {code.argcount} arguments ({len(args)} given)")
    locals_ = list(args)
    if nl > len(locals_):
        locals_.extend([None] * (nl - len(locals_)))
    f = StackFrame(code, locals_, globals, machine)
    ins = dec.entry
    try:
        if getattr(machine, "check_depths", False) and dec.depths is not None:
            depths = dec.depths
            counts = machine.counters.stack if machine.config.count_instructions else None
            while ins is not None:
                want = depths[ins.index]
                if len(f.stack) != want:
                    raise AssertionError(
                        f"{code.name} offset {ins.offset}: stack depth {len(f.stack)} != {want}"
                    )
                if counts is not None:
                    counts[ins.opcode] += 1
                ins = ins.h(ins, f)
        elif machine.config.count_instructions:
            counts = machine.counters.stack
            while ins is not None:
                counts[ins.opcode] += 1
                ins = ins.h(ins, f)
        else:
            while ins is not None:
                ins = ins.h(ins, f)
    except IndexError as e:
        raise StackUnderflow(f"{code.name}: {e}") from None
    return f.ret
