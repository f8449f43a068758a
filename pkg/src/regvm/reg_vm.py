"""Register-bytecode interpreter.

Handlers are generated from source templates for every combination of
dispatch style, tagging, hints and instruction counting, so no handler
tests configuration flags at run time. A handler takes
``(instr, regs, frame)`` and returns the next instruction (None on
return). The three dispatch styles differ only in who picks the next
handler:

* SWITCH: the central loop indexes the opcode table every instruction.
* TOKEN: each handler indexes the table itself and calls the next handler
  directly while control stays inside a basic block; branches hand the
  next instruction back to the loop.
* DIRECT: every instruction carries its resolved handler (comparisons are
  further specialized per comparator), so the loop is one call.
"""

from __future__ import annotations

import re
from typing import Any

from .errors import VMArityError, VMIndexError, VMNameError
from .isa import BINARY_OPS, CMP_OPS, NUM_OPCODES, Op, RegCode
from .machine import Dispatch, Machine, VmConfig, call_value
from .semantics import (
    BOXED_FAST_EXPR,
    attribute_lookup,
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
from .stack_vm import compare_fn
from .tagging import WMAX, WMIN, _unbox_tagged, box, wrap_word
from .values import (
    CLASS_EPOCH,
    FALSE,
    INT_MAX,
    INT_MIN,
    STOP,
    TRUE,
    BoundMethod,
    Dict,
    Function,
    Instance,
    Int,
    ListIter,
    RangeIter,
    truthy,
    wrap_int,
)


class Instr:
    __slots__ = ("opcode", "h", "dst", "a", "b", "c", "args", "arg", "name", "fn", "hint",
                 "next", "jump", "chain", "label")

    def __repr__(self) -> str:
        return f"<Instr {Op(self.opcode).name} in {self.label}>"


class Hint:
    """Where a LOAD_ATTR last found its attribute."""

    __slots__ = ("location", "klass", "dict", "generation", "offset", "key", "epoch")

    def __init__(self, location: int, klass: Any, d: Dict, generation: int, offset: int,
                 key: str, epoch: int) -> None:
        self.location = location
        self.klass = klass
        self.dict = d
        self.generation = generation
        self.offset = offset
        self.key = key
        self.epoch = epoch


class RegFrame:
    __slots__ = ("machine", "globals", "hints", "counts", "hstats", "ret", "code")


def _no_in(a: Any, b: Any) -> bool:
    return compare_fn(6)(a, b)


# ---------------------------------------------------------------------------
# handler templates
#
# Line prefixes: "T|" keeps the line only with tagging, "B|" only without.
# Placeholders: {COUNT} {NEXT} {HIT} {MISS} expand to whole lines;
# {BOX}/{UNBOX} expand to a conversion function name or nothing.

_COMMON = r'''
def h_MOVE(i, regs, fr):
    {COUNT}
    regs[i.dst] = regs[i.a]
    {NEXT}

def h_LOAD_GLOBAL(i, regs, fr):
    {COUNT}
    g = fr.globals
    slot = g.index.get(i.name)
    if slot is None:
        raise VMNameError("name '%s' is not defined" % i.name)
    regs[i.dst] = {UNBOX}(g.values[slot])
    {NEXT}

def h_STORE_GLOBAL(i, regs, fr):
    {COUNT}
    fr.globals.set(i.name, {BOX}(regs[i.a]))
    {NEXT}

def h_BINARY_SUBSCR(i, regs, fr):
    {COUNT}
    c = regs[i.a]
    k = regs[i.b]
T|    if c.__class__ is list and k.__class__ is int:
T|        try:
T|            v = c[k >> 1]
T|        except IndexError:
T|            raise VMIndexError("list index out of range") from None
T|        regs[i.dst] = ((v.v << 1) | 1) if v.__class__ is Int else v
T|    else:
T|        regs[i.dst] = unbox(subscr(fr.machine, box(c), box(k)))
B|    if c.__class__ is list and k.__class__ is Int:
B|        try:
B|            regs[i.dst] = c[k.v]
B|        except IndexError:
B|            raise VMIndexError("list index out of range") from None
B|    else:
B|        regs[i.dst] = subscr(fr.machine, c, k)
    {NEXT}

def h_STORE_SUBSCR(i, regs, fr):
    {COUNT}
    c = regs[i.a]
    k = regs[i.b]
    v = {BOX}(regs[i.c])
T|    if c.__class__ is list and k.__class__ is int:
T|        try:
T|            c[k >> 1] = v
T|        except IndexError:
T|            raise VMIndexError("list assignment index out of range") from None
B|    if c.__class__ is list and k.__class__ is Int:
B|        try:
B|            c[k.v] = v
B|        except IndexError:
B|            raise VMIndexError("list assignment index out of range") from None
    else:
        store_subscr(fr.machine, {BOX}(c), {BOX}(k), v)
    {NEXT}

def h_UNARY_NEGATIVE(i, regs, fr):
    {COUNT}
    a = regs[i.a]
T|    if a.__class__ is int:
T|        r = 2 - a
T|        regs[i.dst] = r if WMIN <= r <= WMAX else wrap_word(r)
T|    else:
T|        regs[i.dst] = unbox(unary_negative(fr.machine, box(a)))
B|    if a.__class__ is Int:
B|        regs[i.dst] = Int(wrap_int(-a.v))
B|    else:
B|        regs[i.dst] = unary_negative(fr.machine, a)
    {NEXT}

def h_UNARY_NOT(i, regs, fr):
    {COUNT}
    a = regs[i.a]
    if a is TRUE:
        regs[i.dst] = FALSE
    elif a is FALSE:
        regs[i.dst] = TRUE
T|    elif a.__class__ is int:
T|        regs[i.dst] = TRUE if a == 1 else FALSE
    else:
        regs[i.dst] = FALSE if truthy(a) else TRUE
    {NEXT}

def h_BUILD_LIST(i, regs, fr):
    {COUNT}
    regs[i.dst] = [{BOX}(regs[s]) for s in i.args]
    {NEXT}

def h_BUILD_MAP(i, regs, fr):
    {COUNT}
    d = Dict()
    s = i.args
    for k in range(0, len(s), 2):
        d.set({BOX}(regs[s[k]]), {BOX}(regs[s[k + 1]]))
    regs[i.dst] = d
    {NEXT}

def h_LIST_APPEND(i, regs, fr):
    {COUNT}
    regs[i.a].append({BOX}(regs[i.b]))
    {NEXT}

def h_GET_ITER(i, regs, fr):
    {COUNT}
    regs[i.dst] = get_iter({BOX}(regs[i.a]))
    {NEXT}

def h_FOR_ITER(i, regs, fr):
    {COUNT}
    it = regs[i.a]
    if it.__class__ is RangeIter:
        c = it.cur
        if (c < it.stop) if it.step > 0 else (c > it.stop):
            it.cur = c + it.step
T|            regs[i.dst] = (c << 1) | 1
B|            regs[i.dst] = Int(c)
            return i.next
        return i.jump
    if it.__class__ is ListIter:
        k = it.i
        if k < len(it.seq):
            it.i = k + 1
            regs[i.dst] = {UNBOX}(it.seq[k])
            return i.next
        return i.jump
    v = it.next()
    if v is STOP:
        return i.jump
    regs[i.dst] = {UNBOX}(v)
    return i.next

def h_JUMP_ABSOLUTE(i, regs, fr):
    {COUNT}
    return i.jump

def h_POP_JUMP_IF_FALSE(i, regs, fr):
    {COUNT}
    v = regs[i.a]
    if v is FALSE:
        return i.jump
    if v is TRUE:
        return i.next
T|    if v.__class__ is int:
T|        return i.jump if v == 1 else i.next
    return i.next if truthy(v) else i.jump

def h_POP_JUMP_IF_TRUE(i, regs, fr):
    {COUNT}
    v = regs[i.a]
    if v is TRUE:
        return i.jump
    if v is FALSE:
        return i.next
T|    if v.__class__ is int:
T|        return i.next if v == 1 else i.jump
    return i.jump if truthy(v) else i.next

def h_CALL_FUNCTION(i, regs, fr):
    {COUNT}
    f = regs[i.a]
    args = [{BOX}(regs[s]) for s in i.args]
    if f.__class__ is Function:
        regs[i.dst] = {UNBOX}(fr.machine.call_function(f, args))
    else:
        regs[i.dst] = {UNBOX}(call_value(fr.machine, {BOX}(f), args))
    {NEXT}

def h_LOAD_ATTR(i, regs, fr):
    {COUNT}
    regs[i.dst] = {UNBOX}(get_attr(fr.machine, {BOX}(regs[i.a]), i.name))
    {NEXT}

def h_LOAD_ATTR_HINTED(i, regs, fr):
    {COUNT}
    o = regs[i.a]
    if o.__class__ is Instance:
        h = fr.hints[i.hint]
        if h is not None and h.klass is o.cls:
            if h.location == 0:
                d = o.dict
                if h.dict is d and h.generation == d.generation and d.keys[h.offset] == i.name:
                    {HIT}
                    regs[i.dst] = {UNBOX}(d.values[h.offset])
                    {NEXT}
            else:
                d = h.dict
                if (h.epoch == EPOCH[0] and h.generation == d.generation
                        and d.keys[h.offset] == i.name and i.name not in o.dict.index):
                    {HIT}
                    v = d.values[h.offset]
                    if v.__class__ is Function:
                        v = BoundMethod(o, v)
                    regs[i.dst] = {UNBOX}(v)
                    {NEXT}
        {MISS}
        v, site = attribute_lookup(fr.machine, o, i.name)
        if site.location != 2 and v.__class__ is not BoundMethod:
            fr.hints[i.hint] = Hint(site.location, site.klass, site.dict, site.generation,
                                    site.offset, i.name, EPOCH[0])
        else:
            fr.hints[i.hint] = None
        regs[i.dst] = {UNBOX}(v)
        {NEXT}
    regs[i.dst] = {UNBOX}(get_attr(fr.machine, {BOX}(o), i.name))
    {NEXT}

def h_STORE_ATTR(i, regs, fr):
    {COUNT}
    store_attr(fr.machine, {BOX}(regs[i.a]), i.name, {BOX}(regs[i.b]))
    {NEXT}

def h_RETURN_VALUE(i, regs, fr):
    {COUNT}
    fr.ret = regs[i.a]
    return None
'''

_BINARY = r'''
def h_NAME(i, regs, fr):
    {COUNT}
    a = regs[i.a]
    b = regs[i.b]
T|    if a.__class__ is int and b.__class__ is int:
T|        r = TEXPR
T|        regs[i.dst] = r if WMIN <= r <= WMAX else wrap_word(r)
T|    else:
T|        regs[i.dst] = unbox(binary_op(fr.machine, OPC, box(a), box(b)))
B|    if a.__class__ is Int and b.__class__ is Int:
B|        r = BEXPR
B|        regs[i.dst] = Int(r) if IMIN <= r <= IMAX else Int(wrap_int(r))
B|    else:
B|        regs[i.dst] = binary_op(fr.machine, OPC, a, b)
    {NEXT}
'''

_COMPARE = r'''
def h_NAME(i, regs, fr):
    {COUNT}
    a = regs[i.a]
    b = regs[i.b]
T|    if a.__class__ is int and b.__class__ is int:
T|        regs[i.dst] = TRUE if TEXPR else FALSE
T|    else:
T|        regs[i.dst] = compare_op(fr.machine, i.arg, box(a), box(b))
B|    if a.__class__ is Int and b.__class__ is Int:
B|        regs[i.dst] = TRUE if BEXPR else FALSE
B|    else:
B|        regs[i.dst] = compare_op(fr.machine, i.arg, a, b)
    {NEXT}
'''

_TAGGED_EXPR = {
    Op.BINARY_ADD: "a + b - 1",
    Op.BINARY_SUBTRACT: "a - b + 1",
    Op.BINARY_MULTIPLY: "(a >> 1) * (b - 1) + 1",
    Op.BINARY_AND: "a & b",
    Op.BINARY_OR: "a | b",
    Op.BINARY_XOR: "(a ^ b) | 1",
    Op.BINARY_DIVIDE: "((((a >> 1) // (b >> 1)) << 1) | 1) if a > 0 and b > 1 else SLOW",
    Op.BINARY_MODULO: "((((a >> 1) % (b >> 1)) << 1) | 1) if a > 0 and b > 1 else SLOW",
    Op.BINARY_LSHIFT: "((a >> 1 << (b >> 1)) << 1) | 1 if 1 <= b < 129 else SLOW",
    Op.BINARY_RSHIFT: "((a >> 1 >> (b >> 1)) << 1) | 1 if 1 <= b < 129 else SLOW",
}
_CMP_INFIX = {0: "<", 1: "<=", 2: "==", 3: "!=", 4: ">", 5: ">=", 8: "==", 9: "!="}


def _compare_exprs(code: int | None) -> tuple[str, str]:
    if code is None:
        return "i.fn(a, b)", "i.fn(a.v, b.v)"
    if code in _CMP_INFIX:
        op = _CMP_INFIX[code]
        return f"a {op} b", f"a.v {op} b.v"
    return "_no_in(a, b)", "_no_in(a, b)"


def _handler_sources() -> str:
    parts = [_COMMON]
    for opc in sorted(BINARY_OPS):
        slow_t = f"(int_arith({int(opc)}, a >> 1, b >> 1) << 1) | 1"
        parts.append(
            _BINARY.replace("NAME", opc.name)
            .replace("TEXPR", _TAGGED_EXPR.get(opc, slow_t).replace("SLOW", slow_t))
            .replace("BEXPR", BOXED_FAST_EXPR[opc])
            .replace("OPC", str(int(opc)))
        )
    texpr, bexpr = _compare_exprs(None)
    parts.append(_COMPARE.replace("NAME", "COMPARE_OP").replace("TEXPR", texpr)
                 .replace("BEXPR", bexpr))
    for code in range(len(CMP_OPS)):
        texpr, bexpr = _compare_exprs(code)
        parts.append(_COMPARE.replace("NAME", f"CMP_{code}").replace("TEXPR", texpr)
                     .replace("BEXPR", bexpr))
    return "\n".join(parts)


_TEMPLATE = _handler_sources()
_PLACEHOLDER = re.compile(r"^(\s*)\{(COUNT|NEXT|HIT|MISS)\}\s*$")


def render(tagging: bool, counting: bool, token: bool) -> str:
    """Expand the handler templates for one variant into Python source."""
    out = []
    for line in _TEMPLATE.splitlines():
        if line.startswith("T|"):
            if not tagging:
                continue
            line = line[2:]
        elif line.startswith("B|"):
            if tagging:
                continue
            line = line[2:]
        m = _PLACEHOLDER.match(line)
        if m:
            indent, what = m.groups()
            if what == "COUNT":
                if counting:
                    out.append(f"{indent}fr.counts[i.opcode] += 1")
            elif what == "NEXT":
                if token:
                    out.append(f"{indent}n = i.next")
                    out.append(f"{indent}return T[n.opcode](n, regs, fr) if i.chain else n")
                else:
                    out.append(f"{indent}return i.next")
            elif what == "HIT":
                if counting:
                    out.append(f"{indent}fr.hstats[0] += 1")
            elif counting:
                out.append(f"{indent}fr.hstats[1] += 1")
            continue
        if tagging:
            line = line.replace("{BOX}", "box").replace("{UNBOX}", "unbox")
        else:
            line = line.replace("{BOX}", "").replace("{UNBOX}", "")
        out.append(line)
    return "\n".join(out) + "\n"


class HandlerSet:
    """One generated variant: opcode table plus specialized handlers."""

    def __init__(self, tagging: bool, counting: bool, hints: bool, dispatch: Dispatch) -> None:
        self.key = (tagging, counting, hints, dispatch)
        token = dispatch is Dispatch.TOKEN
        self.source = render(tagging, counting, token)
        ns: dict[str, Any] = {
            "Int": Int, "TRUE": TRUE, "FALSE": FALSE, "STOP": STOP, "Dict": Dict,
            "Function": Function, "Instance": Instance, "BoundMethod": BoundMethod,
            "RangeIter": RangeIter, "ListIter": ListIter, "Hint": Hint, "EPOCH": CLASS_EPOCH,
            "box": box, "unbox": _unbox_tagged, "wrap_word": wrap_word, "wrap_int": wrap_int,
            "WMIN": WMIN, "WMAX": WMAX, "IMIN": INT_MIN, "IMAX": INT_MAX,
            "int_arith": int_arith, "binary_op": binary_op, "compare_op": compare_op,
            "subscr": subscr, "store_subscr": store_subscr, "get_iter": get_iter,
            "get_attr": get_attr, "attribute_lookup": attribute_lookup,
            "store_attr": store_attr, "unary_negative": unary_negative, "truthy": truthy,
            "call_value": call_value, "VMIndexError": VMIndexError, "VMNameError": VMNameError,
            "_no_in": _no_in,
        }
        name = "switch" if dispatch is Dispatch.SWITCH else dispatch.value
        exec(compile(self.source, f"<regvm handlers {name} tagged={tagging}>", "exec"), ns)
        table: list[Any] = [None] * NUM_OPCODES
        for opc in Op:
            fn = ns.get(f"h_{opc.name}")
            if fn is not None:
                table[opc] = fn
        if hints:
            table[Op.LOAD_ATTR] = ns["h_LOAD_ATTR_HINTED"]
        ns["T"] = table
        self.table = table
        self.compare = [ns[f"h_CMP_{k}"] for k in range(len(CMP_OPS))]

    def direct_handler(self, opcode: int, arg: int | None) -> Any:
        if opcode == Op.COMPARE_OP:
            return self.compare[arg]
        return self.table[opcode]


_HANDLER_SETS: dict[tuple, HandlerSet] = {}


def handler_set(config: VmConfig) -> HandlerSet:
    key = (config.tagging, config.count_instructions, config.hints, config.dispatch)
    hs = _HANDLER_SETS.get(key)
    if hs is None:
        hs = _HANDLER_SETS[key] = HandlerSet(*key)
    return hs


# ---------------------------------------------------------------------------

class PreparedCode:
    __slots__ = ("code", "entry", "instrs", "table", "template", "hints", "dispatch", "tagging")


def resolve_dispatch(code: RegCode, strategy: Dispatch, config: VmConfig | None = None) -> PreparedCode:
    """Lower RegCode into linked Instr records for one dispatch strategy.

    Under DIRECT every Instr carries its resolved handler in ``h``; the
    other strategies leave ``h`` unset and go through the opcode table.
    """
    config = (config or VmConfig()).with_(dispatch=strategy)
    hs = handler_set(config)
    first: dict[str, Instr] = {}
    per_block: list[tuple[Any, list[Instr]]] = []
    instrs: list[Instr] = []
    for b in code.blocks:
        made = []
        for op in b.ops:
            ins = Instr()
            ins.opcode = int(op.opcode)
            ins.label = b.label
            ins.dst = op.dst
            srcs = op.srcs
            ins.a = srcs[0] if srcs else None
            ins.b = srcs[1] if len(srcs) > 1 else None
            ins.c = srcs[2] if len(srcs) > 2 else None
            ins.args = srcs
            ins.arg = op.arg
            ins.name = code.names[op.arg] if op.opcode in (
                Op.LOAD_GLOBAL, Op.STORE_GLOBAL, Op.LOAD_ATTR, Op.STORE_ATTR) else None
            ins.fn = compare_fn(op.arg) if op.opcode is Op.COMPARE_OP else None
            ins.hint = op.hint_slot
            ins.next = None
            ins.jump = None
            ins.chain = False
            if op.opcode is Op.CALL_FUNCTION:
                ins.a = srcs[-1]
                ins.args = srcs[:-1]
            ins.h = hs.direct_handler(ins.opcode, op.arg) if strategy is Dispatch.DIRECT else None
            made.append(ins)
        first[b.label] = made[0]
        per_block.append((b, made))
        instrs.extend(made)
    for b, made in per_block:
        for k, ins in enumerate(made[:-1]):
            ins.next = made[k + 1]
            ins.chain = True
        last = made[-1]
        targets = b.ops[-1].targets
        opc = b.ops[-1].opcode
        if opc is Op.JUMP_ABSOLUTE:
            last.jump = first[targets[0]]
        elif opc in (Op.POP_JUMP_IF_FALSE, Op.POP_JUMP_IF_TRUE, Op.FOR_ITER):
            last.next = first[targets[0]]
            last.jump = first[targets[1]]
        elif targets:
            last.next = first[targets[0]]
    p = PreparedCode()
    p.code = code
    p.entry = instrs[0]
    p.instrs = instrs
    p.table = hs.table
    p.dispatch = strategy
    p.tagging = config.tagging
    template: list[Any] = [None] * code.num_registers
    for k, c in enumerate(code.consts):
        template[code.const_base + k] = _unbox_tagged(c) if config.tagging else c
    p.template = template
    p.hints = [None] * code.num_hint_slots
    return p


def _prepared(machine: Machine, code: RegCode) -> PreparedCode:
    p = machine.prepared.get(id(code))
    if p is None or p.code is not code:
        p = machine.prepared[id(code)] = resolve_dispatch(code, machine.config.dispatch,
                                                          machine.config)
    return p


def exec_reg(code: RegCode, args: list, globals: Dict, machine: Machine | None = None) -> Any:
    """Run register code with boxed ``args``; returns the boxed result."""
    if machine is None:
        machine = Machine()
    if len(args) != code.argcount:
        raise VMArityError(f"{code.name}() takes {code.argcount} arguments ({len(args)} given)")
    p = _prepared(machine, code)
    regs = p.template[:]
    if p.tagging:
        for k, v in enumerate(args):
            regs[k] = (v.v << 1) | 1 if v.__class__ is Int else v
    else:
        regs[:len(args)] = args
    fr = RegFrame()
    fr.machine = machine
    fr.globals = globals
    fr.hints = p.hints
    fr.counts = machine.counters.reg
    fr.hstats = machine.counters.hints
    fr.ret = None
    fr.code = code
    ins = p.entry
    if p.dispatch is Dispatch.DIRECT:
        while ins is not None:
            ins = ins.h(ins, regs, fr)
    else:
        table = p.table
        while ins is not None:
            ins = table[ins.opcode](ins, regs, fr)
    r = fr.ret
    return Int(r >> 1) if r.__class__ is int else r
