"""Stack code to register code by abstract interpretation.

Each basic block is simulated against a virtual stack of register names.
Loads of locals and constants push their aliased registers and emit
nothing; every value-producing op gets a fresh temporary. Where control
flow merges, the first predecessor to reach a block fixes its entry
register names and later predecessors emit renaming MOVEs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import TranslationError
from .isa import (
    BINARY_OPS,
    HAS_DYNAMIC_STACK_EFFECT,
    UNARY_OPS,
    Block,
    Op,
    RegCode,
    RegOp,
    StackCode,
    StackOp,
)

_BRANCHES = frozenset({Op.JUMP_ABSOLUTE, Op.POP_JUMP_IF_FALSE, Op.POP_JUMP_IF_TRUE, Op.FOR_ITER,
                       Op.SETUP_FINALLY})
_ENDS_BLOCK = _BRANCHES | {Op.RETURN_VALUE, Op.END_FINALLY}
_NO_FALLTHROUGH = frozenset({Op.JUMP_ABSOLUTE, Op.RETURN_VALUE, Op.END_FINALLY})


@dataclass(frozen=True)
class Untranslatable:
    reason: str = "dynamic stack effect"

    def __str__(self) -> str:
        return f"<untranslatable: {self.reason}>"


@dataclass
class StackBlock:
    label: str
    start: int
    ops: list[StackOp]
    succs: list[str] = field(default_factory=list)


@dataclass
class StackCFG:
    blocks: list[StackBlock]

    def block_map(self) -> dict[str, StackBlock]:
        return {b.label: b for b in self.blocks}

    def edges(self) -> list[tuple[str, str]]:
        return [(b.label, s) for b in self.blocks for s in b.succs]

    def preds(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {b.label: [] for b in self.blocks}
        for b in self.blocks:
            for s in b.succs:
                if b.label not in out[s]:
                    out[s].append(b.label)
        return out


def block_label(offset: int) -> str:
    return f"bb_{offset}"


def split_blocks(code: StackCode) -> StackCFG:
    """Partition ``code`` into basic blocks named by leader offset.

    Leaders are offset 0, every jump target, and every op following a
    branch, jump or return.
    """
    ops = code.ops
    if not ops:
        raise TranslationError(f"{code.name}: empty code")
    offsets = code.index_of_offset()
    leaders = {0}
    for i, op in enumerate(ops):
        if op.opcode in _BRANCHES:
            if op.arg not in offsets:
                raise TranslationError(f"{code.name}: jump to invalid offset {op.arg}")
            leaders.add(offsets[op.arg])
        if op.opcode in _ENDS_BLOCK and i + 1 < len(ops):
            leaders.add(i + 1)
    starts = sorted(leaders)
    blocks = []
    for n, s in enumerate(starts):
        end = starts[n + 1] if n + 1 < len(starts) else len(ops)
        blocks.append(StackBlock(block_label(ops[s].offset), s, list(ops[s:end])))
    for n, b in enumerate(blocks):
        last = b.ops[-1]
        if last.opcode not in _NO_FALLTHROUGH:
            if n + 1 >= len(blocks):
                raise TranslationError(f"{code.name}: control falls off the end of the code")
            b.succs.append(blocks[n + 1].label)
        if last.opcode in _BRANCHES:
            t = block_label(last.arg)
            if t not in b.succs:
                b.succs.append(t)
    return StackCFG(blocks)


def reverse_postorder(entry: str, succs: dict[str, list[str]]) -> list[str]:
    """RPO from ``entry``; successors are explored last-first so fallthrough
    blocks come before jump targets in the resulting order."""
    seen = {entry}
    order: list[str] = []
    stack = [(entry, reversed(succs[entry]))]
    while stack:
        node, it = stack[-1]
        for s in it:
            if s not in seen:
                seen.add(s)
                stack.append((s, reversed(succs[s])))
                break
        else:
            stack.pop()
            order.append(node)
    order.reverse()
    return order


class RegisterAllocator:
    """Hands out fresh temporaries numbered after the constant window."""

    def __init__(self, first: int) -> None:
        self.next = first

    def __call__(self) -> int:
        r = self.next
        self.next += 1
        return r


def simulate_op(op: StackOp, vs: list[int], fresh: RegisterAllocator, *,
                num_locals: int = 0, hint_slots: list[int] | None = None) -> tuple[list[RegOp], list[int]]:
    """Abstract effect of one non-branching stack op on the virtual stack.

    ``vs`` lists register names bottom to top; a new list is returned.
    Branches are handled by :func:`translate` since they shape the CFG.
    """
    out: list[RegOp] = []
    vs = list(vs)
    opc = op.opcode
    a = op.arg

    def pop() -> int:
        if not vs:
            raise TranslationError(f"offset {op.offset}: virtual stack underflow at {opc.name}")
        return vs.pop()

    def pop_n(n: int) -> list[int]:
        if len(vs) < n:
            raise TranslationError(f"offset {op.offset}: virtual stack underflow at {opc.name}")
        items = vs[len(vs) - n:]
        del vs[len(vs) - n:]
        return items

    def value(srcs: tuple[int, ...], arg: int | None = None, hint: int | None = None) -> None:
        t = fresh()
        out.append(RegOp(opc, t, srcs, arg, hint))
        vs.append(t)

    if opc is Op.LOAD_FAST:
        vs.append(a)
    elif opc is Op.LOAD_CONST:
        vs.append(num_locals + a)
    elif opc is Op.STORE_FAST:
        src = pop()
        if src != a:
            if a in vs:
                # the stack still refers to the old value of this local
                t = fresh()
                out.append(RegOp(Op.MOVE, t, (a,)))
                vs = [t if r == a else r for r in vs]
            out.append(RegOp(Op.MOVE, a, (src,)))
    elif opc is Op.LOAD_GLOBAL:
        value((), a)
    elif opc is Op.STORE_GLOBAL:
        out.append(RegOp(opc, None, (pop(),), a))
    elif opc in BINARY_OPS or opc is Op.BINARY_SUBSCR:
        r, l = pop(), pop()
        value((l, r))
    elif opc is Op.COMPARE_OP:
        r, l = pop(), pop()
        value((l, r), a)
    elif opc in UNARY_OPS or opc is Op.GET_ITER:
        value((pop(),))
    elif opc is Op.STORE_SUBSCR:
        k, c, v = pop(), pop(), pop()
        out.append(RegOp(opc, None, (c, k, v)))
    elif opc is Op.BUILD_LIST:
        value(tuple(pop_n(a)), a)
    elif opc is Op.BUILD_MAP:
        value(tuple(pop_n(2 * a)), a)
    elif opc is Op.LIST_APPEND:
        v = pop()
        if len(vs) < a:
            raise TranslationError(f"offset {op.offset}: virtual stack underflow at LIST_APPEND")
        out.append(RegOp(opc, None, (vs[-a], v)))
    elif opc is Op.CALL_FUNCTION:
        args = pop_n(a)
        callee = pop()
        value((*args, callee), a)
    elif opc is Op.LOAD_ATTR:
        slot = 0
        if hint_slots is not None:
            slot = hint_slots[0]
            hint_slots[0] += 1
        value((pop(),), a, slot)
    elif opc is Op.STORE_ATTR:
        o = pop()
        v = pop()
        out.append(RegOp(opc, None, (o, v), a))
    elif opc is Op.RETURN_VALUE:
        out.append(RegOp(opc, None, (pop(),)))
    elif opc is Op.POP_TOP:
        pop()
    elif opc is Op.DUP_TOP:
        if not vs:
            raise TranslationError(f"offset {op.offset}: virtual stack underflow at DUP_TOP")
        vs.append(vs[-1])
    else:
        raise TranslationError(f"offset {op.offset}: cannot simulate {opc.name}")
    return out, vs


def parallel_moves(pairs: list[tuple[int, int]], fresh: RegisterAllocator) -> list[RegOp]:
    """Sequentialize simultaneous ``dst = src`` copies, breaking cycles with a temp."""
    pending = {d: s for d, s in pairs if d != s}
    out: list[RegOp] = []
    while pending:
        read = set(pending.values())
        ready = [d for d in pending if d not in read]
        if ready:
            for d in sorted(ready):
                out.append(RegOp(Op.MOVE, d, (pending.pop(d),)))
            continue
        d = min(pending)
        t = fresh()
        out.append(RegOp(Op.MOVE, t, (d,)))
        for k, s in pending.items():
            if s == d:
                pending[k] = t
    return out


class _Translation:
    def __init__(self, code: StackCode) -> None:
        self.code = code
        self.nl = code.num_locals
        self.temp_base = self.nl + len(code.consts)
        self.fresh = RegisterAllocator(self.temp_base)
        self.hint_slots = [0]
        self.cfg = split_blocks(code)
        self.sblocks = self.cfg.block_map()
        self.spreds = self.cfg.preds()
        self.entry: dict[str, list[int]] = {}
        self.out: dict[str, list[RegOp]] = {}
        self.edge_blocks: dict[str, list[tuple[str, list[RegOp]]]] = {}

    def is_pinned(self, r: int) -> bool:
        return r < self.temp_base

    def flow(self, src: str, dst: str, stack: list[int]) -> list[RegOp]:
        """Register moves needed on edge src->dst for ``stack`` to match dst's entry."""
        fixed = self.entry.get(dst)
        if fixed is None:
            if len(self.spreds[dst]) > 1:
                # merge blocks get private, distinct entry registers so later
                # predecessors never have to write a local or constant
                seen: set[int] = set()
                names = []
                for r in stack:
                    if self.is_pinned(r) or r in seen:
                        r = self.fresh()
                    seen.add(r)
                    names.append(r)
                fixed = names
            else:
                fixed = list(stack)
            self.entry[dst] = fixed
        if len(fixed) != len(stack):
            raise TranslationError(
                f"{self.code.name}: stack depth mismatch entering {dst} from {src} "
                f"({len(stack)} vs {len(fixed)})"
            )
        return parallel_moves(list(zip(fixed, stack)), self.fresh)

    def run(self) -> RegCode:
        succs = {b.label: b.succs for b in self.cfg.blocks}
        entry_label = self.cfg.blocks[0].label
        order = reverse_postorder(entry_label, succs)
        self.entry[entry_label] = []
        for label in order:
            self.block(self.sblocks[label])
        blocks: list[Block] = []
        for sb in self.cfg.blocks:
            if sb.label in self.out:
                blocks.append(Block(sb.label, self.out[sb.label]))
                for name, ops in self.edge_blocks.get(sb.label, []):
                    blocks.append(Block(name, ops))
        code = self.code
        return RegCode(
            name=code.name,
            argcount=code.argcount,
            varnames=code.varnames,
            consts=code.consts,
            names=code.names,
            num_registers=self.fresh.next,
            blocks=blocks,
            num_hint_slots=self.hint_slots[0],
            defaults=code.defaults,
        )

    def block(self, sb: StackBlock) -> None:
        vs = self.entry[sb.label]
        ops: list[RegOp] = []
        for op in sb.ops[:-1]:
            emitted, vs = simulate_op(op, vs, self.fresh, num_locals=self.nl,
                                      hint_slots=self.hint_slots)
            ops.extend(emitted)
        last = sb.ops[-1]
        opc = last.opcode
        label = sb.label
        if opc is Op.JUMP_ABSOLUTE:
            t = block_label(last.arg)
            ops.extend(self.flow(label, t, vs))
            ops.append(RegOp(opc, targets=(t,)))
        elif opc is Op.POP_JUMP_IF_FALSE or opc is Op.POP_JUMP_IF_TRUE:
            if not vs:
                raise TranslationError(f"offset {last.offset}: virtual stack underflow at {opc.name}")
            cond = vs[-1]
            vs = vs[:-1]
            fall, taken = sb.succs[0], block_label(last.arg)
            ops.append(RegOp(opc, None, (cond,), targets=(
                self.edge(label, fall, vs), self.edge(label, taken, vs))))
        elif opc is Op.FOR_ITER:
            if not vs:
                raise TranslationError(f"offset {last.offset}: virtual stack underflow at FOR_ITER")
            it = vs[-1]
            t = self.fresh()
            body, exit_ = sb.succs[0], block_label(last.arg)
            ops.append(RegOp(opc, t, (it,), targets=(
                self.edge(label, body, vs + [t]), self.edge(label, exit_, vs[:-1]))))
        elif opc is Op.RETURN_VALUE:
            emitted, vs = simulate_op(last, vs, self.fresh, num_locals=self.nl)
            ops.extend(emitted)
        else:
            # plain op followed by a leader: an implicit fallthrough edge
            emitted, vs = simulate_op(last, vs, self.fresh, num_locals=self.nl,
                                      hint_slots=self.hint_slots)
            ops.extend(emitted)
            t = sb.succs[0]
            moves = self.flow(label, t, vs)
            ops.extend(moves)
            if ops:
                ops[-1] = _with_targets(ops[-1], (t,))
            else:
                ops.append(RegOp(Op.JUMP_ABSOLUTE, targets=(t,)))
        self.out[label] = ops

    def edge(self, src: str, dst: str, stack: list[int]) -> str:
        """Target label for one arm of a two-way branch, splitting the edge if renames are needed."""
        moves = self.flow(src, dst, stack)
        if not moves:
            return dst
        name = f"{src}_{dst[3:]}"
        moves.append(RegOp(Op.JUMP_ABSOLUTE, targets=(dst,)))
        self.edge_blocks.setdefault(src, []).append((name, moves))
        return name


def _with_targets(op: RegOp, targets: tuple[str, ...]) -> RegOp:
    return RegOp(op.opcode, op.dst, op.srcs, op.arg, op.hint_slot, targets)


def translate(code: StackCode) -> RegCode | Untranslatable:
    """Convert stack code to register code, or report it untranslatable."""
    if HAS_DYNAMIC_STACK_EFFECT in code.flags or any(
        op.opcode is Op.END_FINALLY for op in code.ops
    ):
        return Untranslatable()
    return _Translation(code).run()
