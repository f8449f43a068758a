"""Register-code optimizations: copy propagation, dead code elimination and
register renaming.

Almost every operation may run user code (operator overloads,
``__getattr__``, calls), so only register moves and unobservable
allocations are ever removed, and nothing is reordered or merged.
"""

from __future__ import annotations

from dataclasses import replace
from enum import Enum

from .isa import Block, Op, RegCode, RegOp


class SideEffect(Enum):
    PURE_MOVE = "pure_move"
    MAY_RUN_USER_CODE = "may_run_user_code"
    ALLOCATES = "allocates"
    MUTATES = "mutates"
    READS_GLOBAL = "reads_global"
    CONTROL = "control"


def side_effect_class(op: RegOp) -> SideEffect:
    opc = op.opcode
    if opc is Op.MOVE:
        return SideEffect.PURE_MOVE
    if opc in (Op.BUILD_LIST, Op.BUILD_MAP):
        return SideEffect.ALLOCATES
    if opc in (Op.LIST_APPEND, Op.STORE_GLOBAL):
        return SideEffect.MUTATES
    if opc is Op.LOAD_GLOBAL:
        return SideEffect.READS_GLOBAL
    if opc in (Op.JUMP_ABSOLUTE, Op.POP_JUMP_IF_FALSE, Op.POP_JUMP_IF_TRUE, Op.RETURN_VALUE):
        return SideEffect.CONTROL
    return SideEffect.MAY_RUN_USER_CODE


def is_deletable(op: RegOp) -> bool:
    """Ops whose removal is unobservable once their result is dead.

    BUILD_MAP with entries may raise on an unhashable key, so only the
    empty map counts as a pure allocation.
    """
    if op.opcode is Op.MOVE or op.opcode is Op.BUILD_LIST:
        return True
    return op.opcode is Op.BUILD_MAP and not op.srcs


def _copy(code: RegCode, blocks: list[Block]) -> RegCode:
    return replace(code, blocks=blocks)


def _succ_map(code: RegCode) -> dict[str, tuple[str, ...]]:
    return {b.label: b.succs for b in code.blocks}


def _rpo(code: RegCode) -> list[str]:
    from .translator import reverse_postorder

    succs = {b.label: list(b.succs) for b in code.blocks}
    return reverse_postorder(code.blocks[0].label, succs)


# ---------------------------------------------------------------------------
# copy propagation

def _with(op: RegOp, dst: int | None, srcs: tuple[int, ...]) -> RegOp:
    # dataclasses.replace is slow enough to dominate the passes
    return RegOp(op.opcode, dst, srcs, op.arg, op.hint_slot, op.targets)


def _kill_gen(op: RegOp, avail: dict[int, int]) -> None:
    """Update the available copies in place for one op (srcs already rewritten)."""
    d = op.dst
    if d is None:
        return
    if avail:
        avail.pop(d, None)
        if d in avail.values():
            for k in [k for k, v in avail.items() if v == d]:
                del avail[k]
    if op.opcode is Op.MOVE:
        s = op.srcs[0]
        if s != d:
            avail[d] = s


def _rewrite(op: RegOp, avail: dict[int, int]) -> RegOp:
    srcs = op.srcs
    if avail and srcs:
        new = tuple([avail.get(s, s) for s in srcs])
        if new != srcs:
            return _with(op, op.dst, new)
    return op


def copy_propagate(code: RegCode) -> RegCode:
    """Rewrite reads of copied registers to read the copy's source.

    Forward available-copies dataflow with intersection at merges; a copy
    ``rD = rS`` dies at any write to rD or rS. Returns ``code`` itself when
    nothing is rewritten.
    """
    order = _rpo(code)
    bmap = code.block_map()
    preds = code.preds()
    succs = _succ_map(code)
    entry = code.blocks[0].label
    out_state: dict[str, dict[int, int] | None] = {label: None for label in bmap}
    # rewritten ops from each block's latest visit; the last visit of a
    # block always sees its final entry state
    new_ops: dict[str, list[RegOp]] = {}
    pending = set(order)
    while pending:
        for label in order:
            if label not in pending:
                continue
            pending.discard(label)
            avail: dict[int, int] = {}
            if label != entry:
                incoming = [out_state[p] for p in preds[label] if out_state[p] is not None]
                if incoming:
                    avail = dict(incoming[0])
                    for other in incoming[1:]:
                        if avail:
                            avail = {k: v for k, v in avail.items() if other.get(k) == v}
            ops = []
            for op in bmap[label].ops:
                op = _rewrite(op, avail)
                _kill_gen(op, avail)
                ops.append(op)
            new_ops[label] = ops
            if out_state[label] != avail:
                out_state[label] = avail
                pending.update(succs[label])
    blocks = []
    rewritten = False
    for b in code.blocks:
        ops = new_ops.get(b.label, b.ops)
        if any(a is not o for a, o in zip(ops, b.ops)):
            rewritten = True
        blocks.append(Block(b.label, ops))
    return _copy(code, blocks) if rewritten else code


# ---------------------------------------------------------------------------
# liveness

def block_liveness(code: RegCode) -> tuple[dict[str, set[int]], dict[str, set[int]]]:
    """(live_in, live_out) register sets per block."""
    use: dict[str, set[int]] = {}
    defs: dict[str, set[int]] = {}
    for b in code.blocks:
        u: set[int] = set()
        d: set[int] = set()
        for op in b.ops:
            for s in op.srcs:
                if s not in d:
                    u.add(s)
            if op.dst is not None:
                d.add(op.dst)
        use[b.label] = u
        defs[b.label] = d
    live_in = {b.label: set() for b in code.blocks}
    live_out = {b.label: set() for b in code.blocks}
    order = list(reversed(_rpo(code)))
    succs = _succ_map(code)
    preds = code.preds()
    reachable = set(order)
    pending = set(order)
    while pending:
        for label in order:
            if label not in pending:
                continue
            pending.discard(label)
            out: set[int] = set()
            for s in succs[label]:
                out |= live_in[s]
            live_out[label] = out
            inn = use[label] | (out - defs[label])
            if inn != live_in[label]:
                live_in[label] = inn
                pending.update(p for p in preds[label] if p in reachable)
    return live_in, live_out


def live_after(code: RegCode) -> dict[str, list[set[int]]]:
    """Registers live immediately after each op, per block."""
    _, live_out = block_liveness(code)
    result: dict[str, list[set[int]]] = {}
    for b in code.blocks:
        live = set(live_out[b.label])
        after: list[set[int]] = [set()] * len(b.ops)
        for k in range(len(b.ops) - 1, -1, -1):
            op = b.ops[k]
            after[k] = set(live)
            if op.dst is not None:
                live.discard(op.dst)
            live.update(op.srcs)
        result[b.label] = after
    return result


# ---------------------------------------------------------------------------
# dead code elimination

def eliminate_dead_code(code: RegCode) -> RegCode:
    """Delete moves and allocations whose results are never read.

    A block whose fallthrough-carrying last op is removed hands its target
    to the new last op (or to an inserted jump), and blocks that are only a
    jump are threaded away.
    """
    after = live_after(code)
    blocks = []
    deleted = False
    for b in code.blocks:
        ops = []
        for op, live in zip(b.ops, after[b.label]):
            dead = op.dst is not None and op.dst not in live
            self_move = op.opcode is Op.MOVE and op.srcs[0] == op.dst
            if (self_move or dead) and is_deletable(op):
                deleted = True
                continue
            ops.append(op)
        if b.ops and (not ops or ops[-1] is not b.ops[-1]):
            targets = b.ops[-1].targets
            if targets:
                if ops and not ops[-1].targets and ops[-1].opcode not in (
                        Op.JUMP_ABSOLUTE, Op.POP_JUMP_IF_FALSE, Op.POP_JUMP_IF_TRUE,
                        Op.FOR_ITER, Op.RETURN_VALUE):
                    ops[-1] = replace(ops[-1], targets=targets)
                else:
                    ops.append(RegOp(Op.JUMP_ABSOLUTE, targets=targets))
        blocks.append(Block(b.label, ops))
    return _thread_jumps(_copy(code, blocks) if deleted else code)


def _thread_jumps(code: RegCode) -> RegCode:
    """Retarget edges that lead to a block holding nothing but a jump."""
    entry = code.blocks[0].label
    forward: dict[str, str] = {}
    for b in code.blocks:
        if b.label != entry and len(b.ops) == 1 and b.ops[0].opcode is Op.JUMP_ABSOLUTE:
            forward[b.label] = b.ops[0].targets[0]

    def resolve(label: str) -> str:
        seen = set()
        while label in forward and label not in seen:
            seen.add(label)
            label = forward[label]
        return label

    if not forward:
        return code
    blocks = []
    retargeted = False
    for b in code.blocks:
        ops = list(b.ops)
        last = ops[-1]
        new_targets = tuple(resolve(t) for t in last.targets)
        if new_targets != last.targets:
            ops[-1] = replace(last, targets=new_targets)
            retargeted = True
        blocks.append(Block(b.label, ops))
    reachable = set(_rpo(_copy(code, blocks)))
    if not retargeted and len(reachable) == len(blocks):
        return code
    blocks = [b for b in blocks if b.label in reachable]
    return _copy(code, blocks)


# ---------------------------------------------------------------------------
# register renaming

def _point_ranges(code: RegCode, include_locals: bool,
                  after: dict[str, list[set[int]]] | None = None) -> dict[int, set[int]]:
    # program points numbered consecutively across blocks
    if after is None:
        after = live_after(code)
    base = code.temp_base
    low = code.const_base if include_locals else 0
    ranges: dict[int, set[int]] = {}
    point = 0
    for b in code.blocks:
        for op, live in zip(b.ops, after[b.label]):
            for r in live:
                if r >= base or r < low:
                    if r in ranges:
                        ranges[r].add(point)
                    else:
                        ranges[r] = {point}
            d = op.dst
            if d is not None and (d >= base or d < low):
                ranges.setdefault(d, set()).add(point)
            for r in op.srcs:
                if r >= base or r < low:
                    ranges.setdefault(r, set())
            point += 1
    return ranges


def live_ranges(code: RegCode, include_locals: bool = False) -> dict[int, set[tuple[str, int]]]:
    """Program points (block, op index) where each temporary is live or defined.

    With ``include_locals`` local registers get ranges too (constants never
    do: they are never written and must keep their slots).
    """
    labels = [(b.label, k) for b in code.blocks for k in range(len(b.ops))]
    return {r: {labels[p] for p in pts}
            for r, pts in _point_ranges(code, include_locals).items()}


def _interferes(t: int, group: set[int], points: list, defs: dict[int, list[int]]) -> bool:
    """Whether temporary ``t`` can not share a register with ``group``.

    They conflict when one is written while the other holds a live value,
    unless the write copies from the other side (both then hold the same
    value). Live members of a group always hold equal values, so a copy
    from any member counts.
    """
    for p in defs.get(t, ()):
        op, live = points[p]
        if not group.isdisjoint(live) and not (op.opcode is Op.MOVE and op.srcs[0] in group):
            return True
    for g in group:
        for p in defs.get(g, ()):
            op, live = points[p]
            if t in live and not (op.opcode is Op.MOVE and op.srcs[0] == t):
                return True
    return False


def _coalesce_into_locals(code: RegCode, after: dict[str, list[set[int]]]) -> dict[int, int]:
    """Map temporaries onto the local they are copied into.

    For ``rL = rT`` with rL a local and rT a temporary that does not
    interfere with rL (or with temporaries already given rL), rT can live
    in rL's register; the move then becomes a self-move that dead code
    elimination drops.
    """
    base = code.temp_base
    nlocals = code.const_base
    points = [(op, live) for b in code.blocks for op, live in zip(b.ops, after[b.label])]
    defs: dict[int, list[int]] = {}
    for p, (op, _) in enumerate(points):
        if op.dst is not None:
            defs.setdefault(op.dst, []).append(p)
    mapping: dict[int, int] = {}
    groups: dict[int, set[int]] = {}
    for op, _ in points:
        if op.opcode is not Op.MOVE or op.dst >= nlocals:
            continue
        t = op.srcs[0]
        if t < base or t in mapping:
            continue
        group = groups.setdefault(op.dst, {op.dst})
        if not _interferes(t, group, points, defs):
            group.add(t)
            mapping[t] = op.dst
    return mapping


def rename_registers(code: RegCode) -> RegCode:
    """Pack temporaries into the fewest slots their live ranges allow.

    A temporary copied into a local it does not interfere with first takes
    that local's register. The rest are visited in
    number order and each takes the lowest slot (from ``temp_base`` up)
    whose occupants' ranges it does not overlap. Locals and constants keep
    their registers.
    """
    base = code.temp_base
    after = live_after(code)
    ranges = _point_ranges(code, False, after)
    mapping = _coalesce_into_locals(code, after)
    slots: list[set[int]] = []
    for r in sorted(ranges):
        if r < base or r in mapping:
            continue
        pts = ranges[r]
        for n, occupied in enumerate(slots):
            if occupied.isdisjoint(pts):
                occupied |= pts
                mapping[r] = base + n
                break
        else:
            slots.append(set(pts))
            mapping[r] = base + len(slots) - 1

    num_registers = base + len(slots)
    if num_registers == code.num_registers and all(k == v for k, v in mapping.items()):
        return code

    def m(r: int) -> int:
        return mapping.get(r, r)

    blocks = []
    for b in code.blocks:
        ops = []
        for op in b.ops:
            dst = None if op.dst is None else m(op.dst)
            ops.append(_with(op, dst, tuple([m(s) for s in op.srcs])))
        blocks.append(Block(b.label, ops))
    return replace(code, blocks=blocks, num_registers=num_registers)


# ---------------------------------------------------------------------------

class OptimizerError(RuntimeError):
    pass


# Each pass returns its input object when it changes nothing, so fixpoints
# are detected by identity. A copy-propagated result is itself a fixpoint of
# copy propagation, so a round whose DCE deletes nothing ends the loop.
def _cleanup(code: RegCode, bound: int) -> RegCode:
    for _ in range(bound):
        propagated = copy_propagate(code)
        nxt = eliminate_dead_code(propagated)
        if nxt is propagated:
            return nxt
        code = nxt
    raise OptimizerError(f"{code.name}: copy propagation / DCE did not converge")


def optimize(code: RegCode) -> RegCode:
    """Copy propagation and DCE to a fixpoint, then register renaming.

    Renaming can turn merge moves into self-moves, so the whole pipeline
    repeats until a round changes nothing; the result is therefore a fixed
    point and ``optimize`` is idempotent.
    """
    bound = max(code.op_count(), 1) + 2
    for _ in range(bound):
        cleaned = _cleanup(code, bound)
        nxt = rename_registers(cleaned)
        if nxt is cleaned:
            return nxt
        code = nxt
    raise OptimizerError(f"{code.name}: optimizer did not reach a fixed point")
