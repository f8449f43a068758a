"""Parse register listings and compare them up to consistent renumbering."""

from __future__ import annotations

import re

_LABEL = re.compile(r"^\s*(bb_\d+):\s*$")
_MOVE = re.compile(r"^\s*(r\d+)\s*=\s*(r\d+)\s*$")
_OP = re.compile(
    r"^\s*(?:(r\d+)\s*=\s*)?([A-Z_]+)\s*(?:\[[^\]]*\])?\s*(?:\(([^)]*)\))?"
    r"\s*(?:\(([^)]*)\))?\s*(?:->\s*(.*))?$"
)


def parse(listing: str) -> list[tuple]:
    """One tuple per line: ('label', name) or ('op', dst, opcode, srcs, targets).

    Bracketed args (``[<]``, ``[1]``) and name operands are dropped; only
    registers and labels take part in the comparison.
    """
    items: list[tuple] = []
    for line in listing.splitlines():
        if not line.strip() or line.rstrip().endswith(":") and not _LABEL.match(line):
            continue
        m = _LABEL.match(line)
        if m:
            items.append(("label", m.group(1)))
            continue
        m = _MOVE.match(line)
        if m:
            items.append(("op", m.group(1), "MOVE", (m.group(2),), ()))
            continue
        m = _OP.match(line)
        if not m:
            raise ValueError(f"unparsable line: {line!r}")
        dst, opcode, a, b, targets = m.groups()
        operands = ",".join(x for x in (a, b) if x)
        srcs = tuple(re.findall(r"r\d+", operands))
        tgts = tuple(t.strip() for t in targets.split(",") if t.strip()) if targets else ()
        items.append(("op", dst, opcode, srcs, tgts))
    return items


def normalize(items: list[tuple]) -> list[tuple]:
    """Renumber registers and labels by order of first appearance."""
    regs: dict[str, str] = {}
    labels: dict[str, str] = {}

    def reg(r: str | None) -> str | None:
        if r is None:
            return None
        return regs.setdefault(r, f"r{len(regs)}")

    def lab(b: str) -> str:
        return labels.setdefault(b, f"L{len(labels)}")

    out = []
    for it in items:
        if it[0] == "label":
            out.append(("label", lab(it[1])))
        else:
            _, dst, opcode, srcs, tgts = it
            # sources are read before the destination is written
            s = tuple(reg(x) for x in srcs)
            out.append(("op", reg(dst), opcode, s, tuple(lab(t) for t in tgts)))
    return out


def alpha_equivalent(a: str, b: str) -> bool:
    return normalize(parse(a)) == normalize(parse(b))


def op_count(listing: str) -> int:
    return sum(1 for it in parse(listing) if it[0] == "op")
