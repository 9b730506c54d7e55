from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

BINOPS = ("add", "sub", "mul", "and", "or", "xor")
COMMUTATIVE = ("add", "mul", "and", "or", "xor")
ICMP_CONDS = ("eq", "ne", "slt", "sgt")
TYPES = ("i32", "i1")

# a register name ("%x") or an integer literal
Operand = Union[str, int]


def is_reg(operand: Operand) -> bool:
    return isinstance(operand, str)


@dataclass(frozen=True)
class Instr:
    op: str  # a binop, "icmp", "select", "br" or "ret"
    dest: str | None = None
    ty: str | None = None
    args: tuple[Operand, ...] = ()
    cond: str | None = None
    targets: tuple[str, ...] = ()

    @property
    def is_terminator(self) -> bool:
        return self.op in ("br", "ret")

    def uses(self) -> list[str]:
        return [a for a in self.args if type(a) is str]

    def result_type(self) -> str | None:
        if self.dest is None:
            return None
        return "i1" if self.op == "icmp" else self.ty

    def with_args(self, args) -> Instr:
        return Instr(self.op, self.dest, self.ty, tuple(args), self.cond, self.targets)

    def render(self) -> str:
        a = self.args
        if self.op in BINOPS:
            return f"{self.dest} = {self.op} {self.ty} {a[0]}, {a[1]}"
        if self.op == "icmp":
            return f"{self.dest} = icmp {self.cond} {self.ty} {a[0]}, {a[1]}"
        if self.op == "select":
            return f"{self.dest} = select {self.ty} {a[0]}, {a[1]}, {a[2]}"
        if self.op == "ret":
            return f"ret {self.ty} {a[0]}"
        if self.op == "br" and a:
            return f"br {a[0]}, {self.targets[0]}, {self.targets[1]}"
        return f"br {self.targets[0]}"


@dataclass(frozen=True)
class Block:
    label: str
    instrs: tuple[Instr, ...]

    @property
    def terminator(self) -> Instr:
        return self.instrs[-1]

    @property
    def body(self) -> tuple[Instr, ...]:
        return self.instrs[:-1]

    @property
    def successors(self) -> tuple[str, ...]:
        if not self.instrs or self.instrs[-1].op != "br":
            return ()
        return self.instrs[-1].targets


@dataclass(frozen=True)
class Function:
    name: str
    params: tuple[str, ...]
    blocks: tuple[Block, ...]

    def block_map(self) -> dict[str, Block]:
        return {b.label: b for b in self.blocks}

    def predecessors(self) -> dict[str, list[str]]:
        preds: dict[str, list[str]] = {b.label: [] for b in self.blocks}
        for b in self.blocks:
            for s in dict.fromkeys(b.successors):
                if s in preds:
                    preds[s].append(b.label)
        return preds

    def rpo(self) -> list[Block]:
        """Blocks reachable from entry, in reverse postorder."""
        blocks = self.block_map()
        seen: set[str] = set()
        order: list[str] = []

        def visit(label):
            seen.add(label)
            for s in blocks[label].successors:
                if s not in seen and s in blocks:
                    visit(s)
            order.append(label)

        visit(self.blocks[0].label)
        return [blocks[l] for l in reversed(order)]

    def instruction_count(self) -> int:
        return sum(len(b.instrs) for b in self.blocks)

    def render(self) -> str:
        lines = [f"func {self.name}({', '.join(self.params)}) {{"]
        for b in self.blocks:
            lines.append(f"{b.label}:")
            lines.extend("  " + i.render() for i in b.instrs)
        lines.append("}")
        return "\n".join(lines)


@dataclass(frozen=True)
class IRModule:
    functions: tuple[Function, ...]
    # original text for parsed modules; empty for pass outputs
    source_text: str = field(default="", compare=False, repr=False)

    def instruction_count(self) -> int:
        return sum(f.instruction_count() for f in self.functions)

    def render(self) -> str:
        return "\n\n".join(f.render() for f in self.functions) + "\n"
