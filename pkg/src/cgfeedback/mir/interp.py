from __future__ import annotations

from .ir import BINOPS, IRModule, is_reg
from .semantics import eval_binop, eval_icmp, wrap


class Trap(Exception):
    pass


def interpret(module: IRModule, args, fuel: int = 100_000) -> int:
    """Run the first function of ``module`` on ``args`` and return its result."""
    if fuel <= 0:
        raise ValueError("fuel must be positive")
    fn = module.functions[0]
    if len(args) != len(fn.params):
        raise ValueError(f"{fn.name} takes {len(fn.params)} arguments, got {len(args)}")
    env = {p: wrap(a, "i32") for p, a in zip(fn.params, args)}
    blocks = fn.block_map()

    def val(operand):
        return env[operand] if is_reg(operand) else operand

    block = fn.blocks[0]
    while True:
        for ins in block.instrs:
            fuel -= 1
            if fuel < 0:
                raise Trap("fuel exhausted")
            op = ins.op
            if op in BINOPS:
                env[ins.dest] = eval_binop(op, ins.ty, val(ins.args[0]), val(ins.args[1]))
            elif op == "icmp":
                env[ins.dest] = eval_icmp(ins.cond, ins.ty, val(ins.args[0]), val(ins.args[1]))
            elif op == "select":
                c, a, b = (val(x) for x in ins.args)
                env[ins.dest] = a if c else b
            elif op == "ret":
                return val(ins.args[0])
            elif op == "br":
                if ins.args:
                    target = ins.targets[0] if val(ins.args[0]) else ins.targets[1]
                else:
                    target = ins.targets[0]
                block = blocks[target]
                break
