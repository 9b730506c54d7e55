"""The pass catalog and the fixed size-reduction pipeline.

constfold, peephole and cse only rewrite uses; the instructions they make
redundant stay in place until dce removes them, so the order in which passes
run changes the final instruction count.
"""
from __future__ import annotations

from dataclasses import replace

from .ir import BINOPS, COMMUTATIVE, Block, Function, Instr, IRModule
from .parser import verify
from .semantics import eval_binop, eval_icmp

PASS_NAMES = ("constfold", "peephole", "cse", "simplifycfg", "dce")
REFERENCE_PIPELINE = ("constfold", "peephole", "cse", "dce", "simplifycfg", "dce")
MAX_PIPELINE_LENGTH = 16


class UnknownPassError(ValueError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown pass '{name}'")


def _resolve(operand, mapping):
    # mapping keys are register names, so literals never match
    while operand in mapping:
        operand = mapping[operand]
    return operand


def _rewrite_uses(fn: Function, mapping: dict) -> Function:
    if not mapping:
        return fn
    blocks = []
    for b in fn.blocks:
        if not any(a in mapping for i in b.instrs for a in i.args):
            blocks.append(b)
            continue
        instrs = tuple(
            i.with_args(_resolve(a, mapping) for a in i.args)
            if any(a in mapping for a in i.args) else i
            for i in b.instrs
        )
        blocks.append(Block(b.label, instrs))
    return replace(fn, blocks=tuple(blocks))


def _fold(ins: Instr, args):
    if not all(isinstance(a, int) for a in args):
        return None
    if ins.op in BINOPS:
        return eval_binop(ins.op, ins.ty, *args)
    if ins.op == "icmp":
        return eval_icmp(ins.cond, ins.ty, *args)
    if ins.op == "select":
        return args[1] if args[0] else args[2]
    return None


def constfold(fn: Function) -> Function:
    consts: dict[str, int] = {}
    for b in fn.rpo():
        for ins in b.body:
            value = _fold(ins, [_resolve(a, consts) for a in ins.args])
            if value is not None:
                consts[ins.dest] = value
    return _rewrite_uses(fn, consts)


def _identity(ins: Instr, args):
    op = ins.op
    if op == "select":
        c, a, b = args
        if isinstance(c, int):
            return a if c else b
        return None
    if op not in BINOPS:
        return None
    a, b = args
    if op == "add":
        if a == 0:
            return b
        if b == 0:
            return a
    elif op == "sub":
        if b == 0:
            return a
    elif op == "mul":
        if a == 0 or b == 0:
            return 0
        if a == 1:
            return b
        if b == 1:
            return a
    elif op == "xor":
        if a == b:
            return 0
    elif op in ("and", "or"):
        if a == b:
            return a
    return None


def peephole(fn: Function) -> Function:
    repl: dict[str, object] = {}
    for b in fn.rpo():
        for ins in b.body:
            simplified = _identity(ins, [_resolve(a, repl) for a in ins.args])
            if simplified is not None:
                repl[ins.dest] = simplified
    return _rewrite_uses(fn, repl)


def _expr_key(ins: Instr, args):
    if ins.op in COMMUTATIVE or (ins.op == "icmp" and ins.cond in ("eq", "ne")):
        args = sorted(args, key=lambda a: (isinstance(a, int), str(a)))
    return (ins.op, ins.cond, ins.ty, tuple(args))


def cse(fn: Function) -> Function:
    repl: dict[str, str] = {}
    for b in fn.rpo():
        seen: dict[tuple, str] = {}
        for ins in b.body:
            key = _expr_key(ins, [_resolve(a, repl) for a in ins.args])
            if key in seen:
                repl[ins.dest] = seen[key]
            else:
                seen[key] = ins.dest
    return _rewrite_uses(fn, repl)


def dce(fn: Function) -> Function:
    blocks = list(fn.blocks)
    while True:
        used = {r for b in blocks for i in b.instrs for r in i.uses()}
        changed = False
        new_blocks = []
        for b in blocks:
            kept = tuple(i for i in b.instrs if i.is_terminator or i.dest in used)
            changed |= len(kept) != len(b.instrs)
            new_blocks.append(Block(b.label, kept))
        blocks = new_blocks
        if not changed:
            return replace(fn, blocks=tuple(blocks))


def _fold_branches(blocks: list[Block]) -> bool:
    changed = False
    for idx, b in enumerate(blocks):
        t = b.terminator
        if t.op != "br" or not t.args:
            continue
        c = t.args[0]
        if isinstance(c, int):
            target = t.targets[0] if c else t.targets[1]
        elif t.targets[0] == t.targets[1]:
            target = t.targets[0]
        else:
            continue
        blocks[idx] = Block(b.label, b.body + (Instr("br", targets=(target,)),))
        changed = True
    return changed


def simplifycfg(fn: Function) -> Function:
    blocks = list(fn.blocks)
    while True:
        changed = _fold_branches(blocks)

        reachable = {b.label for b in replace(fn, blocks=tuple(blocks)).rpo()}
        if len(reachable) != len(blocks):
            blocks = [b for b in blocks if b.label in reachable]
            changed = True

        current = replace(fn, blocks=tuple(blocks))
        preds = current.predecessors()
        entry = blocks[0].label
        by_label = current.block_map()
        for a in blocks:
            t = a.terminator
            if t.op == "br" and not t.args:
                succ = t.targets[0]
                if succ != entry and preds[succ] == [a.label]:
                    merged = Block(a.label, a.body + by_label[succ].instrs)
                    blocks = [merged if b.label == a.label else b
                              for b in blocks if b.label != succ]
                    changed = True
                    break
        if not changed:
            return replace(fn, blocks=tuple(blocks))


_PASSES = {
    "constfold": constfold,
    "peephole": peephole,
    "cse": cse,
    "simplifycfg": simplifycfg,
    "dce": dce,
}


def apply_pass(module: IRModule, name: str, check: bool = True) -> IRModule:
    try:
        transform = _PASSES[name]
    except KeyError:
        raise UnknownPassError(name) from None
    result = IRModule(tuple(transform(fn) for fn in module.functions))
    if check:
        verify(result)
    return result


def apply_pipeline(module: IRModule, passes) -> IRModule:
    passes = list(passes)
    for name in passes:
        if name not in _PASSES:
            raise UnknownPassError(name)
    for name in passes:
        module = apply_pass(module, name, check=False)
    verify(module)
    return module


def reference_oz(module: IRModule) -> IRModule:
    return apply_pipeline(module, REFERENCE_PIPELINE)
