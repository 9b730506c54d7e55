"""Seeded generator of verifiable mini-IR programs.

Programs are seeded with the patterns the passes act on: constant
expressions, algebraic identities, repeated expressions, constant branch
conditions, dead values and straight-line block chains.
"""
from __future__ import annotations

import random
from dataclasses import dataclass

from .ir import BINOPS, ICMP_CONDS, Block, Function, Instr, IRModule
from .parser import parse_module


@dataclass
class CorpusConfig:
    size: int = 16  # target instructions per straight-line region
    branch_prob: float = 0.35
    max_depth: int = 2
    max_params: int = 3


class _Builder:
    def __init__(self, rng: random.Random, cfg: CorpusConfig):
        self.rng = rng
        self.cfg = cfg
        self.blocks: list[Block] = []
        self.next_reg = 0
        self.next_label = 0

    def reg(self):
        self.next_reg += 1
        return f"%v{self.next_reg}"

    def label(self, stem):
        self.next_label += 1
        return f"{stem}{self.next_label}"

    def operand(self, scope, ty="i32"):
        pool = [r for r, t in scope if t == ty]
        if ty == "i1":
            if not pool or self.rng.random() < 0.15:
                return self.rng.randint(0, 1)
            return self.rng.choice(pool)
        if not pool or self.rng.random() < 0.15:
            return self.rng.choice([0, 1, 2, 3, 5, 7, 10, -1, 42, 100])
        # favour recent values so chains form
        return pool[-1 - min(len(pool) - 1, int(self.rng.expovariate(0.6)))]

    def straight(self, scope, n, out):
        rng = self.rng
        for _ in range(n):
            kind = rng.random()
            dest = self.reg()
            if kind < 0.45:
                op = rng.choice(BINOPS)
                ins = Instr(op, dest, "i32", (self.operand(scope), self.operand(scope)))
            elif kind < 0.60:
                x = self.operand(scope)
                op, other = rng.choice([("add", 0), ("sub", 0), ("mul", 1), ("mul", 0),
                                        ("xor", x), ("and", x), ("or", x)])
                args = (x, other) if rng.random() < 0.7 or op == "sub" else (other, x)
                ins = Instr(op, dest, "i32", args)
            elif kind < 0.72:
                op = rng.choice(BINOPS)
                ins = Instr(op, dest, "i32", (rng.randint(-8, 20), rng.randint(-8, 20)))
            elif kind < 0.84:
                # repeat an earlier expression of this block, sometimes commuted
                earlier = [i for i in out if i.op in BINOPS]
                if not earlier:
                    op = rng.choice(BINOPS)
                    ins = Instr(op, dest, "i32", (self.operand(scope), self.operand(scope)))
                else:
                    src = rng.choice(earlier)
                    args = src.args[::-1] if rng.random() < 0.3 else src.args
                    ins = Instr(src.op, dest, "i32", args)
            elif kind < 0.92:
                ins = Instr("icmp", dest, "i32", (self.operand(scope), self.operand(scope)),
                            cond=rng.choice(ICMP_CONDS))
            else:
                ins = Instr("select", dest, "i32",
                            (self.operand(scope, "i1"), self.operand(scope), self.operand(scope)))
            out.append(ins)
            scope.append((dest, ins.result_type()))

    def region(self, label, scope, depth):
        """Emit blocks starting at ``label``; every path ends in ``ret``."""
        rng, cfg = self.rng, self.cfg
        out: list[Instr] = []
        n = max(1, int(rng.gauss(cfg.size / 2, cfg.size / 4)))
        self.straight(scope, n, out)
        roll = rng.random()
        if depth < cfg.max_depth and roll < cfg.branch_prob:
            if rng.random() < 0.3:
                c = self.reg()
                out.append(Instr("icmp", c, "i32", (rng.randint(0, 9), rng.randint(0, 9)),
                                 cond=rng.choice(ICMP_CONDS)))
            else:
                c = self.reg()
                out.append(Instr("icmp", c, "i32", (self.operand(scope), self.operand(scope)),
                                 cond=rng.choice(ICMP_CONDS)))
            scope.append((c, "i1"))
            then_l, else_l = self.label("then"), self.label("else")
            out.append(Instr("br", args=(c,), targets=(then_l, else_l)))
            self.blocks.append(Block(label, tuple(out)))
            if rng.random() < 0.5:
                # both arms return
                self.region(then_l, list(scope), depth + 1)
                self.region(else_l, list(scope), depth + 1)
            else:
                join_l = self.label("join")
                for arm in (then_l, else_l):
                    arm_out: list[Instr] = []
                    self.straight(list(scope), rng.randint(0, 3), arm_out)
                    arm_out.append(Instr("br", targets=(join_l,)))
                    self.blocks.append(Block(arm, tuple(arm_out)))
                self.region(join_l, scope, depth + 1)
        elif depth < cfg.max_depth and roll < cfg.branch_prob + 0.15:
            nxt = self.label("next")
            out.append(Instr("br", targets=(nxt,)))
            self.blocks.append(Block(label, tuple(out)))
            self.region(nxt, scope, depth + 1)
        else:
            ints = [r for r, t in scope if t == "i32"]
            result = ints[-1] if ints and rng.random() < 0.8 else self.operand(scope)
            out.append(Instr("ret", ty="i32", args=(result,)))
            self.blocks.append(Block(label, tuple(out)))


def random_module(rng: random.Random, cfg: CorpusConfig | None = None, name: str = "f") -> IRModule:
    cfg = cfg or CorpusConfig()
    b = _Builder(rng, cfg)
    params = tuple(f"%a{i}" for i in range(rng.randint(1, cfg.max_params)))
    b.region("entry", [(p, "i32") for p in params], 0)
    fn = Function(name, params, tuple(b.blocks))
    module = IRModule((fn,))
    # round trip through the parser so every program is known to verify
    return parse_module(module.render())


def generate_corpus(seed: int, count: int, cfg: CorpusConfig | None = None) -> list[tuple[str, str]]:
    """Return ``count`` (example_id, ir_text) pairs, reproducible from ``seed``."""
    rng = random.Random(seed)
    width = len(str(max(count - 1, 0)))
    corpus = []
    for k in range(count):
        module = random_module(random.Random(rng.getrandbits(64)), cfg)
        corpus.append((f"p{seed}_{k:0{width}d}", module.source_text))
    return corpus
