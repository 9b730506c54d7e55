"""Parser and verifier for the mini-IR text format (``.mir``).

Grammar, one item per line::

    func NAME(%p0, %p1) {
    label:
      %r = add|sub|mul|and|or|xor TY A, B
      %r = icmp eq|ne|slt|sgt TY A, B
      %r = select TY C, A, B
      br LABEL
      br C, LABEL, LABEL
      ret TY A
    }

TY is ``i32`` or ``i1``; operands are registers or integer literals.
Lines starting with ``;`` or ``#`` are comments.
"""
from __future__ import annotations

import re

from .ir import BINOPS, ICMP_CONDS, TYPES, Block, Function, Instr, IRModule, is_reg
from .semantics import wrap


class IRError(Exception):
    """Base class for diagnostics; ``str(err)`` is a one-line message."""


class IRSyntaxError(IRError):
    def __init__(self, line: int, col: int, message: str):
        self.line = line
        self.col = col
        super().__init__(f"line {line}, col {col}: {message}")


class VerifyError(IRError):
    pass


_TOKEN = re.compile(r"\s*(%[\w.]+|-?\d+|@?[A-Za-z_][\w.]*|[,(){}=:]|\S)")


def _lex(line: str) -> list[tuple[str, int]]:
    tokens = []
    pos = 0
    while pos < len(line):
        m = _TOKEN.match(line, pos)
        if m is None:  # only trailing whitespace left
            break
        tokens.append((m.group(1), m.start(1) + 1))
        pos = m.end()
    return tokens


class _LineParser:
    def __init__(self, tokens, lineno, line_len):
        self.tokens = tokens
        self.pos = 0
        self.lineno = lineno
        self.end_col = line_len + 1

    def error(self, message):
        col = self.tokens[self.pos][1] if self.pos < len(self.tokens) else self.end_col
        found = self.tokens[self.pos][0] if self.pos < len(self.tokens) else "end of line"
        raise IRSyntaxError(self.lineno, col, f"{message}, found '{found}'")

    def peek(self):
        return self.tokens[self.pos][0] if self.pos < len(self.tokens) else None

    def take(self):
        tok = self.peek()
        if tok is None:
            self.error("unexpected end of line")
        self.pos += 1
        return tok

    def expect(self, tok):
        if self.peek() != tok:
            self.error(f"expected '{tok}'")
        self.pos += 1

    def ident(self, what):
        tok = self.peek()
        if tok is None or not re.fullmatch(r"@?[A-Za-z_][\w.]*", tok):
            self.error(f"expected {what}")
        self.pos += 1
        return tok

    def reg(self):
        tok = self.peek()
        if tok is None or not tok.startswith("%"):
            self.error("expected register")
        self.pos += 1
        return tok

    def type(self):
        tok = self.peek()
        if tok not in TYPES:
            self.error("expected type i32 or i1")
        self.pos += 1
        return tok

    def operand(self, ty):
        tok = self.peek()
        if tok is not None and tok.startswith("%"):
            self.pos += 1
            return tok
        if tok is not None and re.fullmatch(r"-?\d+", tok):
            self.pos += 1
            return wrap(int(tok), ty)
        self.error("expected register or integer")

    def done(self):
        if self.peek() is not None:
            self.error("unexpected trailing input")


def _parse_instr(p: _LineParser) -> Instr:
    first = p.peek()
    if first == "br":
        p.take()
        nxt = p.peek()
        if nxt is not None and (nxt.startswith("%") or re.fullmatch(r"-?\d+", nxt)):
            c = p.operand("i1")
            p.expect(",")
            l1 = p.ident("label")
            p.expect(",")
            l2 = p.ident("label")
            p.done()
            return Instr("br", args=(c,), targets=(l1, l2))
        label = p.ident("label")
        p.done()
        return Instr("br", targets=(label,))
    if first == "ret":
        p.take()
        ty = p.type()
        a = p.operand(ty)
        p.done()
        return Instr("ret", ty=ty, args=(a,))
    dest = p.reg()
    p.expect("=")
    op = p.take()
    if op in BINOPS:
        ty = p.type()
        a = p.operand(ty)
        p.expect(",")
        b = p.operand(ty)
        p.done()
        return Instr(op, dest, ty, (a, b))
    if op == "icmp":
        cond = p.take()
        if cond not in ICMP_CONDS:
            p.pos -= 1
            p.error("expected icmp predicate eq, ne, slt or sgt")
        ty = p.type()
        a = p.operand(ty)
        p.expect(",")
        b = p.operand(ty)
        p.done()
        return Instr("icmp", dest, ty, (a, b), cond=cond)
    if op == "select":
        ty = p.type()
        c = p.operand("i1")
        p.expect(",")
        a = p.operand(ty)
        p.expect(",")
        b = p.operand(ty)
        p.done()
        return Instr("select", dest, ty, (c, a, b))
    p.pos -= 1
    p.error("unknown instruction")


def parse_functions(text: str) -> list[Function]:
    functions: list[Function] = []
    fn = None  # (name, params, blocks) while inside a function
    label = None
    instrs: list[Instr] = []

    def close_block():
        if label is not None:
            fn[2].append(Block(label, tuple(instrs)))

    lines = text.splitlines()
    for lineno, raw in enumerate(lines, 1):
        stripped = raw.strip()
        if not stripped or stripped.startswith((";", "#")):
            continue
        tokens = _lex(raw)
        p = _LineParser(tokens, lineno, len(raw))
        if fn is None:
            if p.peek() != "func":
                p.error("expected 'func'")
            p.take()
            name = p.ident("function name")
            p.expect("(")
            params = []
            if p.peek() != ")":
                params.append(p.reg())
                while p.peek() == ",":
                    p.take()
                    params.append(p.reg())
            p.expect(")")
            p.expect("{")
            p.done()
            fn = (name, tuple(params), [])
            label, instrs = None, []
        elif p.peek() == "}":
            p.take()
            p.done()
            close_block()
            functions.append(Function(fn[0], fn[1], tuple(fn[2])))
            fn, label, instrs = None, None, []
        elif len(tokens) == 2 and tokens[1][0] == ":":
            close_block()
            label = p.ident("block label")
            instrs = []
        else:
            if label is None:
                p.error("instruction outside a block")
            instrs.append(_parse_instr(p))
    if fn is not None:
        raise IRSyntaxError(len(lines) + 1, 1, f"missing '}}' at end of function {fn[0]}")
    return functions


def verify_function(fn: Function) -> None:
    if not fn.blocks:
        raise VerifyError(f"function {fn.name} has no blocks")
    blocks = {}
    for b in fn.blocks:
        if b.label in blocks:
            raise VerifyError(f"duplicate block label {b.label}")
        blocks[b.label] = b
    for b in fn.blocks:
        if not b.instrs or not b.instrs[-1].is_terminator:
            raise VerifyError(f"block {b.label} has no terminator")
        if any(i.is_terminator for i in b.body):
            raise VerifyError(f"terminator in the middle of block {b.label}")
        for t in b.successors:
            if t not in blocks:
                raise VerifyError(f"branch to undefined block {t}")

    preds = fn.predecessors()
    entry = fn.blocks[0].label
    # Kahn's algorithm: a topological order exists iff the CFG is acyclic
    indegree = {l: len(ps) for l, ps in preds.items()}
    ready = [l for l in blocks if indegree[l] == 0]
    topo = []
    while ready:
        l = ready.pop()
        topo.append(l)
        for s in dict.fromkeys(blocks[l].successors):
            indegree[s] -= 1
            if indegree[s] == 0:
                ready.append(s)
    if len(topo) != len(blocks):
        stuck = next(b.label for b in fn.blocks if indegree[b.label] > 0)
        raise VerifyError(f"cyclic control flow at block {stuck}")
    for b in fn.blocks[1:]:
        if not preds[b.label]:
            raise VerifyError(f"block {b.label} is unreachable")

    # dominators over the DAG in topological order
    dom: dict[str, frozenset] = {}
    for l in topo:
        if l == entry:
            dom[l] = frozenset([l])
        else:
            common = frozenset.intersection(*(dom[p] for p in preds[l]))
            dom[l] = common | {l}

    def_block: dict[str, str] = {}
    types: dict[str, str] = {}
    for p_ in fn.params:
        if p_ in types:
            raise VerifyError(f"register {p_} assigned twice")
        types[p_] = "i32"
    for b in fn.blocks:
        for i in b.instrs:
            if i.dest is not None:
                if i.dest in types:
                    raise VerifyError(f"register {i.dest} assigned twice")
                types[i.dest] = i.result_type()
                def_block[i.dest] = b.label

    for b in fn.blocks:
        defined_here: set[str] = set()
        for i in b.instrs:
            for r in i.uses():
                if r not in types:
                    raise VerifyError(f"use of undefined register {r}")
                if r in fn.params or r in defined_here:
                    continue
                db = def_block[r]
                if db == b.label or db not in dom[b.label]:
                    raise VerifyError(f"register {r} used before definition")
            _check_types(i, types)
            if i.dest is not None:
                defined_here.add(i.dest)


def _check_types(i: Instr, types: dict[str, str]) -> None:
    def want(operand, ty):
        if is_reg(operand) and types[operand] != ty:
            raise VerifyError(f"type mismatch: {operand} is {types[operand]}, expected {ty}")

    if i.op == "select":
        want(i.args[0], "i1")
        want(i.args[1], i.ty)
        want(i.args[2], i.ty)
    elif i.op == "br":
        if i.args:
            want(i.args[0], "i1")
    else:
        for a in i.args:
            want(a, i.ty)


def verify(module: IRModule) -> None:
    if not module.functions:
        raise VerifyError("empty module")
    names = set()
    for fn in module.functions:
        if fn.name in names:
            raise VerifyError(f"duplicate function {fn.name}")
        names.add(fn.name)
        verify_function(fn)


def parse_module(text: str) -> IRModule:
    """Parse and verify; raises IRSyntaxError or VerifyError."""
    module = IRModule(tuple(parse_functions(text)), source_text=text)
    verify(module)
    return module
