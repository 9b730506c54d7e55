"""Value semantics shared by the interpreter and the folding passes."""
from __future__ import annotations


def wrap(value: int, ty: str) -> int:
    if ty == "i1":
        return value & 1
    return ((value + 2**31) % 2**32) - 2**31


def _signed(value: int, ty: str) -> int:
    # i1 true is -1 when read as signed, as in LLVM
    return -value if ty == "i1" else value


def eval_binop(op: str, ty: str, a: int, b: int) -> int:
    if op == "add":
        r = a + b
    elif op == "sub":
        r = a - b
    elif op == "mul":
        r = a * b
    elif op == "and":
        r = a & b
    elif op == "or":
        r = a | b
    elif op == "xor":
        r = a ^ b
    else:
        raise ValueError(f"unknown binary op {op}")
    return wrap(r, ty)


def eval_icmp(cond: str, ty: str, a: int, b: int) -> int:
    if cond == "eq":
        return int(a == b)
    if cond == "ne":
        return int(a != b)
    sa, sb = _signed(a, ty), _signed(b, ty)
    if cond == "slt":
        return int(sa < sb)
    if cond == "sgt":
        return int(sa > sb)
    raise ValueError(f"unknown icmp predicate {cond}")
