"""Text-level IR utilities: tokenizing, instruction counting and BLEU.

Nothing here needs the text to parse as IR, so these functions also work on
model output that is malformed or on LLVM IR printed by an external tool.
"""
from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass

_TOKEN_RE = re.compile(r"[%@][\w.$-]+|[,(){}=:%]|[^\s,(){}=:%]+")

_LABEL_RE = re.compile(r"^[\w.$-]+:$")
_TOPLEVEL_PREFIXES = (
    "func ", "define ", "declare ", "attributes ", "source_filename",
    "target ", "!", "@", "}",
)


def _is_comment(line: str) -> bool:
    return line.startswith(";") or line.startswith("#")


def tokenize(ir_text: str) -> list[str]:
    tokens: list[str] = []
    for line in ir_text.splitlines():
        stripped = line.strip()
        if not stripped or _is_comment(stripped):
            continue
        tokens.extend(_TOKEN_RE.findall(stripped))
    return tokens


def count_instructions_text(ir_text: str) -> int:
    """Count instruction lines in IR text without parsing it."""
    count = 0
    for line in ir_text.splitlines():
        line = line.strip()
        if not line or _is_comment(line):
            continue
        # trailing "; preds = ..." style comments
        line = line.split(";", 1)[0].rstrip()
        if not line or _LABEL_RE.match(line):
            continue
        if line.startswith(_TOPLEVEL_PREFIXES) or line.endswith("{"):
            continue
        if re.match(r"^%[\w.$-]+ = type\b", line):
            continue
        count += 1
    return count


@dataclass(frozen=True)
class BleuScore:
    score: float
    precisions: tuple[float, ...]
    brevity_penalty: float


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate, reference, max_order: int = 4) -> BleuScore:
    """Unsmoothed single-reference BLEU between two token sequences.

    The order shrinks to the candidate length for very short candidates, and
    any vanishing precision gives a score of exactly zero.
    """
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    candidate = list(candidate)
    reference = list(reference)
    if not candidate:
        score = 1.0 if not reference else 0.0
        return BleuScore(score, (), 1.0)

    order = min(max_order, len(candidate))
    precisions = []
    for n in range(1, order + 1):
        cand_counts = _ngrams(candidate, n)
        ref_counts = _ngrams(reference, n)
        clipped = sum(min(c, ref_counts[g]) for g, c in cand_counts.items())
        precisions.append(clipped / sum(cand_counts.values()))

    c, r = len(candidate), len(reference)
    bp = 1.0 if c >= r else math.exp(1.0 - r / c)
    if min(precisions) == 0.0:
        score = 0.0
    else:
        score = bp * math.exp(math.fsum(math.log(p) for p in precisions) / order)
    # guard against 1.0000000000000002 from exp(log(1))
    return BleuScore(min(score, 1.0), tuple(precisions), bp)


def ir_bleu(candidate_ir: str, reference_ir: str, max_order: int = 4) -> BleuScore:
    return bleu(tokenize(candidate_ir), tokenize(reference_ir), max_order)
