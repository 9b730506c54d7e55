"""Compiler-derived feedback on a model generation, and the prompts that carry it."""
from __future__ import annotations

import re
from dataclasses import dataclass

from .backend import source_count
from .irtext import count_instructions_text, ir_bleu
from .model import Generation

PROMPT_VERSION = 1

OPTIMIZE_TEMPLATE = (
    "Optimize the following IR to minimize its instruction count. Give the pass list, "
    "the instruction counts before and after optimization, and the optimized IR.\n"
    "<code>\n{ir}\n</code>\n"
)

GENERATION_MARKER = "--- generation ---"
FEEDBACK_MARKER = "--- feedback ---"
TRY_AGAIN_MARKER = "--- try again ---"

FORMATS = ("fast", "short", "long")


def optimize_prompt(src_ir: str) -> str:
    return OPTIMIZE_TEMPLATE.format(ir=src_ir.strip("\n"))


def extract_source_ir(prompt: str) -> str | None:
    m = re.search(r"<code>\n(.*?)\n</code>", prompt, re.DOTALL)
    return m.group(1) + "\n" if m else None


def build_feedback_prompt(original_prompt: str, generation_text: str, feedback_text: str) -> str:
    parts = [original_prompt.rstrip("\n"), GENERATION_MARKER, generation_text.rstrip("\n"),
             FEEDBACK_MARKER, feedback_text.rstrip("\n"), TRY_AGAIN_MARKER]
    return "\n".join(parts) + "\n"


def split_feedback_prompt(prompt: str) -> tuple[str, str, str] | None:
    """Inverse of build_feedback_prompt: (original, generation, feedback)."""
    m = re.match(
        rf"(.*)\n{GENERATION_MARKER}\n(.*)\n{FEEDBACK_MARKER}\n(.*)\n{TRY_AGAIN_MARKER}\n$",
        prompt, re.DOTALL)
    if m is None:
        return None
    return m.group(1), m.group(2), m.group(3)


@dataclass(frozen=True)
class FeedbackRecord:
    pass_list_valid: bool
    unknown_passes: tuple[str, ...]
    src_inst_count_pred: int | None
    src_inst_count_actual: int
    src_count_correct: bool
    tgt_inst_count_pred: int | None
    compiled_inst_count: int | None
    tgt_inst_cnt_error_C: int | None
    tgt_count_correct: bool
    compile_error: str | None
    generated_ir_present: bool
    generated_ir_compilable: bool | None
    generated_ir_error: str | None
    tgt_inst_cnt_G: int | None
    tgt_IR_BLEU_C: float | None
    compiled_ir: str | None
    pass_list_too_long: bool = False
    generation_error: str | None = None

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["unknown_passes"] = list(self.unknown_passes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> FeedbackRecord:
        d = dict(d)
        d["unknown_passes"] = tuple(d["unknown_passes"])
        return cls(**d)


def evaluate_generation(src_ir: str, g: Generation, backend) -> FeedbackRecord:
    actual = source_count(src_ir, backend)
    validity = backend.validate(g.passes)

    compiled_count = error = compile_error = compiled_ir = None
    if validity.valid:
        result = backend.compile(src_ir, g.passes)
        if result.ok:
            compiled_count = result.inst_count
            compiled_ir = result.compiled_ir
            error = abs(g.tgt_inst_count_pred - compiled_count)
        else:
            compile_error = result.error_message

    present = g.optimized_ir is not None
    compilable = gen_error = gen_count = bleu_score = None
    if present:
        check = backend.check_compilable(g.optimized_ir)
        compilable = check.ok
        gen_error = check.message
        gen_count = count_instructions_text(g.optimized_ir)
        if compiled_ir is not None:
            bleu_score = ir_bleu(g.optimized_ir, compiled_ir).score

    return FeedbackRecord(
        pass_list_valid=validity.valid,
        unknown_passes=validity.unknown_names,
        src_inst_count_pred=g.src_inst_count_pred,
        src_inst_count_actual=actual,
        src_count_correct=g.src_inst_count_pred == actual,
        tgt_inst_count_pred=g.tgt_inst_count_pred,
        compiled_inst_count=compiled_count,
        tgt_inst_cnt_error_C=error,
        tgt_count_correct=error == 0,
        compile_error=compile_error,
        generated_ir_present=present,
        generated_ir_compilable=compilable,
        generated_ir_error=gen_error,
        tgt_inst_cnt_G=gen_count,
        tgt_IR_BLEU_C=bleu_score,
        compiled_ir=compiled_ir,
        pass_list_too_long=validity.too_long,
    )


def unparseable_record(src_ir: str, error: str, backend) -> FeedbackRecord:
    """Record for a generation that could not be parsed; treated as an invalid pass list."""
    return FeedbackRecord(
        pass_list_valid=False, unknown_passes=(), src_inst_count_pred=None,
        src_inst_count_actual=source_count(src_ir, backend), src_count_correct=False,
        tgt_inst_count_pred=None, compiled_inst_count=None, tgt_inst_cnt_error_C=None,
        tgt_count_correct=False, compile_error=None, generated_ir_present=False,
        generated_ir_compilable=None, generated_ir_error=None, tgt_inst_cnt_G=None,
        tgt_IR_BLEU_C=None, compiled_ir=None, generation_error=error,
    )


def _flag(ok: bool) -> str:
    return "correct" if ok else "incorrect"


def _fast_lines(rec: FeedbackRecord) -> list[str]:
    if rec.pass_list_valid:
        lines = ["pass_list: valid"]
    elif rec.generation_error is not None:
        lines = [f"pass_list: invalid (unparseable generation: {rec.generation_error})"]
    else:
        why = []
        if rec.unknown_passes:
            why.append("unknown: " + " ".join(rec.unknown_passes))
        if rec.pass_list_too_long:
            why.append("too long")
        lines = [f"pass_list: invalid ({'; '.join(why)})"]
    pred = "n/a" if rec.src_inst_count_pred is None else rec.src_inst_count_pred
    lines.append(f"src_inst_count: predicted {pred}, actual {rec.src_inst_count_actual}, "
                 f"{_flag(rec.src_count_correct)}")
    if rec.compiled_inst_count is not None:
        lines.append(f"tgt_inst_count: predicted {rec.tgt_inst_count_pred}, "
                     f"compiled {rec.compiled_inst_count}, {_flag(rec.tgt_count_correct)}")
        lines.append(f"tgt_inst_count_error: {rec.tgt_inst_cnt_error_C}")
    if rec.compile_error is not None:
        lines.append(f"compile_error: {rec.compile_error}")
    return lines


def _short_lines(rec: FeedbackRecord) -> list[str]:
    if not rec.generated_ir_present:
        return ["generated_ir: absent"]
    lines = [f"generated_ir_compilable: {'true' if rec.generated_ir_compilable else 'false'}"]
    if rec.generated_ir_error is not None:
        lines.append(f"generated_ir_error: {rec.generated_ir_error}")
    lines.append(f"tgt_inst_count_generated: {rec.tgt_inst_cnt_G}")
    if rec.tgt_IR_BLEU_C is not None:
        lines.append(f"tgt_ir_bleu: {rec.tgt_IR_BLEU_C:.4f}")
    return lines


def render_feedback(rec: FeedbackRecord, fmt: str) -> str:
    if fmt not in FORMATS:
        raise ValueError(f"unknown feedback format {fmt!r}")
    lines = _fast_lines(rec)
    if fmt in ("short", "long"):
        lines += _short_lines(rec)
    if fmt == "long" and rec.compiled_ir is not None:
        lines.append("compiled_ir:")
        lines.extend(rec.compiled_ir.rstrip("\n").split("\n"))
    return "".join(l + "\n" for l in lines)


def confidence_label(rec: FeedbackRecord) -> str:
    return "sure" if rec.pass_list_valid and rec.tgt_count_correct else "retry"
