import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cgfeedback.backend import CompileResult, MiniBackend
from cgfeedback.feedback import (
    FEEDBACK_MARKER,
    GENERATION_MARKER,
    TRY_AGAIN_MARKER,
    FeedbackRecord,
    build_feedback_prompt,
    confidence_label,
    evaluate_generation,
    extract_source_ir,
    optimize_prompt,
    render_feedback,
    split_feedback_prompt,
    unparseable_record,
)
from cgfeedback.irtext import bleu, tokenize
from cgfeedback.model import Generation, render_generation

from conftest import FIXTURES


def perfect(src, passes, backend):
    r = backend.compile(src, passes)
    return Generation("sure", tuple(passes), backend.compile(src, []).inst_count, r.inst_count, r.compiled_ir)


def test_self_consistent_generation(backend, witness):
    g = perfect(witness, ["constfold", "dce"], backend)
    rec = evaluate_generation(witness, g, backend)
    assert rec.pass_list_valid and rec.src_count_correct and rec.tgt_count_correct
    assert rec.generated_ir_compilable and rec.tgt_inst_cnt_error_C == 0
    assert rec.tgt_IR_BLEU_C == 1.0
    assert confidence_label(rec) == "sure"


def test_unknown_pass_skips_compile(backend, witness):
    g = Generation("sure", ("constfold", "licm"), 3, 1, None)
    rec = evaluate_generation(witness, g, backend)
    assert not rec.pass_list_valid and rec.unknown_passes == ("licm",)
    assert rec.compiled_inst_count is None and rec.compiled_ir is None and rec.tgt_inst_cnt_error_C is None
    assert rec.compile_error is None and not rec.tgt_count_correct
    assert confidence_label(rec) == "retry"


def test_error_from_mismatched_prediction(backend, witness, diamond):
    # passes [dce] but the count predicted as if [constfold, dce] had run
    predicted = backend.compile(witness, ["constfold", "dce"]).inst_count
    rec = evaluate_generation(witness, Generation("retry", ("dce",), 3, predicted), backend)
    assert rec.compiled_inst_count == 3 and rec.tgt_inst_cnt_error_C == 2
    assert confidence_label(rec) == "retry"
    # on the diamond nothing folds, so the two pipelines agree
    predicted = backend.compile(diamond, ["constfold", "dce"]).inst_count
    rec = evaluate_generation(diamond, Generation("retry", ("dce",), 7, predicted), backend)
    assert rec.tgt_inst_cnt_error_C == 0


def test_generated_ir_uncompilable(backend, witness):
    g = Generation("retry", ("dce",), 3, 3, "func w() {\nentry:\n  ret i32 %zz\n}\n")
    rec = evaluate_generation(witness, g, backend)
    assert rec.generated_ir_present and rec.generated_ir_compilable is False
    assert "%zz" in rec.generated_ir_error
    assert rec.tgt_inst_cnt_G == 1
    expected = bleu(tokenize(g.optimized_ir), tokenize(rec.compiled_ir)).score
    assert rec.tgt_IR_BLEU_C == expected


def test_source_count_checked_against_compiler(backend, witness):
    rec = evaluate_generation(witness, Generation("absent", (), 4, 3), backend)
    assert rec.src_inst_count_actual == 3 and not rec.src_count_correct


def test_evaluate_is_deterministic(backend, diamond):
    g = Generation("retry", ("cse", "dce"), 7, 5, "junk")
    assert evaluate_generation(diamond, g, backend) == evaluate_generation(diamond, g, backend)


def test_record_dict_round_trip(backend, witness):
    rec = evaluate_generation(witness, perfect(witness, ["dce"], backend), backend)
    assert FeedbackRecord.from_dict(rec.to_dict()) == rec


# -- rendering -------------------------------------------------------------------------

def test_fast_all_correct(backend, witness):
    rec = evaluate_generation(witness, perfect(witness, ["constfold", "dce"], backend), backend)
    assert render_feedback(rec, "fast") == (
        "pass_list: valid\n"
        "src_inst_count: predicted 3, actual 3, correct\n"
        "tgt_inst_count: predicted 1, compiled 1, correct\n"
        "tgt_inst_count_error: 0\n"
    )


def test_long_extends_short(backend, witness):
    rec = evaluate_generation(witness, perfect(witness, ["constfold", "dce"], backend), backend)
    short, long = render_feedback(rec, "short"), render_feedback(rec, "long")
    assert long.startswith(short) and len(long) > len(short)
    assert short.endswith("tgt_ir_bleu: 1.0000\n")
    assert long[len(short):] == "compiled_ir:\n" + rec.compiled_ir


def test_absent_ir_rendering(backend, witness):
    rec = evaluate_generation(witness, Generation("retry", ("dce",), 3, 3), backend)
    assert render_feedback(rec, "short") == render_feedback(rec, "fast") + "generated_ir: absent\n"


def test_invalid_and_unparseable_rendering(backend, witness):
    rec = evaluate_generation(witness, Generation("retry", ("licm", "gvn"), 3, 3), backend)
    assert render_feedback(rec, "fast").startswith("pass_list: invalid (unknown: licm gvn)\n")
    rec = evaluate_generation(witness, Generation("retry", ("dce",) * 20, 3, 3), backend)
    assert render_feedback(rec, "fast").startswith("pass_list: invalid (too long)\n")
    rec = unparseable_record(witness, "line 1: missing 'passes:' line: ''", backend)
    fast = render_feedback(rec, "fast")
    assert fast.startswith("pass_list: invalid (unparseable generation: line 1:")
    assert "src_inst_count: predicted n/a, actual 3, incorrect" in fast


def test_compile_failure_in_every_format(backend):
    class Failing(MiniBackend):
        def compile(self, ir, passes):
            if passes:
                return CompileResult(False, error_message="backend exploded")
            return super().compile(ir, passes)

    src = (FIXTURES / "witness.mir").read_text()
    rec = evaluate_generation(src, Generation("retry", ("dce",), 3, 1, "x"), Failing())
    for fmt in ("fast", "short", "long"):
        text = render_feedback(rec, fmt)
        assert "compile_error: backend exploded\n" in text
        assert "tgt_inst_count:" not in text and "compiled_ir:" not in text


def test_unknown_format(backend, witness):
    rec = evaluate_generation(witness, Generation("retry", (), 3, 3), backend)
    with pytest.raises(ValueError):
        render_feedback(rec, "medium")


def test_confidence_label_rule():
    base = dict(pass_list_valid=True, unknown_passes=(), src_inst_count_pred=3, src_inst_count_actual=3,
                src_count_correct=True, tgt_inst_count_pred=1, compiled_inst_count=1,
                tgt_inst_cnt_error_C=0, tgt_count_correct=True, compile_error=None,
                generated_ir_present=False, generated_ir_compilable=None, generated_ir_error=None,
                tgt_inst_cnt_G=None, tgt_IR_BLEU_C=None, compiled_ir="x")
    assert confidence_label(FeedbackRecord(**base)) == "sure"
    off = dict(base, compiled_inst_count=3, tgt_inst_cnt_error_C=2, tgt_count_correct=False)
    assert confidence_label(FeedbackRecord(**off)) == "retry"
    assert confidence_label(FeedbackRecord(**dict(base, pass_list_valid=False))) == "retry"


gens = st.builds(
    Generation,
    st.sampled_from(["sure", "retry", "absent"]),
    st.lists(st.sampled_from(["constfold", "peephole", "cse", "simplifycfg", "dce", "licm"]),
             max_size=18).map(tuple),
    st.integers(0, 6), st.integers(0, 6),
    st.one_of(st.none(), st.just("func w() {\nentry:\n  ret i32 0\n}\n"), st.text(max_size=30)),
)


@settings(max_examples=200, deadline=None)
@given(gens)
def test_format_prefixes_and_invariants(g):
    backend = MiniBackend()
    src = (FIXTURES / "witness.mir").read_text()
    rec = evaluate_generation(src, g, backend)
    fast, short, long = (render_feedback(rec, f) for f in ("fast", "short", "long"))
    assert short.startswith(fast) and long.startswith(short)
    assert all(line for line in fast.split("\n")[:-1])
    assert rec.tgt_count_correct == (rec.tgt_inst_cnt_error_C == 0)
    assert (rec.tgt_inst_cnt_G is None) == (not rec.generated_ir_present)
    assert rec.tgt_IR_BLEU_C is None or (rec.generated_ir_present and rec.compiled_ir is not None)
    if confidence_label(rec) == "sure":
        assert rec.compiled_inst_count == g.tgt_inst_count_pred
    if rec.tgt_IR_BLEU_C is not None:
        assert not math.isnan(rec.tgt_IR_BLEU_C)


# -- prompts ----------------------------------------------------------------------------

def test_prompt_sections_even_when_empty():
    p = build_feedback_prompt("orig", "gen", "")
    for marker in (GENERATION_MARKER, FEEDBACK_MARKER, TRY_AGAIN_MARKER):
        assert p.count(marker) == 1
    assert split_feedback_prompt(p) == ("orig", "gen", "")


def test_prompt_round_trip(witness):
    orig = optimize_prompt(witness)
    assert extract_source_ir(orig) == witness
    p = build_feedback_prompt(orig, "passes:\nsrc_inst_count: 3\ntgt_inst_count: 3\n", "pass_list: valid\n")
    o, g, f = split_feedback_prompt(p)
    assert o == orig.rstrip("\n") and f == "pass_list: valid"
    assert extract_source_ir(p) == witness
    assert split_feedback_prompt(orig) is None


def test_long_prompt_has_compiled_ir_once(backend, witness):
    g = Generation("retry", ("dce", "constfold"), 3, 1, None)
    rec = evaluate_generation(witness, g, backend)
    p = build_feedback_prompt(optimize_prompt(witness), render_generation(g), render_feedback(rec, "long"))
    assert p.count(rec.compiled_ir.rstrip("\n")) == 1


def test_golden_long_feedback_prompt(backend, witness):
    g = Generation("retry", ("dce", "constfold"), 3, 1, "func w() {\nentry:\n  ret i32 0\n}\n")
    rec = evaluate_generation(witness, g, backend)
    p = build_feedback_prompt(optimize_prompt(witness), render_generation(g), render_feedback(rec, "long"))
    assert p == (FIXTURES / "golden_feedback_long.txt").read_text()
