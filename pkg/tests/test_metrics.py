import math
from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cgfeedback.autotune import SearchBudget, autotune
from cgfeedback.metrics import (
    CORRELATION_FIELDS,
    MetricsRow,
    aggregate,
    best_of_n_curve,
    emit_finetune_dataset,
    error_histogram,
    pearson,
    pearson_matrix,
    row_from_episode,
    split_dataset,
    subset,
)
from cgfeedback.mir import generate_corpus
from cgfeedback.model import SURE, Generation, ScriptedModel, parse_generation, render_generation
from cgfeedback.orchestrator import iterate_feedback, sample_optimize
from cgfeedback.stub import StubModel


def row(oz=10, chosen=10, at=10, err=0, **kw):
    base = dict(example_id="e", method="m", src_inst_cnt_C=12, src_inst_cnt_G=12, tgt_inst_cnt_G=chosen,
                tgt_inst_cnt_C=chosen, tgt_inst_cnt_error_C=err, tgt_IR_BLEU_C=None, num_flags=3,
                pass_list_valid=True, oz_count=oz, autotuner_count=at, chosen_count=chosen,
                improvement_over_oz=(oz - chosen) / oz if oz else 0.0,
                improvement_over_autotuner=(at - chosen) / at if at else None,
                provenance="model", steps_used=1)
    base.update(kw)
    return MetricsRow(**base)


TOY = [row(10, 9, 8, example_id="a"), row(10, 8, 8, example_id="b")]


def test_aggregate_toy_exact():
    s = aggregate(TOY)
    assert s.corpus_improvement == 0.15
    assert s.autotuner_corpus_improvement == 0.2
    assert s.fraction_of_autotuner == 0.75
    assert math.isclose(s.per_example_mean_improvement, 0.15)
    assert s.n == 2


def test_aggregate_edge_cases():
    assert aggregate([row(10, 10, 10), row(7, 7, 7)]).corpus_improvement == 0
    assert aggregate([row(10, 10, 10)]).fraction_of_autotuner is None
    assert aggregate([row(10, 8, 8), row(5, 4, 4)]).fraction_of_autotuner == 1.0
    assert aggregate([row(10, 9, None)]).fraction_of_autotuner is None
    with pytest.raises(ValueError):
        aggregate([])
    with pytest.raises(ValueError):
        aggregate([row(0, 0, 0)])


def test_subsets():
    assert subset(TOY, "autotuner_non_oz") == TOY
    assert subset(TOY, "model_worse_than_autotuner") == [TOY[0]]
    assert subset(TOY, "mispredicted_count") == []
    with pytest.raises(ValueError):
        subset(TOY, "bogus")


rows_st = st.lists(st.builds(row, st.integers(1, 30), st.integers(1, 30), st.integers(1, 30),
                             st.one_of(st.none(), st.integers(0, 4))), min_size=1, max_size=20)


@given(rows_st, st.sampled_from(["all", "autotuner_non_oz", "model_worse_than_autotuner",
                                 "mispredicted_count"]))
def test_subset_idempotent_and_partition(rows, which):
    once = subset(rows, which)
    assert subset(once, which) == once
    wrong = subset(rows, "mispredicted_count")
    rest = [r for r in rows if r not in wrong]
    assert len(wrong) + len(rest) == len(rows)


def test_pearson_basic():
    assert pearson([1.0, 2.0, 3.0], [-2.0, -4.0, -6.0]) == -1.0
    assert pearson([1.0, 1.0], [2.0, 3.0]) is None


def test_pearson_matrix_hand_dataset():
    rows = [{"x": a, "y": b, "c": 4} for a, b in zip([1, 2, 3, 4, 5], [2, 4, 5, 4, 5])]
    m = pearson_matrix(rows, ["x", "y", "c"])
    assert abs(m.get("x", "y") - math.sqrt(0.6)) < 1e-12
    assert m.get("x", "x") == 1.0 and m.get("y", "x") == m.get("x", "y")
    assert m.constant_fields == ["c"] and m.get("c", "c") is None and m.get("x", "c") is None
    with pytest.raises(ValueError):
        pearson_matrix(rows[:1], ["x"])


@given(st.lists(st.tuples(st.integers(-50, 50), st.integers(-50, 50), st.integers(-50, 50)),
                min_size=2, max_size=25))
def test_pearson_matrix_symmetric_bounded(triples):
    rows = [{"a": a, "b": b, "c": c} for a, b, c in triples]
    m = pearson_matrix(rows, ["a", "b", "c"])
    for i in range(3):
        for j in range(3):
            v = m.values[i][j]
            assert v == m.values[j][i]
            assert v is None or -1.0 <= v <= 1.0
            if i == j and v is not None:
                assert v == 1.0


def test_error_histogram():
    rows = [row(err=e, chosen=9, at=10) for e in (0, 0, 1, 2, 7, None)]
    b = error_histogram(rows, "tgt_inst_cnt_error_C", (1, 2, 5))
    assert [(x.label, x.count) for x in b] == [("=0", 2), ("[1, 2)", 1), ("[2, 5)", 1), (">=5", 1)]
    assert math.isclose(b[0].mean_improvement, 0.1)
    only = error_histogram([row(err=0)] * 3, "tgt_inst_cnt_error_C", (1, 2))
    assert [x.count for x in only] == [3, 0, 0]
    with pytest.raises(ValueError):
        error_histogram(rows, "tgt_inst_cnt_error_C", (3, 1))


def _episode(backend, text, passes_seq, eid="e", autotune_labels=True):
    texts = [render_generation(Generation("retry", tuple(p), 0, 0)) for p in passes_seq]
    model = ScriptedModel(lambda prompt, params, k: texts)
    ep = sample_optimize(text, model, backend, len(texts), 1.0, example_id=eid)
    if autotune_labels:
        res = autotune(text, backend, SearchBudget("exhaustive", 2))
        ep.autotuner_count, ep.autotuner_passes = res.best_count, res.best_passes
    return ep


def test_row_from_episode(backend, witness):
    ep = _episode(backend, witness, [["dce"], ["constfold", "dce"]])
    r = row_from_episode(ep)
    assert (r.chosen_count, r.oz_count, r.autotuner_count, r.src_inst_cnt_C) == (1, 1, 1, 3)
    assert r.num_flags == 2 and r.tgt_inst_cnt_C == 1 and r.tgt_inst_cnt_error_C == 1
    assert r.tgt_inst_cnt_error_C == abs(r.tgt_inst_cnt_G - r.tgt_inst_cnt_C)
    assert r.improvement_over_oz == 0.0 and r.improvement_over_autotuner == 0.0


def test_failed_episode_counts_as_source(backend, witness):
    ep = _episode(backend, witness, [["licm"]])
    r = row_from_episode(ep)
    assert ep.failed and r.chosen_count == 3 and r.improvement_over_oz == -2.0


def test_best_of_n_curve(backend, witness):
    ep = _episode(backend, witness, [["dce"], ["licm"], ["constfold", "dce"]])
    assert best_of_n_curve([ep], [1, 2, 3]) == {1: -2.0, 2: -2.0, 3: 0.0}


def test_dataset_labels_follow_first_step(backend, witness):
    right = render_generation(Generation("retry", ("dce",), 3, 3))
    wrong = render_generation(Generation("retry", ("dce",), 3, 5))
    eps = []
    for i, text in enumerate((right, wrong)):
        ep = sample_optimize(witness, ScriptedModel([text]), backend, 1, 0.0, example_id=f"e{i}")
        ep.autotuner_count, ep.autotuner_passes = 1, ("constfold", "dce")
        eps.append(ep)
    eps.append(_episode(backend, witness, [["dce"]], "nolabel", autotune_labels=False))
    recs = list(emit_finetune_dataset(eps, "short", backend))
    assert len(recs) == 2
    assert recs[0]["completion"].startswith(SURE + "\n")
    assert recs[1]["completion"].startswith("Let me try again.\n")
    g = parse_generation(recs[0]["completion"])
    assert g.passes == ("constfold", "dce") and g.src_inst_count_pred == 3 and g.tgt_inst_count_pred == 1
    assert g.optimized_ir == backend.compile(witness, g.passes).compiled_ir
    assert "--- feedback ---\n" in recs[0]["prompt"] and "generated_ir: absent" in recs[0]["prompt"]


def test_dataset_over_stub_episodes(backend):
    model = StubModel(1, backend)
    eps = []
    for eid, text in generate_corpus(23, 30):
        ep = iterate_feedback(text, "fast", model, backend, max_steps=2, temperature=1.0, example_id=eid)
        res = autotune(text, backend, SearchBudget("exhaustive", 1))
        ep.autotuner_count, ep.autotuner_passes = res.best_count, res.best_passes
        eps.append(ep)
    a = list(emit_finetune_dataset(eps, "fast", backend))
    assert a == list(emit_finetune_dataset(eps, "fast", backend))
    for rec, ep in zip(a, eps):
        g = parse_generation(rec["completion"])
        assert backend.compile(ep.source_ir, g.passes).inst_count == g.tgt_inst_count_pred
        assert g.tgt_inst_count_pred == ep.autotuner_count


def test_split_dataset():
    recs = list(range(100))
    s = split_dataset(recs, (0.9, 0.05, 0.05), seed=1)
    assert [len(s[k]) for k in ("train", "valid", "test")] == [90, 5, 5]
    assert sorted(s["train"] + s["valid"] + s["test"]) == recs
    assert s == split_dataset(recs, (0.9, 0.05, 0.05), seed=1)
    assert s != split_dataset(recs, (0.9, 0.05, 0.05), seed=2)
    # hold out a test share, then give half of it to validation
    half = split_dataset(recs, (0.8, 0.1, 0.1), seed=0)
    assert len(half["valid"]) == len(half["test"]) == 10
    with pytest.raises(ValueError):
        split_dataset(recs, (1.0, -0.5, 0.5))


def test_correlation_fields_exist():
    r = row()
    for f in CORRELATION_FIELDS:
        getattr(r, f)
    assert replace(r, num_flags=4).num_flags == 4
