import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cgfeedback.autotune import AutotuneError, SearchBudget, autotune
from cgfeedback.backend import MiniBackend
from cgfeedback.mir import PASS_NAMES, generate_corpus

RET_ONLY = "func f() {\nentry:\n  ret i32 0\n}\n"


def test_ret_only_prefers_empty(backend):
    res = autotune(RET_ONLY, backend, SearchBudget("exhaustive", 2))
    assert res.best_passes == () and res.best_count == 1 and res.reference_count == 1


def test_witness_depth_two(backend, witness):
    res = autotune(witness, backend, SearchBudget("exhaustive", 2))
    assert res.best_passes == ("constfold", "dce") and res.best_count == 1
    # 1 + 5 + 25 pipelines plus the reference
    assert res.evaluations == 32


def test_depth_zero_is_empty_or_reference(backend, witness, diamond):
    for text in (witness, diamond, RET_ONLY):
        res = autotune(text, backend, SearchBudget("exhaustive", 0))
        empty = backend.compile(text, []).inst_count
        if res.reference_count < empty:
            assert res.best_passes == backend.catalog.reference_pipeline
        else:
            assert res.best_passes == () and res.best_count == empty


def test_random_is_seeded(backend):
    text = generate_corpus(4, 1)[0][1]
    a = autotune(text, backend, SearchBudget("random", 8, 200, seed=3))
    b = autotune(text, backend, SearchBudget("random", 8, 200, seed=3))
    assert a == b and a.evaluations == 200


def test_greedy_stops_when_stuck(backend, witness):
    res = autotune(witness, backend, SearchBudget("greedy", 5))
    assert res.best_count == 1
    assert res.evaluations < 1 + 1 + 5 * 5


def test_budget_caps_evaluations(backend, witness):
    res = autotune(witness, backend, SearchBudget("exhaustive", 4, max_evals=10))
    assert res.evaluations == 10
    assert res.best_count <= res.reference_count


def test_bad_inputs(backend):
    with pytest.raises(AutotuneError):
        autotune("func f( {", backend)
    with pytest.raises(ValueError):
        SearchBudget("annealing")
    with pytest.raises(ValueError):
        SearchBudget(max_depth=-1)
    with pytest.raises(ValueError):
        SearchBudget(max_evals=0)


def _brute_force(text, backend, depth):
    """Straightforward enumeration with the documented tie-break."""
    best = None
    candidates = [tuple(backend.catalog.reference_pipeline)]
    for d in range(depth + 1):
        candidates.extend(itertools.product(sorted(PASS_NAMES), repeat=d))
    for seq in candidates:
        key = (backend.compile(text, seq).inst_count, len(seq), seq)
        best = key if best is None or key < best else best
    return best


_corpus = generate_corpus(31, 40)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(_corpus), st.integers(0, 2))
def test_exhaustive_is_optimal_and_monotone(example, depth):
    backend = MiniBackend()
    _, text = example
    res = autotune(text, backend, SearchBudget("exhaustive", depth))
    count, _, passes = _brute_force(text, backend, depth)
    assert (res.best_count, res.best_passes) == (count, passes)
    deeper = autotune(text, backend, SearchBudget("exhaustive", depth + 1))
    assert deeper.best_count <= res.best_count <= res.reference_count
