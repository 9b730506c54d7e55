"""Pass-ordering search used as the per-example upper baseline."""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass


class AutotuneError(Exception):
    pass


@dataclass(frozen=True)
class SearchBudget:
    strategy: str = "exhaustive"  # exhaustive | random | greedy
    max_depth: int = 3
    max_evals: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in ("exhaustive", "random", "greedy"):
            raise ValueError(f"unknown search strategy {self.strategy!r}")
        if self.max_depth < 0 or self.max_evals < 1:
            raise ValueError("need max_depth >= 0 and max_evals >= 1")


@dataclass(frozen=True)
class AutotuneResult:
    best_passes: tuple[str, ...]
    best_count: int
    reference_count: int
    evaluations: int


def _rank(passes, count):
    # smaller count, then shorter pipeline, then lexicographic names
    return (count, len(passes), tuple(passes))


class _Search:
    def __init__(self, ir, backend, budget):
        self.ir = ir
        self.backend = backend
        self.budget = budget
        self.evals = 0
        self.best = None

    def exhausted(self) -> bool:
        return self.evals >= self.budget.max_evals

    def evaluate(self, passes) -> int | None:
        self.evals += 1
        result = self.backend.compile(self.ir, passes)
        if not result.ok:
            return None
        key = _rank(passes, result.inst_count)
        if self.best is None or key < self.best:
            self.best = key
        return result.inst_count


def autotune(ir: str, backend, budget: SearchBudget = SearchBudget()) -> AutotuneResult:
    check = backend.check_compilable(ir)
    if not check.ok:
        raise AutotuneError(f"cannot autotune uncompilable IR: {check.message}")
    names = backend.catalog.sorted_names()
    search = _Search(ir, backend, budget)

    reference = tuple(backend.catalog.reference_pipeline)
    reference_count = search.evaluate(reference)
    if reference_count is None:
        raise AutotuneError("reference pipeline failed to compile")

    if budget.strategy == "exhaustive":
        for depth in range(budget.max_depth + 1):
            for seq in itertools.product(names, repeat=depth):
                if search.exhausted():
                    break
                search.evaluate(seq)
    elif budget.strategy == "random":
        rng = random.Random(budget.seed)
        search.evaluate(())
        while not search.exhausted():
            depth = rng.randint(0, budget.max_depth)
            search.evaluate(tuple(rng.choice(names) for _ in range(depth)))
    else:
        current: tuple[str, ...] = ()
        current_count = search.evaluate(current)
        while len(current) < budget.max_depth and not search.exhausted():
            step = None
            for name in names:
                if search.exhausted():
                    break
                cand = current + (name,)
                count = search.evaluate(cand)
                if count is not None and (step is None or count < step[1]):
                    step = (cand, count)
            if step is None or step[1] >= current_count:
                break
            current, current_count = step

    count, _, passes = search.best
    return AutotuneResult(passes, count, reference_count, search.evals)
