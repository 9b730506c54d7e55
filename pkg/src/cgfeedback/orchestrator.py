"""Optimization episodes: single-shot, feedback, iterative repair and sampling.

Candidates are always ranked by the count the backend reports for their
pass list; counts the model predicts never enter selection.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

from .backend import source_count
from .feedback import (
    FeedbackRecord,
    build_feedback_prompt,
    evaluate_generation,
    optimize_prompt,
    render_feedback,
    unparseable_record,
)
from .model import GenParams, Generation, ParseError, generate, parse_generation, render_generation

STRATEGIES = ("original_sample", "feedback_opt_T_fb_0", "feedback_opt_0_fb_T", "feedback_then_sample")


@dataclass
class Step:
    task: str  # "optimize" or "feedback"
    temperature: float
    raw_text: str
    generation: Generation | None
    record: FeedbackRecord

    @property
    def compiled_count(self) -> int | None:
        return self.record.compiled_inst_count

    def generation_text(self) -> str:
        return render_generation(self.generation) if self.generation else self.raw_text

    def to_dict(self) -> dict:
        g = None
        if self.generation is not None:
            g = asdict(self.generation)
            g.pop("raw_text")
            g["passes"] = list(g["passes"])
        return {"task": self.task, "temperature": self.temperature, "raw_text": self.raw_text,
                "generation": g, "record": self.record.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> Step:
        g = d["generation"]
        if g is not None:
            g = Generation(g["confidence"], tuple(g["passes"]), g["src_inst_count_pred"],
                           g["tgt_inst_count_pred"], g["optimized_ir"], raw_text=d["raw_text"])
        return cls(d["task"], d["temperature"], d["raw_text"], g, FeedbackRecord.from_dict(d["record"]))


@dataclass
class EpisodeResult:
    example_id: str
    method: str
    source_ir: str
    source_count: int
    oz_count: int
    chosen_passes: tuple[str, ...] | None
    chosen_count: int | None
    provenance: str  # "model", "oz_fallback" or "failed"
    steps_used: int
    generations: list[Step] = field(default_factory=list)
    autotuner_count: int | None = None
    autotuner_passes: tuple[str, ...] | None = None

    @property
    def failed(self) -> bool:
        return self.provenance == "failed"

    def candidate_counts(self) -> list[int | None]:
        return [s.compiled_count for s in self.generations]

    def cumulative_best(self) -> list[int | None]:
        """Best compiled count after each generation (None until one compiles)."""
        best, out = None, []
        for c in self.candidate_counts():
            if c is not None and (best is None or c < best):
                best = c
            out.append(best)
        return out

    def chosen_step(self) -> Step | None:
        if self.provenance != "model":
            return None
        for s in self.generations:
            if s.compiled_count == self.chosen_count and s.generation and s.generation.passes == self.chosen_passes:
                return s
        return None

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "generations"}
        for k in ("chosen_passes", "autotuner_passes"):
            if d[k] is not None:
                d[k] = list(d[k])
        d["generations"] = [s.to_dict() for s in self.generations]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> EpisodeResult:
        d = dict(d)
        d["generations"] = [Step.from_dict(s) for s in d["generations"]]
        for k in ("chosen_passes", "autotuner_passes"):
            if d.get(k) is not None:
                d[k] = tuple(d[k])
        return cls(**d)


def _step(src_ir, task, temperature, text, backend) -> Step:
    try:
        g = parse_generation(text)
    except ParseError as e:
        return Step(task, temperature, text, None, unparseable_record(src_ir, str(e), backend))
    return Step(task, temperature, text, g, evaluate_generation(src_ir, g, backend))


def _optimize_steps(src_ir, model, backend, temperature, n, stop_after_counts) -> list[Step]:
    params = GenParams(temperature, n, stop_after_counts=stop_after_counts)
    texts = generate(optimize_prompt(src_ir), params, model)
    return [_step(src_ir, "optimize", temperature, t, backend) for t in texts]


def feedback_prompt(src_ir: str, prior: Step, fmt: str) -> str:
    return build_feedback_prompt(optimize_prompt(src_ir), prior.generation_text(),
                                 render_feedback(prior.record, fmt))


def _feedback_steps(src_ir, prior, fmt, model, backend, temperature, n, stop_after_counts) -> list[Step]:
    params = GenParams(temperature, n, stop_after_counts=stop_after_counts)
    texts = generate(feedback_prompt(src_ir, prior, fmt), params, model)
    return [_step(src_ir, "feedback", temperature, t, backend) for t in texts]


def task_optimize(src_ir: str, model, backend, temperature: float = 0.0,
                  stop_after_counts: bool = False) -> Step:
    return _optimize_steps(src_ir, model, backend, temperature, 1, stop_after_counts)[0]


def task_feedback(src_ir: str, prior: Step, fmt: str, model, backend, temperature: float = 0.0,
                  stop_after_counts: bool | None = None) -> Step:
    if stop_after_counts is None:
        stop_after_counts = fmt == "fast"
    return _feedback_steps(src_ir, prior, fmt, model, backend, temperature, 1, stop_after_counts)[0]


def _episode(src_ir, steps, backend, oz_combine, method, example_id, steps_used=None) -> EpisodeResult:
    oz = backend.compile(src_ir, backend.catalog.reference_pipeline)
    if not oz.ok:
        raise RuntimeError(f"reference pipeline failed on {example_id}: {oz.error_message}")
    best = None
    for i, s in enumerate(steps):
        if s.compiled_count is not None and (best is None or s.compiled_count < best[0]):
            best = (s.compiled_count, i)
    if best is not None and (not oz_combine or best[0] <= oz.inst_count):
        chosen = steps[best[1]]
        passes = chosen.generation.passes
        # recompile: the chosen count is what the compiler says, nothing else
        count = backend.compile(src_ir, passes).inst_count
        provenance = "model"
    elif oz_combine:
        passes, count, provenance = tuple(backend.catalog.reference_pipeline), oz.inst_count, "oz_fallback"
    else:
        passes, count, provenance = None, None, "failed"
    return EpisodeResult(
        example_id=example_id, method=method, source_ir=src_ir,
        source_count=source_count(src_ir, backend), oz_count=oz.inst_count,
        chosen_passes=passes, chosen_count=count, provenance=provenance,
        steps_used=len(steps) if steps_used is None else steps_used, generations=list(steps),
    )


def iterate_feedback(src_ir: str, fmt: str, model, backend, max_steps: int = 5,
                     temperature: float = 0.0, oz_combine: bool = False,
                     example_id: str = "") -> EpisodeResult:
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    stop = fmt == "fast"
    steps = [task_optimize(src_ir, model, backend, temperature, stop)]
    while len(steps) < max_steps and not _is_sure(steps[-1]):
        steps.append(task_feedback(src_ir, steps[-1], fmt, model, backend, temperature, stop))
    return _episode(src_ir, steps, backend, oz_combine, f"iterate_{fmt}", example_id)


def _is_sure(step: Step) -> bool:
    return step.generation is not None and step.generation.confidence == "sure"


def sample_optimize(src_ir: str, model, backend, n: int, temperature: float,
                    oz_combine: bool = False, stop_after_counts: bool = False,
                    example_id: str = "") -> EpisodeResult:
    if n < 1:
        raise ValueError("n must be >= 1")
    steps = _optimize_steps(src_ir, model, backend, temperature, n, stop_after_counts)
    return _episode(src_ir, steps, backend, oz_combine, "original_sample", example_id)


@dataclass(frozen=True)
class SamplingStrategy:
    kind: str
    temperature: float = 0.0
    n_samples: int = 1

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.kind!r}; expected one of {STRATEGIES}")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")

    def expected_generations(self) -> int:
        n = self.n_samples
        return {"original_sample": n, "feedback_opt_T_fb_0": 2 * n,
                "feedback_opt_0_fb_T": n + 1, "feedback_then_sample": n + 2}[self.kind]


def run_strategy(src_ir: str, strat: SamplingStrategy, fmt: str, model, backend,
                 oz_combine: bool = False, example_id: str = "") -> EpisodeResult:
    T, n = strat.temperature, strat.n_samples
    stop = fmt == "fast"
    if strat.kind == "original_sample":
        return sample_optimize(src_ir, model, backend, n, T, oz_combine, example_id=example_id)
    if strat.kind == "feedback_opt_T_fb_0":
        first = _optimize_steps(src_ir, model, backend, T, n, stop)
        steps = list(first)
        for prior in first:
            steps.append(task_feedback(src_ir, prior, fmt, model, backend, 0.0, stop))
    elif strat.kind == "feedback_opt_0_fb_T":
        first = task_optimize(src_ir, model, backend, 0.0, stop)
        steps = [first] + _feedback_steps(src_ir, first, fmt, model, backend, T, n, stop)
    else:  # feedback_then_sample
        first = task_optimize(src_ir, model, backend, 0.0, stop)
        second = task_feedback(src_ir, first, fmt, model, backend, 0.0, stop)
        steps = [first, second] + _feedback_steps(src_ir, second, fmt, model, backend, T, n, stop)
    return _episode(src_ir, steps, backend, oz_combine, strat.kind, example_id)


def equal_compute(src_ir: str, fmt: str, feedback_model, original_model, backend,
                  max_steps: int = 5, temperature: float = 0.0, oz_combine: bool = False,
                  example_id: str = "") -> tuple[EpisodeResult, EpisodeResult]:
    """Iterative feedback vs. sampling the original model with as many generations."""
    it = iterate_feedback(src_ir, fmt, feedback_model, backend, max_steps, 0.0, oz_combine, example_id)
    sm = sample_optimize(src_ir, original_model, backend, it.steps_used, temperature, oz_combine,
                         example_id=example_id)
    return it, sm
