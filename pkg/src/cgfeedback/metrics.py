"""Per-example metric rows, corpus summaries, correlations and dataset emission."""
from __future__ import annotations

import logging
import math
import random
from dataclasses import asdict, dataclass, fields
from fractions import Fraction

from .feedback import build_feedback_prompt, confidence_label, optimize_prompt, render_feedback
from .model import Generation, render_generation

log = logging.getLogger(__name__)

SUBSETS = ("all", "autotuner_non_oz", "model_worse_than_autotuner", "mispredicted_count")

CORRELATION_FIELDS = (
    "src_inst_cnt_C", "src_inst_cnt_G", "tgt_inst_cnt_G", "tgt_inst_cnt_C",
    "tgt_inst_cnt_error_C", "tgt_IR_BLEU_C", "num_flags", "improvement_over_autotuner",
)


@dataclass
class MetricsRow:
    example_id: str
    method: str
    src_inst_cnt_C: int
    src_inst_cnt_G: int | None
    tgt_inst_cnt_G: int | None
    tgt_inst_cnt_C: int | None
    tgt_inst_cnt_error_C: int | None
    tgt_IR_BLEU_C: float | None
    num_flags: int | None
    pass_list_valid: bool
    oz_count: int
    autotuner_count: int | None
    chosen_count: int
    improvement_over_oz: float
    improvement_over_autotuner: float | None
    provenance: str
    steps_used: int

    def to_dict(self) -> dict:
        return asdict(self)


ROW_FIELDS = [f.name for f in fields(MetricsRow)]


def row_from_episode(ep) -> MetricsRow:
    """Flatten an episode.

    Generation metrics come from the step that produced the chosen pass list,
    or from the first step when the model's answer was not used. A failed
    episode counts as leaving the source unoptimized.
    """
    step = ep.chosen_step() or ep.generations[0]
    rec, g = step.record, step.generation
    chosen = ep.source_count if ep.chosen_count is None else ep.chosen_count
    at = ep.autotuner_count
    return MetricsRow(
        example_id=ep.example_id,
        method=ep.method,
        src_inst_cnt_C=ep.source_count,
        src_inst_cnt_G=rec.src_inst_count_pred,
        tgt_inst_cnt_G=rec.tgt_inst_count_pred,
        tgt_inst_cnt_C=rec.compiled_inst_count,
        tgt_inst_cnt_error_C=rec.tgt_inst_cnt_error_C,
        tgt_IR_BLEU_C=rec.tgt_IR_BLEU_C,
        num_flags=len(g.passes) if g is not None else None,
        pass_list_valid=rec.pass_list_valid,
        oz_count=ep.oz_count,
        autotuner_count=at,
        chosen_count=chosen,
        improvement_over_oz=(ep.oz_count - chosen) / ep.oz_count,
        improvement_over_autotuner=None if not at else (at - chosen) / at,
        provenance=ep.provenance,
        steps_used=ep.steps_used,
    )


@dataclass
class Summary:
    n: int
    per_example_mean_improvement: float
    corpus_improvement: float
    autotuner_corpus_improvement: float | None
    fraction_of_autotuner: float | None
    autotuner_mean_improvement: float | None
    fraction_of_autotuner_mean: float | None
    oz_fallbacks: int
    failed: int

    def to_dict(self) -> dict:
        return asdict(self)


def aggregate(rows) -> Summary:
    rows = list(rows)
    if not rows:
        raise ValueError("cannot aggregate zero rows")
    if any(r.oz_count <= 0 for r in rows):
        raise ValueError("every row needs oz_count > 0")
    oz_total = sum(r.oz_count for r in rows)
    corpus = 1 - Fraction(sum(r.chosen_count for r in rows), oz_total)
    mean = math.fsum(r.improvement_over_oz for r in rows) / len(rows)

    at_corpus = at_mean = fraction = fraction_mean = None
    if all(r.autotuner_count is not None for r in rows):
        at_corpus_exact = 1 - Fraction(sum(r.autotuner_count for r in rows), oz_total)
        at_corpus = float(at_corpus_exact)
        if at_corpus_exact > 0:
            fraction = float(corpus / at_corpus_exact)
        at_mean = math.fsum((r.oz_count - r.autotuner_count) / r.oz_count for r in rows) / len(rows)
        if at_mean > 0:
            fraction_mean = mean / at_mean
    return Summary(
        n=len(rows),
        per_example_mean_improvement=mean,
        corpus_improvement=float(corpus),
        autotuner_corpus_improvement=at_corpus,
        fraction_of_autotuner=fraction,
        autotuner_mean_improvement=at_mean,
        fraction_of_autotuner_mean=fraction_mean,
        oz_fallbacks=sum(r.provenance == "oz_fallback" for r in rows),
        failed=sum(r.provenance == "failed" for r in rows),
    )


def subset(rows, which: str) -> list:
    if which == "all":
        return list(rows)
    if which == "autotuner_non_oz":
        return [r for r in rows if r.autotuner_count is not None and r.autotuner_count < r.oz_count]
    if which == "model_worse_than_autotuner":
        return [r for r in rows if r.autotuner_count is not None and r.chosen_count > r.autotuner_count]
    if which == "mispredicted_count":
        return [r for r in rows if r.tgt_inst_cnt_error_C is not None and r.tgt_inst_cnt_error_C > 0]
    raise ValueError(f"unknown subset {which!r}; expected one of {SUBSETS}")


@dataclass
class CorrelationMatrix:
    fields: list[str]
    values: list[list[float | None]]  # None where undefined
    constant_fields: list[str]

    def get(self, a: str, b: str) -> float | None:
        return self.values[self.fields.index(a)][self.fields.index(b)]


def pearson(xs, ys) -> float | None:
    """Sample Pearson r over paired values; None when either side is constant."""
    n = len(xs)
    mx, my = math.fsum(xs) / n, math.fsum(ys) / n
    dx = [x - mx for x in xs]
    dy = [y - my for y in ys]
    sxx = math.fsum(d * d for d in dx)
    syy = math.fsum(d * d for d in dy)
    if sxx == 0 or syy == 0:
        return None
    r = math.fsum(a * b for a, b in zip(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def pearson_matrix(rows, fields=CORRELATION_FIELDS) -> CorrelationMatrix:
    rows = list(rows)
    if len(rows) < 2:
        raise ValueError("need at least 2 rows for correlations")
    fields = list(fields)
    cols = {f: [getattr(r, f) if not isinstance(r, dict) else r[f] for r in rows] for f in fields}
    constant = []
    for f in fields:
        present = {v for v in cols[f] if v is not None}
        if len(present) <= 1:
            constant.append(f)
    values: list[list[float | None]] = []
    for a in fields:
        line = []
        for b in fields:
            pairs = [(x, y) for x, y in zip(cols[a], cols[b]) if x is not None and y is not None]
            if a in constant or b in constant or len(pairs) < 2:
                line.append(None)
            elif a == b:
                line.append(1.0)
            else:
                line.append(pearson([float(x) for x, _ in pairs], [float(y) for _, y in pairs]))
        values.append(line)
    return CorrelationMatrix(fields, values, constant)


@dataclass
class Bucket:
    label: str
    lo: float | None
    hi: float | None
    count: int
    mean_improvement: float | None


def error_histogram(rows, field: str, edges, exact: float | None = 0,
                    improvement: str = "improvement_over_autotuner") -> list[Bucket]:
    """Bucket rows by ``field``.

    Values equal to ``exact`` get their own bucket (the "predicted exactly"
    case); the rest fall in ``[edges[i], edges[i+1])`` plus an overflow bucket.
    Rows where ``field`` is missing are skipped.
    """
    edges = list(edges)
    if edges != sorted(edges):
        raise ValueError("bucket edges must be sorted")
    groups: dict[int, list] = {}
    labels: list[tuple[str, float | None, float | None]] = []
    if exact is not None:
        labels.append((f"={exact:g}", exact, exact))
    bounds = [(edges[i], edges[i + 1]) for i in range(len(edges) - 1)] + [(edges[-1], None)]
    offset = len(labels)
    for lo, hi in bounds:
        labels.append((f"[{lo:g}, {hi:g})" if hi is not None else f">={lo:g}", lo, hi))
    for r in rows:
        v = getattr(r, field)
        if v is None:
            continue
        if exact is not None and v == exact:
            idx = 0
        else:
            idx = None
            for k, (lo, hi) in enumerate(bounds):
                if v >= lo and (hi is None or v < hi):
                    idx = offset + k
                    break
            if idx is None:
                continue  # below the first edge
        groups.setdefault(idx, []).append(r)
    out = []
    for idx, (label, lo, hi) in enumerate(labels):
        members = groups.get(idx, [])
        imps = [getattr(r, improvement) for r in members if getattr(r, improvement) is not None]
        mean = math.fsum(imps) / len(imps) if imps else None
        out.append(Bucket(label, lo, hi, len(members), mean))
    return out


def best_of_n_curve(episodes, ns) -> dict[int, float]:
    """Corpus improvement over -Oz using the first k generations of each episode."""
    oz_total = sum(ep.oz_count for ep in episodes)
    curve = {}
    for k in ns:
        total = 0
        for ep in episodes:
            counts = [c for c in ep.candidate_counts()[:k] if c is not None]
            total += min(counts) if counts else ep.source_count
        curve[k] = float(1 - Fraction(total, oz_total))
    return curve


def emit_finetune_dataset(episodes, fmt: str, backend):
    """Yield {prompt, completion, meta} records, one per autotuner-labelled episode.

    The prompt is the episode's first generation plus its feedback; the
    completion is the confidence line for that generation followed by the
    autotuner's answer with true counts and the compiled IR.
    """
    skipped = 0
    for ep in episodes:
        if ep.autotuner_passes is None:
            skipped += 1
            continue
        first = ep.generations[0]
        prompt = build_feedback_prompt(optimize_prompt(ep.source_ir), first.generation_text(),
                                       render_feedback(first.record, fmt))
        label = confidence_label(first.record)
        compiled = backend.compile(ep.source_ir, ep.autotuner_passes)
        if not compiled.ok:
            skipped += 1
            log.warning("autotuner passes for %s no longer compile: %s", ep.example_id, compiled.error_message)
            continue
        completion = render_generation(Generation(label, tuple(ep.autotuner_passes), ep.source_count,
                                                  compiled.inst_count, compiled.compiled_ir))
        yield {
            "prompt": prompt,
            "completion": completion,
            "meta": {
                "example_id": ep.example_id,
                "format": fmt,
                "label": label,
                "pass_list_valid": first.record.pass_list_valid,
                "tgt_inst_cnt_error_C": first.record.tgt_inst_cnt_error_C,
                "autotuner_count": compiled.inst_count,
            },
        }
    if skipped:
        log.info("skipped %d episodes without a usable autotuner label", skipped)


def split_dataset(records, ratios=(0.9, 0.05, 0.05), seed: int = 0) -> dict[str, list]:
    """Seeded shuffle into train/valid/test by ``ratios``."""
    if len(ratios) != 3 or any(r < 0 for r in ratios) or sum(ratios) <= 0:
        raise ValueError("ratios must be three non-negative numbers")
    records = list(records)
    random.Random(seed).shuffle(records)
    total = sum(ratios)
    n_train = round(len(records) * ratios[0] / total)
    n_valid = round(len(records) * ratios[1] / total)
    return {"train": records[:n_train], "valid": records[n_train:n_train + n_valid],
            "test": records[n_train + n_valid:]}
