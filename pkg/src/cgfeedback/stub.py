"""A heuristic stand-in for a trained model.

The stub reads the source IR out of the prompt and samples a pass list
around a preferred ("mode") pipeline: the backend's reference pipeline for a
fresh prompt, or the previous answer extended by a rewrite and a cleanup
pass when the prompt carries feedback. Temperature scales how far samples stray from the mode,
including occasional pass names outside the catalog.

Counts and IR are predicted by compiling a second, independently sampled
pass list, so predictions are right only some of the time. The confidence
line says "sure" exactly when both samples agree.
"""
from __future__ import annotations

import hashlib
import random

from .backend import MiniBackend, source_count
from .feedback import extract_source_ir, split_feedback_prompt
from .model import GenParams, Generation, ParseError, parse_generation, render_generation, softmax_choice, temperature_bucket

HALLUCINATED = ("licm", "instcombine", "gvn", "sroa")

KEEP_SCORE = 0.0
SWAP_SCORE = -2.5
DROP_SCORE = -2.0
INSERT_SCORE = -2.0
HALLUCINATE_SCORE = -7.0

PREDICT_MIN_TEMPERATURE = 0.6
MISCOUNT_PROB = 0.05
CORRUPT_IR_PROB = 0.05


def _rng(*parts) -> random.Random:
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


class StubModel:
    def __init__(self, seed: int = 0, backend=None, style: str = "feedback"):
        if style not in ("feedback", "original"):
            raise ValueError("style must be 'feedback' or 'original'")
        self.seed = seed
        self.backend = backend or MiniBackend()
        self.style = style
        self.catalog = self.backend.catalog.sorted_names()

    def describe(self) -> dict:
        return {"kind": "stub", "seed": self.seed, "style": self.style}

    def _sample(self, rng: random.Random, mode, temperature: float, hallucinate: bool) -> list[str]:
        out: list[str] = []
        max_len = self.backend.catalog.max_length

        def maybe_insert():
            if softmax_choice(rng, {"no": 0.0, "yes": INSERT_SCORE}, temperature) == "yes":
                out.append(rng.choice(self.catalog))

        maybe_insert()
        for p in mode:
            scores = {name: SWAP_SCORE for name in self.catalog}
            scores[p] = KEEP_SCORE
            scores["<drop>"] = DROP_SCORE
            if hallucinate:
                scores.update({h: HALLUCINATE_SCORE for h in HALLUCINATED})
            choice = softmax_choice(rng, scores, temperature)
            if choice != "<drop>":
                out.append(choice)
            maybe_insert()
        return out[:max_len]

    def _mode(self, prompt: str) -> list[str]:
        parts = split_feedback_prompt(prompt)
        if parts is None:
            return list(self.backend.catalog.reference_pipeline)
        _, gen_text, feedback_text = parts
        try:
            prior = list(parse_generation(gen_text).passes)
        except ParseError:
            return list(self.backend.catalog.reference_pipeline)
        prior = [p for p in prior if p in self.backend.catalog.names]
        satisfied = "pass_list: valid" in feedback_text and ", correct\n" in feedback_text.split(
            "tgt_inst_count:", 1)[-1]
        if satisfied:
            return prior
        # extend the previous attempt with another rewrite plus cleanup
        rewrites = [n for n in self.catalog if n != "dce"] or self.catalog
        extra = rewrites[(len(prior) // 2) % len(rewrites)]
        return (prior + [extra, "dce"])[: self.backend.catalog.max_length]

    def _one(self, prompt: str, src_ir: str, params: GenParams, index: int) -> str:
        t = params.temperature
        key = (self.seed, hashlib.sha256(prompt.encode()).hexdigest(),
               index if t > 0 else 0, temperature_bucket(t))
        mode = self._mode(prompt)
        final = self._sample(_rng(*key, "final"), mode, t, hallucinate=True)
        predicted = self._sample(_rng(*key, "predict"), mode, max(t, PREDICT_MIN_TEMPERATURE),
                                 hallucinate=False)
        noise = _rng(*key, "noise")

        src = source_count(src_ir, self.backend)
        if noise.random() < MISCOUNT_PROB:
            src += noise.choice((-1, 1))
        compiled = self.backend.compile(src_ir, predicted)
        ir = compiled.compiled_ir
        if noise.random() < CORRUPT_IR_PROB:
            lines = ir.split("\n")
            body = [i for i, l in enumerate(lines) if l.startswith("  ")]
            del lines[noise.choice(body)]
            ir = "\n".join(lines)

        if self.style == "original":
            confidence = "absent"
        else:
            confidence = "sure" if predicted == final else "retry"
        g = Generation(confidence, tuple(final), src, compiled.inst_count,
                       None if params.stop_after_counts else ir)
        return render_generation(g)

    def generate(self, prompt: str, params: GenParams) -> list[str]:
        src_ir = extract_source_ir(prompt)
        if src_ir is None:
            return ["I cannot find any IR in this prompt."] * params.n_samples
        return [self._one(prompt, src_ir, params, i) for i in range(params.n_samples)]
