"""Model outputs and the pluggable text-generation backends.

Generation text format (line oriented)::

    I am sure!            <- optional; or "Let me try again."
    passes: constfold dce
    src_inst_count: 7
    tgt_inst_count: 3
    ir:                   <- optional; the rest of the text is optimized IR
    func f(%a0) { ...
"""
from __future__ import annotations

import hashlib
import json
import math
import random
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

SURE = "I am sure!"
RETRY = "Let me try again."
_CONFIDENCE_LINES = {SURE: "sure", RETRY: "retry"}
_CONFIDENCE_TEXT = {"sure": SURE, "retry": RETRY}

MAX_SAMPLES = 1000


class ParseError(ValueError):
    def __init__(self, lineno: int, line: str, message: str):
        self.lineno = lineno
        self.line = line
        super().__init__(f"line {lineno}: {message}: {line!r}")


@dataclass(frozen=True)
class Generation:
    confidence: str  # "sure", "retry" or "absent"
    passes: tuple[str, ...]
    src_inst_count_pred: int
    tgt_inst_count_pred: int
    optimized_ir: str | None = None
    raw_text: str = field(default="", compare=False, repr=False)


def render_generation(g: Generation) -> str:
    lines = []
    if g.confidence != "absent":
        lines.append(_CONFIDENCE_TEXT[g.confidence])
    lines.append("passes: " + " ".join(g.passes) if g.passes else "passes:")
    lines.append(f"src_inst_count: {g.src_inst_count_pred}")
    lines.append(f"tgt_inst_count: {g.tgt_inst_count_pred}")
    text = "\n".join(lines) + "\n"
    if g.optimized_ir is not None:
        text += "ir:\n" + g.optimized_ir
    return text


def _field(lines, idx, name, lineno_base):
    if idx >= len(lines):
        raise ParseError(idx + lineno_base, "", f"missing '{name}:' line")
    line = lines[idx]
    if not line.startswith(name + ":"):
        raise ParseError(idx + lineno_base, line, f"expected '{name}:'")
    return line[len(name) + 1:].strip()


def parse_generation(text: str) -> Generation:
    head, sep, ir = text.partition("\nir:")
    if sep:
        # the IR section starts after the newline following "ir:"
        if ir.startswith("\n"):
            ir = ir[1:]
        elif ir.strip():
            lineno = head.count("\n") + 2
            raise ParseError(lineno, "ir:" + ir.split("\n", 1)[0], "expected newline after 'ir:'")
    else:
        ir = None
    lines = head.split("\n")
    if lines and lines[-1] == "" and not sep:
        lines.pop()
    idx = 0
    confidence = "absent"
    if lines and lines[0].strip() in _CONFIDENCE_LINES:
        confidence = _CONFIDENCE_LINES[lines[0].strip()]
        idx = 1
    passes = tuple(_field(lines, idx, "passes", 1).split())
    counts = []
    for k, name in enumerate(("src_inst_count", "tgt_inst_count")):
        raw = _field(lines, idx + 1 + k, name, 1)
        if not re.fullmatch(r"-?\d+", raw):
            raise ParseError(idx + 2 + k, lines[idx + 1 + k], f"'{name}' is not an integer")
        counts.append(int(raw))
    extra = [l for l in lines[idx + 3:] if l.strip()]
    if extra:
        raise ParseError(idx + 4, extra[0], "unexpected line")
    return Generation(confidence, passes, counts[0], counts[1], ir, raw_text=text)


@dataclass(frozen=True)
class GenParams:
    temperature: float = 0.0
    n_samples: int = 1
    max_tokens: int = 2048
    stop_after_counts: bool = False

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        if not 1 <= self.n_samples <= MAX_SAMPLES:
            raise ValueError(f"n_samples must be in [1, {MAX_SAMPLES}]")

    @property
    def stop(self) -> list[str]:
        return ["ir:"] if self.stop_after_counts else []


def _truncate_at_ir(text: str) -> str:
    head, sep, _ = text.partition("\nir:")
    return head + "\n" if sep else text


class ModelError(Exception):
    pass


class TransportError(ModelError):
    """Retriable failure talking to a model server."""

    def __init__(self, message: str, attempts: int):
        self.attempts = attempts
        super().__init__(f"{message} (after {attempts} attempts)")


class FixtureMiss(ModelError, KeyError):
    def __str__(self):
        return self.args[0]


def prompt_sha256(prompt: str) -> str:
    return hashlib.sha256(prompt.encode()).hexdigest()


def temperature_bucket(t: float) -> str:
    return f"{round(t, 1):.1f}"


class HttpModel:
    """Completion-style HTTP endpoint (OpenAI ``/v1/completions`` shape)."""

    def __init__(self, endpoint: str, api_key: str | None = None, timeout: float = 60.0,
                 max_in_flight: int = 4, retries: int = 3, backoff: float = 0.5, model: str | None = None):
        self.endpoint = endpoint
        self.api_key = api_key
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.model = model
        self._slots = threading.BoundedSemaphore(max_in_flight)

    def generate(self, prompt: str, params: GenParams) -> list[str]:
        import requests

        payload = {"prompt": prompt, "temperature": params.temperature,
                   "max_tokens": params.max_tokens, "n": params.n_samples}
        if params.stop:
            payload["stop"] = params.stop
        if self.model:
            payload["model"] = self.model
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        last = "no attempt made"
        for attempt in range(1, self.retries + 1):
            try:
                with self._slots:
                    resp = requests.post(self.endpoint, json=payload, headers=headers, timeout=self.timeout)
                if resp.status_code >= 500 or resp.status_code == 429:
                    last = f"HTTP {resp.status_code}"
                else:
                    resp.raise_for_status()
                    texts = [c["text"] for c in resp.json()["choices"]]
                    if len(texts) != params.n_samples:
                        raise ModelError(f"expected {params.n_samples} choices, got {len(texts)}")
                    if params.stop_after_counts:
                        texts = [_truncate_at_ir(t) for t in texts]
                    return texts
            except requests.HTTPError as e:
                raise ModelError(f"model endpoint rejected request: {e}") from e
            except (requests.ConnectionError, requests.Timeout) as e:
                last = type(e).__name__
            if attempt < self.retries:
                time.sleep(self.backoff * attempt)
        raise TransportError(f"model endpoint {self.endpoint} failed: {last}", self.retries)

    def describe(self) -> dict:
        return {"kind": "http", "endpoint": self.endpoint}


class ReplayModel:
    """Looks responses up in a JSONL fixture keyed by prompt hash, index and temperature."""

    def __init__(self, fixture_path):
        self.path = Path(fixture_path)
        self.responses: dict[tuple[str, int, str], str] = {}
        with open(self.path) as f:
            for lineno, line in enumerate(f, 1):
                if not line.strip():
                    continue
                rec = json.loads(line)
                if "schema" in rec and "response" not in rec:
                    continue  # header line
                key = (rec["prompt_sha256"], int(rec["index"]), temperature_bucket(float(rec["temperature"])))
                self.responses[key] = rec["response"]

    def generate(self, prompt: str, params: GenParams) -> list[str]:
        sha = prompt_sha256(prompt)
        bucket = temperature_bucket(params.temperature)
        out = []
        for i in range(params.n_samples):
            key = (sha, 0 if params.temperature == 0 else i, bucket)
            if key not in self.responses:
                raise FixtureMiss(f"no replay response for prompt_sha256={key[0]} index={key[1]} "
                                  f"temperature={key[2]}")
            text = self.responses[key]
            out.append(_truncate_at_ir(text) if params.stop_after_counts else text)
        return out

    def describe(self) -> dict:
        return {"kind": "replay", "fixture": str(self.path)}


def replay_record(prompt: str, index: int, temperature: float, response: str) -> dict:
    return {"prompt_sha256": prompt_sha256(prompt), "index": index,
            "temperature": temperature, "response": response}


class ScriptedModel:
    """Returns canned responses in order; ``script`` may also be a callable
    ``(prompt, params, call_index) -> list[str]``. Used for tests and demos."""

    def __init__(self, script):
        self.script = script
        self.prompts: list[str] = []

    def generate(self, prompt: str, params: GenParams) -> list[str]:
        k = len(self.prompts)
        self.prompts.append(prompt)
        if callable(self.script):
            texts = list(self.script(prompt, params, k))
        else:
            texts = [self.script[min(k, len(self.script) - 1)]] * params.n_samples
        if params.stop_after_counts:
            texts = [_truncate_at_ir(t) for t in texts]
        return texts

    def describe(self) -> dict:
        return {"kind": "scripted"}


class CallCounter:
    """Wraps a model and counts generate calls and returned generations."""

    def __init__(self, model):
        self.model = model
        self.calls = 0
        self.generations = 0

    def generate(self, prompt: str, params: GenParams) -> list[str]:
        texts = self.model.generate(prompt, params)
        self.calls += 1
        self.generations += len(texts)
        return texts

    def describe(self) -> dict:
        return self.model.describe()


def generate(prompt: str, params: GenParams, model) -> list[str]:
    if not prompt:
        raise ValueError("prompt must be non-empty")
    texts = model.generate(prompt, params)
    if len(texts) != params.n_samples:
        raise ModelError(f"model returned {len(texts)} texts for n_samples={params.n_samples}")
    return texts


def softmax_choice(rng: random.Random, scores: dict, temperature: float):
    """Sample a key by softmax(score / temperature); argmax at temperature 0."""
    keys = sorted(scores)
    if temperature == 0:
        return max(keys, key=lambda k: (scores[k], -keys.index(k)))
    top = max(scores.values())
    weights = [math.exp((scores[k] - top) / temperature) for k in keys]
    return rng.choices(keys, weights)[0]
