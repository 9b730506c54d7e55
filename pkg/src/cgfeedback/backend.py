"""Compiler backends: validate pass lists, compile IR, check compilability.

Compiler failures are returned as data (``CompileResult.ok`` false) rather
than raised, since feedback construction has to report them to the model.
"""
from __future__ import annotations

import functools
import os
import shlex
import shutil
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .irtext import count_instructions_text
from .mir import IRError, apply_pass, parse_module, verify
from .mir.passes import MAX_PIPELINE_LENGTH, PASS_NAMES, REFERENCE_PIPELINE


class BackendConfigError(Exception):
    pass


@dataclass(frozen=True)
class PassCatalog:
    names: frozenset
    reference_pipeline: tuple[str, ...]
    max_length: int = MAX_PIPELINE_LENGTH

    def __post_init__(self):
        if not self.names:
            raise BackendConfigError("pass catalog is empty")
        missing = [p for p in self.reference_pipeline if p not in self.names]
        if missing:
            raise BackendConfigError(f"reference pipeline uses passes not in catalog: {missing}")

    @classmethod
    def from_file(cls, path, max_length: int = MAX_PIPELINE_LENGTH) -> PassCatalog:
        """First line: the reference pipeline; then one pass name per line."""
        path = Path(path)
        try:
            lines = path.read_text().splitlines()
        except OSError as e:
            raise BackendConfigError(f"cannot read pass catalog {path}: {e.strerror}") from e
        lines = [l.strip() for l in lines if l.strip() and not l.strip().startswith("#")]
        if not lines:
            raise BackendConfigError(f"pass catalog {path} is empty")
        reference = tuple(lines[0].replace(",", " ").split())
        names = frozenset(lines[1:]) | frozenset(reference)
        return cls(names, reference, max_length)

    def sorted_names(self) -> list[str]:
        return sorted(self.names)


MINI_CATALOG = PassCatalog(frozenset(PASS_NAMES), REFERENCE_PIPELINE)


@dataclass(frozen=True)
class Validity:
    valid: bool
    unknown_names: tuple[str, ...] = ()
    too_long: bool = False

    def message(self) -> str:
        parts = []
        if self.unknown_names:
            parts.append("unknown passes: " + " ".join(self.unknown_names))
        if self.too_long:
            parts.append("pass list too long")
        return "; ".join(parts)


@dataclass(frozen=True)
class CompileResult:
    ok: bool
    compiled_ir: str | None = None
    inst_count: int | None = None
    error_message: str | None = None


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    message: str | None = None


def validate_pass_list(passes, catalog: PassCatalog) -> Validity:
    unknown = tuple(dict.fromkeys(p for p in passes if p not in catalog.names))
    too_long = len(passes) > catalog.max_length
    return Validity(not unknown and not too_long, unknown, too_long)


def _first_line(text: str) -> str:
    for line in text.splitlines():
        if line.strip():
            return line.strip()
    return ""


# Parsing and pipeline prefixes are memoised: the autotuner evaluates many
# pipelines that share prefixes on the same source.
@functools.lru_cache(maxsize=2048)
def _parse_cached(ir_text: str):
    try:
        return parse_module(ir_text)
    except IRError as e:
        return e


@functools.lru_cache(maxsize=65536)
def _run_cached(ir_text: str, passes: tuple[str, ...]):
    if not passes:
        return _parse_cached(ir_text)
    return apply_pass(_run_cached(ir_text, passes[:-1]), passes[-1], check=False)


@functools.lru_cache(maxsize=65536)
def _compile_cached(ir_text: str, passes: tuple[str, ...]) -> CompileResult:
    parsed = _parse_cached(ir_text)
    if isinstance(parsed, IRError):
        return CompileResult(False, error_message=_first_line(str(parsed)))
    module = _run_cached(ir_text, passes)
    verify(module)
    out = module.render()
    return CompileResult(True, out, count_instructions_text(out))


class MiniBackend:
    name = "mini"

    def __init__(self, catalog: PassCatalog = MINI_CATALOG):
        self.catalog = catalog

    def validate(self, passes) -> Validity:
        return validate_pass_list(passes, self.catalog)

    def compile(self, ir_text: str, passes) -> CompileResult:
        passes = tuple(passes)
        validity = self.validate(passes)
        if not validity.valid:
            return CompileResult(False, error_message="invalid pass list: " + validity.message())
        return _compile_cached(ir_text, passes)

    def check_compilable(self, ir_text: str) -> CheckResult:
        parsed = _parse_cached(ir_text)
        if isinstance(parsed, IRError):
            return CheckResult(False, _first_line(str(parsed)))
        return CheckResult(True)

    def describe(self) -> dict:
        return {"kind": "mini"}


class ExternalBackend:
    """Runs an optimizer binary per call, e.g. LLVM ``opt``.

    ``arg_template`` is split shell-style; ``{input}`` and ``{passes}`` are
    substituted per argument, so paths with spaces need no quoting.
    """

    name = "external"

    def __init__(self, binary, catalog: PassCatalog,
                 arg_template: str = "{input} -passes={passes} -S -o -",
                 timeout: float = 30.0, pass_separator: str = ","):
        resolved = shutil.which(str(binary))
        if resolved is None:
            raise BackendConfigError(f"optimizer binary not found: {binary}")
        self.binary = resolved
        self.catalog = catalog
        self.arg_template = arg_template
        self.timeout = timeout
        self.pass_separator = pass_separator

    def validate(self, passes) -> Validity:
        return validate_pass_list(passes, self.catalog)

    def _invoke(self, ir_text: str, passes) -> CompileResult:
        with tempfile.TemporaryDirectory(prefix="cgfb-") as tmp:
            path = os.path.join(tmp, "input.ll")
            with open(path, "w") as f:
                f.write(ir_text)
            joined = self.pass_separator.join(passes)
            argv = [self.binary] + [
                a.replace("{input}", path).replace("{passes}", joined)
                for a in shlex.split(self.arg_template)
            ]
            try:
                proc = subprocess.run(argv, capture_output=True, text=True, timeout=self.timeout)
            except subprocess.TimeoutExpired:
                return CompileResult(False, error_message="timeout")
            except OSError as e:
                return CompileResult(False, error_message=f"cannot run {self.binary}: {e.strerror}")
        if proc.returncode != 0:
            msg = _first_line(proc.stderr) or _first_line(proc.stdout) or f"exit status {proc.returncode}"
            return CompileResult(False, error_message=msg)
        return CompileResult(True, proc.stdout, count_instructions_text(proc.stdout))

    def compile(self, ir_text: str, passes) -> CompileResult:
        passes = tuple(passes)
        validity = self.validate(passes)
        if not validity.valid:
            return CompileResult(False, error_message="invalid pass list: " + validity.message())
        return self._invoke(ir_text, passes)

    def check_compilable(self, ir_text: str) -> CheckResult:
        if not ir_text.strip():
            return CheckResult(False, "empty module")
        result = self._invoke(ir_text, ())
        return CheckResult(True) if result.ok else CheckResult(False, result.error_message)

    def describe(self) -> dict:
        return {"kind": "external", "binary": self.binary, "arg_template": self.arg_template,
                "timeout": self.timeout, "reference_pipeline": list(self.catalog.reference_pipeline),
                "passes": self.catalog.sorted_names()}


def compile(ir_text: str, passes, backend) -> CompileResult:
    return backend.compile(ir_text, passes)


def check_compilable(ir_text: str, backend) -> CheckResult:
    return backend.check_compilable(ir_text)


def source_count(ir_text: str, backend) -> int:
    """Instruction count of ``ir_text`` as the backend sees it (identity pipeline)."""
    result = backend.compile(ir_text, ())
    if not result.ok:
        raise ValueError(f"source IR does not compile: {result.error_message}")
    return result.inst_count
