"""A small SSA-style IR with a real pass-ordering problem."""
from .corpus import CorpusConfig, generate_corpus, random_module
from .interp import Trap, interpret
from .ir import Block, Function, Instr, IRModule
from .parser import IRError, IRSyntaxError, VerifyError, parse_module, verify
from .passes import (
    MAX_PIPELINE_LENGTH,
    PASS_NAMES,
    REFERENCE_PIPELINE,
    UnknownPassError,
    apply_pass,
    apply_pipeline,
    reference_oz,
)

__all__ = [
    "Block", "CorpusConfig", "Function", "IRError", "IRModule", "IRSyntaxError",
    "Instr", "MAX_PIPELINE_LENGTH", "PASS_NAMES", "REFERENCE_PIPELINE", "Trap",
    "UnknownPassError", "VerifyError", "apply_pass", "apply_pipeline",
    "generate_corpus", "interpret", "parse_module", "random_module",
    "reference_oz", "verify",
]
