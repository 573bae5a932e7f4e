"""Schema-constrained decoding: automaton, token masks, generation."""

from .automaton import TERMINAL, CharAutomaton, SchemaGrammar, compile_schema
from .generate import DecodingParams, LogitSource, constrained_generate
from .masks import (
    TokenMaskIndex,
    brute_force_mask,
    build_mask_index,
    scan_stats,
)

__all__ = [
    "TERMINAL",
    "CharAutomaton",
    "SchemaGrammar",
    "compile_schema",
    "DecodingParams",
    "LogitSource",
    "constrained_generate",
    "TokenMaskIndex",
    "brute_force_mask",
    "build_mask_index",
    "scan_stats",
]
