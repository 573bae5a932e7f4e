"""Shared test utilities: independent oracles and tiny builders.

The membership oracle for the judge's output language is written as a
regular expression so that automaton bugs cannot leak into expectations.
"""

from __future__ import annotations

import shutil
from pathlib import Path
import re

from capjudge.vocab import Vocabulary

_ESCAPE = r'\\(?:["\\/bfnrt]|u[0-9a-fA-F]{4})'
_CHAR = r'[^"\\\x00-\x1f]'
_STRING = f'"(?:{_CHAR}|{_ESCAPE})*"'
_INT = r"(?:0|[1-9][0-9]?|100)"

#: Full-match oracle for the constrained output language.
SCHEMA_RE = re.compile(
    r'\{"score": ?' + _INT + r', ?"reason": ?' + _STRING + r"\}"
)


def text_vocab(*tokens: str, eos: str = "</s>") -> Vocabulary:
    """Tiny vocabulary with the eos token at id 0 and the rest in order."""
    return Vocabulary(tokens=(eos, *tokens), eos_id=0)


def stage_eval_inputs(fixtures: Path, stage: Path) -> None:
    """Copy the eval fixtures into ``stage`` under their canonical names.

    The report manifest embeds the model specifier string, which contains a
    relative path; replays must therefore run from a directory holding the
    same file names the golden run used.
    """
    for name in ("pairs.jsonl", "pairs.jsonl.sha256", "responses.json"):
        shutil.copy(fixtures / name, stage / name)
