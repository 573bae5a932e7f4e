"""Caption judging: prompt rendering, verdict parsing, score composition.

The pipeline is: render the evaluation prompt for (candidate, references),
obtain the model's JSON verdict, map the 0-100 integer score to [0, 1],
evaluate the tie-breaker, and combine them as ``llm + epsilon * gamma``.
Composite values are never clamped — the measure is used ordinally, and
clamping would erase tie-breaking among top-scoring candidates — so the
result lives in [0, 1 + epsilon].
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import TYPE_CHECKING, Callable, Sequence

from .digests import prompt_digest
from .errors import (
    CapjudgeError,
    DomainError,
    MalformedVerdict,
    RangeViolation,
    SchemaViolation,
    TemplateError,
)
from .grammar.generate import DecodingParams

if TYPE_CHECKING:
    from .backends.base import ChatBackend

CANDIDATE_SLOT = "{candidate captions}"
REFERENCE_SLOT = "{reference captions}"

#: Everything a tie-breaker needs is the caption input; output must be [0, 1].
TieBreaker = Callable[["CaptionInput"], float]


@dataclass(frozen=True)
class CaptionInput:
    """One candidate caption plus the ordered ground-truth reference set."""

    candidate: str
    references: tuple[str, ...]

    def __init__(self, candidate: str, references: Sequence[str]):
        if not isinstance(candidate, str) or not candidate.strip():
            raise DomainError("candidate caption must be a non-empty string")
        refs = tuple(references)
        if not refs:
            raise DomainError("at least one reference caption is required")
        for i, ref in enumerate(refs):
            if not isinstance(ref, str) or not ref.strip():
                raise DomainError(f"reference {i} must be a non-empty string")
        object.__setattr__(self, "candidate", candidate)
        object.__setattr__(self, "references", refs)


@dataclass(frozen=True)
class PromptTemplate:
    """A prompt body with exactly one candidate slot and one reference slot."""

    language_tag: str
    body: str

    def __post_init__(self):
        for slot in (CANDIDATE_SLOT, REFERENCE_SLOT):
            count = self.body.count(slot)
            if count != 1:
                raise TemplateError(
                    f"template {self.language_tag!r} must contain {slot!r} "
                    f"exactly once, found {count}",
                    language_tag=self.language_tag,
                    slot=slot,
                    count=count,
                )


def _packaged_template_dir():
    return resources.files("capjudge").joinpath("templates")


def available_templates(directory: str | Path | None = None) -> list[str]:
    """Language tags with a template file, sorted."""
    if directory is not None:
        root = Path(directory)
        names = [p.name for p in root.glob("*.txt")] if root.is_dir() else []
    else:
        names = [
            entry.name
            for entry in _packaged_template_dir().iterdir()
            if entry.name.endswith(".txt")
        ]
    return sorted(name[: -len(".txt")] for name in names)

def load_template(
    language_tag: str = "en", directory: str | Path | None = None
) -> PromptTemplate:
    """Load ``<tag>.txt`` from ``directory`` or the packaged template set.

    A single trailing newline (the conventional end-of-file newline) is
    stripped; the rest of the file is the template body verbatim.
    """
    if directory is not None:
        path = Path(directory) / f"{language_tag}.txt"
        if not path.is_file():
            raise TemplateError(
                f"no template file for language tag {language_tag!r} in {directory}",
                language_tag=language_tag,
            )
        raw = path.read_text(encoding="utf-8")
    else:
        res = _packaged_template_dir().joinpath(f"{language_tag}.txt")
        if not res.is_file():
            raise TemplateError(
                f"no packaged template for language tag {language_tag!r}; "
                f"available: {', '.join(available_templates())}",
                language_tag=language_tag,
            )
        raw = res.read_text(encoding="utf-8")
    body = raw[:-1] if raw.endswith("\n") else raw
    return PromptTemplate(language_tag=language_tag, body=body)


def _bulleted(lines: Sequence[str]) -> str:
    return "\n".join(f"- {line}" for line in lines)


def render_prompt(template: PromptTemplate, caption_input: CaptionInput) -> str:
    """Fill both slots; the candidate becomes a one-element bulleted list."""
    for slot in (CANDIDATE_SLOT, REFERENCE_SLOT):
        if template.body.count(slot) != 1:
            raise TemplateError(
                f"template {template.language_tag!r} must contain {slot!r} "
                "exactly once",
                language_tag=template.language_tag,
                slot=slot,
            )
    rendered = template.body.replace(
        CANDIDATE_SLOT, _bulleted([caption_input.candidate])
    )
    return rendered.replace(REFERENCE_SLOT, _bulleted(caption_input.references))


@dataclass(frozen=True)
class JudgeVerdict:
    """The model's parsed answer: an integer score and a free-text reason."""

    score: int
    reason: str

    def __post_init__(self):
        if isinstance(self.score, bool) or not isinstance(self.score, int):
            raise SchemaViolation(
                f"score must be an integer, got {type(self.score).__name__}"
            )
        if not isinstance(self.reason, str):
            raise SchemaViolation(
                f"reason must be a string, got {type(self.reason).__name__}"
            )
        if not 0 <= self.score <= 100:
            raise RangeViolation(
                f"score must be in [0, 100], got {self.score}", score=self.score
            )


_VERDICT_KEYS = frozenset({"score", "reason"})


def _validate_verdict_object(obj: object) -> JudgeVerdict:
    if not isinstance(obj, dict):
        raise SchemaViolation(
            f"verdict must be a JSON object, got {type(obj).__name__}"
        )
    if set(obj) != _VERDICT_KEYS:
        raise SchemaViolation(
            f"verdict keys must be exactly score and reason, got {sorted(obj)}",
            keys=sorted(obj),
        )
    return JudgeVerdict(score=obj["score"], reason=obj["reason"])


def parse_verdict(text: str, *, lenient: bool = False) -> JudgeVerdict:
    """Parse a verdict from model output.

    Strict mode (the default, used for constrained generations) requires the
    text to be exactly one JSON object. Lenient mode, for remote models,
    extracts the first parseable JSON object even when wrapped in prose or
    markdown fences.
    """
    if not lenient:
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MalformedVerdict(
                f"output is not a JSON object: {exc}", snippet=text[:200]
            ) from exc
        return _validate_verdict_object(obj)

    decoder = json.JSONDecoder()
    for match in re.finditer(r"\{", text):
        try:
            obj, _ = decoder.raw_decode(text, match.start())
        except json.JSONDecodeError:
            continue
        return _validate_verdict_object(obj)
    raise MalformedVerdict(
        "no JSON object found in model output", snippet=text[:200]
    )


def normalize_verdict(verdict: JudgeVerdict) -> float:
    """Map the 0-100 integer score onto [0, 1]."""
    return verdict.score / 100


@dataclass(frozen=True)
class ModelScore:
    """One ensemble member's contribution."""

    model_id: str
    llm: float
    reason: str

    def to_dict(self) -> dict:
        return {"model_id": self.model_id, "llm": self.llm, "reason": self.reason}


@dataclass(frozen=True)
class CompositeScore:
    """Final judgement: llm + epsilon * gamma, with full provenance."""

    llm: float
    gamma: float
    epsilon: float
    value: float
    reason: str
    per_model: tuple[ModelScore, ...] | None = None

    def to_dict(self) -> dict:
        out = {
            "llm": self.llm,
            "gamma": self.gamma,
            "epsilon": self.epsilon,
            "value": self.value,
            "reason": self.reason,
        }
        if self.per_model is not None:
            out["per_model"] = [entry.to_dict() for entry in self.per_model]
        return out


def compose_score(
    llm: float,
    gamma: float,
    epsilon: float,
    *,
    reason: str = "",
    per_model: tuple[ModelScore, ...] | None = None,
) -> CompositeScore:
    """Combine the normalized model score with the tie-breaker, unclamped."""
    if not 0.0 <= llm <= 1.0:
        raise DomainError(f"llm score must be in [0, 1], got {llm}", llm=llm)
    if not 0.0 <= gamma <= 1.0:
        raise DomainError(f"gamma must be in [0, 1], got {gamma}", gamma=gamma)
    if not epsilon >= 0.0:
        raise DomainError(f"epsilon must be >= 0, got {epsilon}", epsilon=epsilon)
    return CompositeScore(
        llm=llm,
        gamma=gamma,
        epsilon=epsilon,
        value=llm + epsilon * gamma,
        reason=reason,
        per_model=per_model,
    )


def _attach_context(exc: CapjudgeError, prompt: str, backend_id: str) -> None:
    exc.context.setdefault("prompt_digest", prompt_digest(prompt))
    exc.context.setdefault("backend", backend_id)


def _scored_verdict(
    backend: ChatBackend, prompt: str, params: DecodingParams
) -> JudgeVerdict:
    try:
        raw = backend.complete(prompt, params)
        return parse_verdict(raw, lenient=not backend.strict_output)
    except CapjudgeError as exc:
        _attach_context(exc, prompt, backend.backend_id)
        raise


def judge(
    caption_input: CaptionInput,
    backend: ChatBackend,
    template: PromptTemplate,
    tiebreaker: TieBreaker,
    epsilon: float,
    *,
    params: DecodingParams | None = None,
) -> CompositeScore:
    """Score one candidate against its references with a single model."""
    params = params or DecodingParams()
    prompt = render_prompt(template, caption_input)
    verdict = _scored_verdict(backend, prompt, params)
    try:
        gamma = tiebreaker(caption_input)
        return compose_score(
            normalize_verdict(verdict), gamma, epsilon, reason=verdict.reason
        )
    except CapjudgeError as exc:
        _attach_context(exc, prompt, backend.backend_id)
        raise


def ensemble_judge(
    caption_input: CaptionInput,
    backends: Sequence[ChatBackend],
    template: PromptTemplate,
    tiebreaker: TieBreaker,
    epsilon: float,
    *,
    params: DecodingParams | None = None,
) -> CompositeScore:
    """Average the normalized scores of several models, then compose.

    Any backend failure fails the whole call; the reported reason is the
    first-listed backend's, with every member's verdict kept in per_model.
    """
    if not backends:
        raise DomainError("ensemble requires at least one backend")
    params = params or DecodingParams()
    prompt = render_prompt(template, caption_input)
    members: list[ModelScore] = []
    for backend in backends:
        verdict = _scored_verdict(backend, prompt, params)
        members.append(
            ModelScore(
                model_id=backend.backend_id,
                llm=normalize_verdict(verdict),
                reason=verdict.reason,
            )
        )
    llm_mean = sum(entry.llm for entry in members) / len(members)
    try:
        gamma = tiebreaker(caption_input)
        return compose_score(
            llm_mean,
            gamma,
            epsilon,
            reason=members[0].reason,
            per_model=tuple(members),
        )
    except CapjudgeError as exc:
        _attach_context(exc, prompt, backends[0].backend_id)
        raise
