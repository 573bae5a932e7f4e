"""Chat backend over a local logit-exposing model with grammar constraints."""

from __future__ import annotations

from ..grammar.generate import DecodingParams, LogitSource, constrained_generate
from ..grammar.masks import TokenMaskIndex


class LocalChatBackend:
    """Runs constrained generation against a local model.

    Output is always an exact schema object, so downstream parsing is
    strict. If the model exposes ``bind(prompt)`` it is called to condition
    on the prompt (and must return the logit source to use); prompt-blind
    mocks simply omit it.
    """

    strict_output = True
    is_network = False

    def __init__(
        self,
        model: LogitSource,
        index: TokenMaskIndex,
        backend_id: str = "local",
    ):
        self.model = model
        self.index = index
        self.backend_id = backend_id

    def complete(self, prompt: str, params: DecodingParams) -> str:
        bind = getattr(self.model, "bind", None)
        model = bind(prompt) if callable(bind) else self.model
        return constrained_generate(model, self.index, params)
