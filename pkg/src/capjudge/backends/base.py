"""Backend protocols shared by local models, remote endpoints, and mocks.

A chat backend turns a prompt into verdict text; an embedding backend turns
texts into fixed-dimension vectors. ``strict_output`` tells the caller how
hard to be on the response: constrained local generation always emits an
exact schema object, while remote endpoints may wrap it in prose, so their
output is parsed leniently. ``is_network`` marks backends whose calls count
against the network budget (and therefore should sit behind the cache).
"""

from __future__ import annotations

from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from ..grammar.generate import DecodingParams


@runtime_checkable
class ChatBackend(Protocol):
    backend_id: str
    strict_output: bool
    is_network: bool

    def complete(self, prompt: str, params: DecodingParams) -> str: ...


@runtime_checkable
class EmbeddingBackend(Protocol):
    backend_id: str
    is_network: bool

    def embed(self, texts: Sequence[str]) -> np.ndarray: ...
