"""Model backends: local constrained, remote validated, scripted mocks, cache."""

from .base import ChatBackend, EmbeddingBackend
from .cache import (
    SCHEMA_VERSION,
    CacheRecord,
    CachingChatBackend,
    CachingEmbeddingBackend,
    ResponseCache,
    cache_key,
    embed_cache_key,
)
from .local import LocalChatBackend
from .mocks import (
    BiasedLogits,
    MockEmbeddingBackend,
    ScriptedChatBackend,
    UniformLogits,
)
from .remote import RETRY_INSTRUCTION_V1, RemoteChatBackend, RemoteEmbeddingBackend

__all__ = [
    "ChatBackend",
    "EmbeddingBackend",
    "SCHEMA_VERSION",
    "CacheRecord",
    "CachingChatBackend",
    "CachingEmbeddingBackend",
    "ResponseCache",
    "cache_key",
    "embed_cache_key",
    "LocalChatBackend",
    "BiasedLogits",
    "MockEmbeddingBackend",
    "ScriptedChatBackend",
    "UniformLogits",
    "RETRY_INSTRUCTION_V1",
    "RemoteChatBackend",
    "RemoteEmbeddingBackend",
]
