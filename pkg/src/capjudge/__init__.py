"""capjudge: grammar-constrained LLM judging for audio captions.

The pipeline scores a candidate caption against reference captions by
prompting a judge model whose output is constrained (or validated) to a
fixed JSON schema, normalizing the integer verdict onto [0, 1], and adding
an epsilon-weighted tie-breaker. A pairwise-preference harness, lexical
baselines, response caching, and a CLI round out the toolkit.
"""

from .backends import (
    BiasedLogits,
    CachingChatBackend,
    CachingEmbeddingBackend,
    ChatBackend,
    EmbeddingBackend,
    LocalChatBackend,
    MockEmbeddingBackend,
    RemoteChatBackend,
    RemoteEmbeddingBackend,
    ResponseCache,
    ScriptedChatBackend,
    UniformLogits,
)
from .dataset import EvalPair, load_dataset, save_dataset
from .errors import CapjudgeError
from .grammar import (
    DecodingParams,
    SchemaGrammar,
    TokenMaskIndex,
    build_mask_index,
    compile_schema,
    constrained_generate,
)
from .harness import CategoryReport, compare_runs, evaluate
from .judge import (
    CaptionInput,
    CompositeScore,
    JudgeVerdict,
    PromptTemplate,
    compose_score,
    ensemble_judge,
    judge,
    load_template,
    normalize_verdict,
    parse_verdict,
    render_prompt,
)
from .metrics import METRICS, bleu, rouge_l
from .tiebreak import (
    TieBreakerConfig,
    gamma_embedding,
    gamma_external,
    gamma_random,
    make_tiebreaker,
)
from .vocab import Vocabulary, load_vocabulary, synthetic_vocabulary

__version__ = "0.1.0"

__all__ = [
    "BiasedLogits",
    "CachingChatBackend",
    "CachingEmbeddingBackend",
    "ChatBackend",
    "EmbeddingBackend",
    "LocalChatBackend",
    "MockEmbeddingBackend",
    "RemoteChatBackend",
    "RemoteEmbeddingBackend",
    "ResponseCache",
    "ScriptedChatBackend",
    "UniformLogits",
    "EvalPair",
    "load_dataset",
    "save_dataset",
    "CapjudgeError",
    "DecodingParams",
    "SchemaGrammar",
    "TokenMaskIndex",
    "build_mask_index",
    "compile_schema",
    "constrained_generate",
    "CategoryReport",
    "compare_runs",
    "evaluate",
    "CaptionInput",
    "CompositeScore",
    "JudgeVerdict",
    "PromptTemplate",
    "compose_score",
    "ensemble_judge",
    "judge",
    "load_template",
    "normalize_verdict",
    "parse_verdict",
    "render_prompt",
    "METRICS",
    "bleu",
    "rouge_l",
    "TieBreakerConfig",
    "gamma_embedding",
    "gamma_external",
    "gamma_random",
    "make_tiebreaker",
    "Vocabulary",
    "load_vocabulary",
    "synthetic_vocabulary",
    "__version__",
]
