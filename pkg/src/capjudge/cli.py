"""Command-line interface: judge, eval, build-index, cache, compare, convert.

Configuration precedence is flags over config-file values over built-in
defaults; the effective configuration is echoed into every report manifest.
The config file is plain ``KEY=VALUE`` lines (``#`` comments allowed). API
keys are read exclusively from environment variables — there is no flag or
config key for them, so credentials can never leak into shell history or
report manifests.

Exit codes are stable for scripting: 0 success, 1 runtime failure (backend,
parse, or data errors — reported as a structured JSON line on stderr),
2 usage error.

Model specifiers accepted by ``--model``:

- ``uniform[@VOCAB]`` — local constrained generation, all tokens equally
  likely (offline smoke backend; VOCAB is a vocabulary JSON path, default a
  built-in synthetic vocabulary)
- ``biased:SCORE[@VOCAB]`` — local constrained generation steered to emit
  the given integer score
- ``scripted:PATH`` — replay a recorded response table (JSON file)
- ``remote:MODEL[@BASE_URL]`` — chat-completion endpoint; the key is taken
  from ``$CAPJUDGE_API_KEY``

Tie-breaker specifiers for ``--tiebreaker``: ``none``, ``random``,
``random:SEED`` (fixed-seed stream), ``embedding``, ``embedding:mean``,
``external:URL``. When no tie-breaker is configured the default is the
external scorer from ``$CAPJUDGE_SCORER_ENDPOINT`` (or the ``endpoint``
config key) with ε = 0.25; without an endpoint it falls back to embedding
tie-breaking over the built-in mock embedder and says so on stderr.
"""

from __future__ import annotations

import functools
import json
import os
import time
from dataclasses import dataclass
from pathlib import Path

import click

from .backends.base import ChatBackend, EmbeddingBackend
from .backends.cache import (
    CachingChatBackend,
    CachingEmbeddingBackend,
    ResponseCache,
)
from .backends.local import LocalChatBackend
from .backends.mocks import (
    BiasedLogits,
    MockEmbeddingBackend,
    ScriptedChatBackend,
    UniformLogits,
)
from .backends.remote import RemoteChatBackend
from .dataset import CsvColumnMap, convert_csv, dataset_digest, load_dataset
from .errors import CapjudgeError
from .grammar import (
    DecodingParams,
    SchemaGrammar,
    TokenMaskIndex,
    build_mask_index,
    compile_schema,
)
from .harness import (
    compare_runs,
    evaluate,
    load_report,
    render_comparison,
    render_table,
)
from .judge import (
    CaptionInput,
    PromptTemplate,
    ensemble_judge,
    judge as judge_caption,
    load_template,
)
from .metrics import METRICS
from .tiebreak import TieBreakerConfig, gamma_external, make_tiebreaker
from .vocab import Vocabulary, load_vocabulary, synthetic_vocabulary

METRIC_CHOICES = ("clair_a", "clair_ae", "bleu1", "bleu4", "rougel", "external")
SCORER_ENDPOINT_ENV = "CAPJUDGE_SCORER_ENDPOINT"
DEFAULT_EPSILON = 0.25
_DEFAULT_REMOTE_BASE = "https://api.openai.com/v1"
_DEFAULT_VOCAB_SIZE = 512

_CONFIG_KEYS = frozenset(
    {
        "metric",
        "model",
        "models",
        "epsilon",
        "tiebreaker",
        "template",
        "dataset",
        "cache_dir",
        "parallelism",
        "tie_policy",
        "seed",
        "temperature",
        "max_tokens",
        "endpoint",
    }
)


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run settings, validated once, echoed into manifests."""

    metric: str
    models: tuple[str, ...]
    epsilon: float
    tiebreaker: TieBreakerConfig
    template_tag: str
    params: DecodingParams
    parallelism: int
    cache_dir: str | None
    dataset: str | None
    tie_policy: str

    def __post_init__(self):
        if self.metric not in METRIC_CHOICES:
            raise ValueError(
                f"metric must be one of {METRIC_CHOICES}, got {self.metric!r}"
            )
        if self.metric == "clair_ae" and len(self.models) < 2:
            raise ValueError("clair_ae is an ensemble and needs at least 2 models")
        if self.metric == "clair_a" and len(self.models) != 1:
            raise ValueError("clair_a takes exactly one model")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.parallelism < 1:
            raise ValueError(f"parallelism must be >= 1, got {self.parallelism}")

    def to_manifest(self) -> dict:
        return {
            "metric": self.metric,
            "models": list(self.models),
            "epsilon": self.epsilon,
            "tiebreaker": self.tiebreaker.to_dict(),
            "template": self.template_tag,
            "params": self.params.to_dict(),
            "parallelism": self.parallelism,
            "cache_dir": self.cache_dir,
            "tie_policy": self.tie_policy,
        }


def _fail_runtime(exc: CapjudgeError) -> "SystemExit":
    payload = {"error": type(exc).__name__, "message": str(exc), **exc.context}
    click.echo(json.dumps(payload, sort_keys=True, default=str), err=True)
    return SystemExit(1)


def _runtime_errors(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except CapjudgeError as exc:
            raise _fail_runtime(exc) from exc

    return wrapper


def _parse_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for line_number, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise click.UsageError(
                f"{path}:{line_number}: expected KEY=VALUE, got {stripped!r}"
            )
        key, _, value = stripped.partition("=")
        key = key.strip().lower()
        if key not in _CONFIG_KEYS:
            raise click.UsageError(f"{path}:{line_number}: unknown config key {key!r}")
        values[key] = value.strip()
    return values


def _pick(flag_value, file_config: dict, key: str, default):
    if flag_value is not None:
        return flag_value
    if key in file_config:
        return file_config[key]
    return default


def _pick_models(flag_models: tuple[str, ...], file_config: dict) -> tuple[str, ...]:
    if flag_models:
        return flag_models
    raw = file_config.get("models") or file_config.get("model")
    if raw:
        return tuple(m.strip() for m in raw.split(",") if m.strip())
    return ("uniform",)


def _parse_tiebreaker(
    spec: str | None, endpoint: str | None
) -> tuple[TieBreakerConfig, bool]:
    """Returns (config, used_mock_fallback)."""
    if spec is None:
        if endpoint:
            return TieBreakerConfig(kind="external", endpoint=endpoint), False
        return TieBreakerConfig(kind="embedding"), True
    kind, _, arg = spec.partition(":")
    if kind == "none":
        return TieBreakerConfig(kind="none"), False
    if kind == "random":
        if arg:
            try:
                seed = int(arg)
            except ValueError:
                raise click.UsageError(
                    f"random tie-breaker seed must be an integer, got {arg!r}"
                ) from None
            return TieBreakerConfig(kind="random", seed_policy=seed), False
        return TieBreakerConfig(kind="random"), False
    if kind == "embedding":
        aggregation = arg or "max"
        if aggregation not in ("max", "mean"):
            raise click.UsageError(
                f"embedding aggregation must be max or mean, got {arg!r}"
            )
        return TieBreakerConfig(kind="embedding", aggregation=aggregation), False
    if kind == "external":
        target = arg or endpoint
        if not target:
            raise click.UsageError(
                "external tie-breaking needs an endpoint: use external:URL, the "
                f"endpoint config key, or ${SCORER_ENDPOINT_ENV}"
            )
        return TieBreakerConfig(kind="external", endpoint=target), False
    raise click.UsageError(
        f"unknown tie-breaker {spec!r}; expected none, random[:SEED], "
        "embedding[:max|mean], or external[:URL]"
    )


_COMMON_OPTIONS = [
    click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None, help="KEY=VALUE config file."),
    click.option("--metric", type=click.Choice(METRIC_CHOICES), default=None, help="Scoring method."),
    click.option("--model", "models", multiple=True, help="Model specifier; repeatable for ensembles."),
    click.option("--epsilon", type=float, default=None, help="Tie-breaker weight (>= 0)."),
    click.option("--tiebreaker", "tiebreaker_spec", default=None, help="none | random[:SEED] | embedding[:max|mean] | external[:URL]"),
    click.option("--template", "template_tag", default=None, help="Prompt template language tag (default en)."),
    click.option("--template-dir", default=None, type=click.Path(file_okay=False), help="Directory of custom template files."),
    click.option("--dataset", default=None, type=click.Path(dir_okay=False), help="JSON-lines preference dataset."),
    click.option("--cache-dir", default=None, type=click.Path(file_okay=False), help="Response cache directory."),
    click.option("--parallelism", type=int, default=None, help="Concurrent pair scoring bound (default 1)."),
    click.option("--tie-policy", type=click.Choice(["incorrect", "half"]), default=None, help="How equal scores count (default incorrect)."),
    click.option("--seed", type=int, default=None, help="Decoding seed (default 0)."),
    click.option("--temperature", type=float, default=None, help="Decoding temperature (default 0)."),
    click.option("--max-tokens", type=int, default=None, help="Decoding token budget (default 512)."),
]


def _with_common_options(func):
    for option in reversed(_COMMON_OPTIONS):
        func = option(func)
    return func


class _Runtime:
    """Resolved config plus lazily built backends for one invocation."""

    def __init__(self, config: RunConfig, template_dir: str | None, mock_fallback: bool):
        self.config = config
        self.template_dir = template_dir
        self.mock_fallback = mock_fallback
        self.cache = ResponseCache(config.cache_dir) if config.cache_dir else None
        self._indices: dict[str, TokenMaskIndex] = {}
        self._chat_backends: list = []
        self._embed_backend = None
        self._grammar = SchemaGrammar()
        self._automaton = None

    # -- grammar/vocab plumbing -----------------------------------------

    def _index_for(self, vocab: Vocabulary) -> TokenMaskIndex:
        key = vocab.digest()
        if key not in self._indices:
            if self._automaton is None:
                self._automaton = compile_schema(self._grammar)
            self._indices[key] = build_mask_index(
                self._automaton, vocab, self._grammar.fingerprint()
            )
        return self._indices[key]

    def _vocab_from(self, path: str | None) -> Vocabulary:
        if path:
            return load_vocabulary(path)
        return synthetic_vocabulary(_DEFAULT_VOCAB_SIZE)

    # -- backend construction -------------------------------------------

    def _build_chat_backend(self, spec: str) -> ChatBackend:
        head, _, tail = spec.partition(":")
        if head == "uniform":
            vocab = self._vocab_from(tail.lstrip("@") or None)
            index = self._index_for(vocab)
            return LocalChatBackend(
                UniformLogits(vocab.size), index, backend_id=f"local:{spec}"
            )
        if head == "biased":
            score_part, _, vocab_part = tail.partition("@")
            try:
                score = int(score_part)
            except ValueError:
                raise click.UsageError(
                    f"biased model needs an integer score, got {spec!r}"
                ) from None
            if not 0 <= score <= 100:
                raise click.UsageError("biased model score must be in [0, 100]")
            vocab = self._vocab_from(vocab_part or None)
            index = self._index_for(vocab)
            target = json.dumps({"score": score, "reason": "fixture"})
            return LocalChatBackend(
                BiasedLogits(vocab, target), index, backend_id=f"local:{spec}"
            )
        if head == "scripted":
            if not tail:
                raise click.UsageError("scripted model needs a file: scripted:PATH")
            return ScriptedChatBackend.from_file(tail)
        if head == "remote":
            if not tail:
                raise click.UsageError("remote model needs a name: remote:MODEL[@URL]")
            model, _, base_url = tail.partition("@")
            return RemoteChatBackend(model, base_url or _DEFAULT_REMOTE_BASE)
        raise click.UsageError(
            f"unknown model specifier {spec!r}; expected uniform[@VOCAB], "
            "biased:SCORE[@VOCAB], scripted:PATH, or remote:MODEL[@URL]"
        )

    def chat_backends(self) -> list[ChatBackend]:
        if not self._chat_backends:
            for spec in self.config.models:
                backend = self._build_chat_backend(spec)
                if self.cache is not None:
                    backend = CachingChatBackend(backend, self.cache)
                self._chat_backends.append(backend)
        return self._chat_backends

    def embed_backend(self) -> EmbeddingBackend:
        if self._embed_backend is None:
            backend = MockEmbeddingBackend()
            if self.cache is not None:
                backend = CachingEmbeddingBackend(backend, self.cache)
            self._embed_backend = backend
        return self._embed_backend

    def template(self) -> PromptTemplate:
        return load_template(self.config.template_tag, self.template_dir)

    def tiebreaker(self):
        if self.mock_fallback:
            click.echo(
                "note: no external scorer endpoint configured; using embedding "
                "tie-breaking over the built-in mock embedder "
                f"(set ${SCORER_ENDPOINT_ENV} or --tiebreaker to change this)",
                err=True,
            )
        if self.config.tiebreaker.kind == "embedding":
            return make_tiebreaker(
                self.config.tiebreaker, embed_backend=self.embed_backend()
            )
        return make_tiebreaker(self.config.tiebreaker)

    # -- metric assembly -------------------------------------------------

    def metric_fn(self):
        metric = self.config.metric
        if metric in METRICS:
            return METRICS[metric]
        if metric == "external":
            endpoint = self.config.tiebreaker.endpoint
            if not endpoint:
                raise click.UsageError(
                    "metric external needs a scorer endpoint (see --tiebreaker "
                    f"external:URL or ${SCORER_ENDPOINT_ENV})"
                )
            return lambda candidate, references: gamma_external(
                CaptionInput(candidate, references), endpoint
            )
        template = self.template()
        tiebreaker = self.tiebreaker()
        backends = self.chat_backends()
        epsilon = self.config.epsilon
        params = self.config.params
        if metric == "clair_a":
            backend = backends[0]
            return lambda candidate, references: judge_caption(
                CaptionInput(candidate, references),
                backend,
                template,
                tiebreaker,
                epsilon,
                params=params,
            ).value
        assert metric == "clair_ae"
        return lambda candidate, references: ensemble_judge(
            CaptionInput(candidate, references),
            backends,
            template,
            tiebreaker,
            epsilon,
            params=params,
        ).value

    def cache_stats(self) -> dict:
        hits = misses = network = 0
        tracked = False
        for backend in self._chat_backends:
            if isinstance(backend, CachingChatBackend):
                tracked = True
                stats = backend.stats()
                hits += stats["hits"]
                misses += stats["misses"]
                network += stats["network_calls"]
        if isinstance(self._embed_backend, CachingEmbeddingBackend):
            tracked = True
            hits += self._embed_backend.hits
            misses += self._embed_backend.misses
            network += self._embed_backend.network_calls
        if not tracked:
            return {}
        return {"hits": hits, "misses": misses, "network_calls": network}


def _resolve_runtime(
    config_path,
    metric,
    models,
    epsilon,
    tiebreaker_spec,
    template_tag,
    template_dir,
    dataset,
    cache_dir,
    parallelism,
    tie_policy,
    seed,
    temperature,
    max_tokens,
    *,
    default_metric: str = "clair_a",
) -> _Runtime:
    file_config = _parse_config_file(config_path) if config_path else {}
    endpoint = file_config.get("endpoint") or os.environ.get(SCORER_ENDPOINT_ENV)
    tiebreaker_value = _pick(tiebreaker_spec, file_config, "tiebreaker", None)
    tiebreaker, mock_fallback = _parse_tiebreaker(tiebreaker_value, endpoint)
    try:
        params = DecodingParams(
            temperature=float(_pick(temperature, file_config, "temperature", 0.0)),
            max_tokens=int(_pick(max_tokens, file_config, "max_tokens", 512)),
            seed=int(_pick(seed, file_config, "seed", 0)),
        )
        config = RunConfig(
            metric=str(_pick(metric, file_config, "metric", default_metric)),
            models=_pick_models(tuple(models), file_config),
            epsilon=float(_pick(epsilon, file_config, "epsilon", DEFAULT_EPSILON)),
            tiebreaker=tiebreaker,
            template_tag=str(_pick(template_tag, file_config, "template", "en")),
            params=params,
            parallelism=int(_pick(parallelism, file_config, "parallelism", 1)),
            cache_dir=_pick(cache_dir, file_config, "cache_dir", None),
            dataset=_pick(dataset, file_config, "dataset", None),
            tie_policy=str(_pick(tie_policy, file_config, "tie_policy", "incorrect")),
        )
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc
    return _Runtime(config, template_dir, mock_fallback)


@click.group()
@click.version_option(package_name="capjudge")
def main():
    """Grammar-constrained caption judging and pairwise evaluation."""


@main.command("judge")
@click.argument("candidate")
@click.argument("references", nargs=-1, required=True)
@_with_common_options
@_runtime_errors
def cmd_judge(candidate, references, template_dir, **options):
    """Score CANDIDATE against one or more REFERENCES."""
    runtime = _resolve_runtime(template_dir=template_dir, **options)
    config = runtime.config
    caption_input = CaptionInput(candidate, references)
    template = runtime.template()
    tiebreaker = runtime.tiebreaker()
    backends = runtime.chat_backends()
    if config.metric == "clair_ae":
        result = ensemble_judge(
            caption_input,
            backends,
            template,
            tiebreaker,
            config.epsilon,
            params=config.params,
        )
    else:
        result = judge_caption(
            caption_input,
            backends[0],
            template,
            tiebreaker,
            config.epsilon,
            params=config.params,
        )
    click.echo(f"value: {result.value:.4f}")
    click.echo(f"llm: {result.llm:.4f}")
    click.echo(f"gamma: {result.gamma:.4f}")
    click.echo(f"epsilon: {result.epsilon}")
    if result.per_model:
        for entry in result.per_model:
            click.echo(f"model {entry.model_id}: llm {entry.llm:.4f}")
    click.echo(f"reason: {result.reason}")


@main.command("eval")
@click.option("--report", "report_path", type=click.Path(dir_okay=False), default=None, help="Write the JSON report here.")
@_with_common_options
@_runtime_errors
def cmd_eval(report_path, template_dir, **options):
    """Evaluate a preference dataset and print the HC/HI/HM/MM table."""
    runtime = _resolve_runtime(template_dir=template_dir, **options)
    config = runtime.config
    if not config.dataset:
        raise click.UsageError("--dataset is required for eval")
    pairs = load_dataset(config.dataset)
    digest = dataset_digest(config.dataset)
    metric = runtime.metric_fn()
    report = evaluate(
        metric,
        pairs,
        metric_id=config.metric,
        tie_policy=config.tie_policy,
        parallelism=config.parallelism,
        dataset_digest=digest,
        config=config.to_manifest(),
        cache_stats=runtime.cache_stats,
    )
    if report_path:
        Path(report_path).write_text(report.to_json(), encoding="utf-8")
        click.echo(f"report written to {report_path}", err=True)
    click.echo(render_table(report))
    cache_stats = report.manifest.get("cache") or {}
    if cache_stats:
        click.echo(
            f"cache: {cache_stats['hits']} hits, {cache_stats['misses']} misses, "
            f"{cache_stats['network_calls']} network calls",
            err=True,
        )


@main.command("build-index")
@click.option("--vocab", "vocab_path", required=True, type=click.Path(exists=True, dir_okay=False), help="Vocabulary JSON ({token: id}) with eos sidecar.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False), help="Where to write the binary index.")
@_runtime_errors
def cmd_build_index(vocab_path, out_path):
    """Precompute per-state token masks for a vocabulary."""
    vocab = load_vocabulary(vocab_path)
    grammar = SchemaGrammar()
    started = time.perf_counter()
    automaton = compile_schema(grammar)
    index = build_mask_index(automaton, vocab, grammar.fingerprint())
    elapsed = time.perf_counter() - started
    index.save(out_path)
    click.echo(
        f"indexed {vocab.size} tokens across {len(index.states())} reachable "
        f"states ({automaton.n_states} automaton states) in {elapsed:.2f}s"
    )
    click.echo(f"written to {out_path}")


@main.command("compare")
@click.argument("report_a", type=click.Path(exists=True, dir_okay=False))
@click.argument("report_b", type=click.Path(exists=True, dir_okay=False))
@_runtime_errors
def cmd_compare(report_a, report_b):
    """Print per-category accuracy deltas between two run reports."""
    delta = compare_runs(load_report(report_a), load_report(report_b))
    click.echo(f"{delta['metric_a']} minus {delta['metric_b']}")
    click.echo(render_comparison(delta))


@main.group("cache")
def cmd_cache():
    """Inspect or clear the response cache."""


@cmd_cache.command("stats")
@click.option("--cache-dir", required=True, type=click.Path(file_okay=False))
@_runtime_errors
def cmd_cache_stats(cache_dir):
    """Print record count and size for a cache directory."""
    click.echo(json.dumps(ResponseCache(cache_dir).stats(), indent=2, sort_keys=True))


@cmd_cache.command("clear")
@click.option("--cache-dir", required=True, type=click.Path(file_okay=False))
@_runtime_errors
def cmd_cache_clear(cache_dir):
    """Delete every record in a cache directory."""
    removed = ResponseCache(cache_dir).clear()
    click.echo(f"removed {removed} records")


@main.command("convert")
@click.argument("csv_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_path", type=click.Path(dir_okay=False))
@click.option("--id-col", default="id", show_default=True)
@click.option("--category-col", default="category", show_default=True)
@click.option("--caption-a-col", default="caption_a", show_default=True)
@click.option("--caption-b-col", default="caption_b", show_default=True)
@click.option("--preferred-col", default="preferred", show_default=True)
@click.option("--reference-col", "reference_cols", multiple=True, help="Explicit reference column; repeatable.")
@click.option("--reference-prefix", default="reference", show_default=True, help="Used when no explicit reference columns are given.")
@_runtime_errors
def cmd_convert(
    csv_path,
    out_path,
    id_col,
    category_col,
    caption_a_col,
    caption_b_col,
    preferred_col,
    reference_cols,
    reference_prefix,
):
    """Convert a preference CSV into the canonical JSON-lines dataset."""
    columns = CsvColumnMap(
        id_column=id_col,
        category_column=category_col,
        caption_a_column=caption_a_col,
        caption_b_column=caption_b_col,
        preferred_column=preferred_col,
        reference_columns=tuple(reference_cols),
        reference_prefix=reference_prefix,
    )
    count = convert_csv(csv_path, out_path, columns=columns)
    click.echo(f"wrote {count} pairs to {out_path}")


if __name__ == "__main__":
    main()
