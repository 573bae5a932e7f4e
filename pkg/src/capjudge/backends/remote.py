"""Remote chat-completion and embedding backends.

Remote endpoints cannot be logit-masked, so schema discipline is enforced
from outside: the request asks for JSON-object output mode, the response is
validated locally, and on validation failure the conversation is reissued
with the model's bad answer plus a fixed corrective instruction appended,
up to a configurable retry budget. The corrective text is versioned so that
cached transcripts stay reproducible if the wording ever changes.

Transport failures (connection errors, timeouts, retryable HTTP statuses)
are retried with exponential backoff and surface as TransportError carrying
the attempt/backoff history. API keys are read from an environment variable
only — never from flags or config files.
"""

from __future__ import annotations

import os
import threading
import time
from typing import Sequence

import numpy as np
import requests

from ..errors import (
    DimensionMismatch,
    DomainError,
    MalformedVerdict,
    RangeViolation,
    SchemaViolation,
    TransportError,
)
from ..grammar.generate import DecodingParams
from ..judge import parse_verdict

RETRY_INSTRUCTION_V1 = (
    "Your previous reply was not a valid JSON object with exactly the keys "
    '"score" (an integer between 0 and 100) and "reason" (a string). '
    "Respond again with only that JSON object and nothing else."
)

_RETRYABLE_STATUSES = frozenset({429, 500, 502, 503, 504})
_DEFAULT_API_KEY_ENV = "CAPJUDGE_API_KEY"


class _Transport:
    """Shared HTTP plumbing: auth header, retries, backoff bookkeeping."""

    def __init__(
        self,
        base_url: str,
        *,
        api_key_env: str = _DEFAULT_API_KEY_ENV,
        timeout: float = 60.0,
        transport_retries: int = 2,
        backoff_base: float = 0.5,
        session: requests.Session | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.transport_retries = transport_retries
        self.backoff_base = backoff_base
        self._session = session

    def session(self) -> requests.Session:
        if self._session is None:
            self._session = requests.Session()
        return self._session

    def headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def post_json(self, path: str, payload: dict) -> dict:
        url = f"{self.base_url}{path}"
        statuses: list[int] = []
        backoffs: list[float] = []
        last_exc: Exception | None = None
        for attempt in range(self.transport_retries + 1):
            if attempt:
                wait = self.backoff_base * (2 ** (attempt - 1))
                backoffs.append(wait)
                time.sleep(wait)
            try:
                response = self.session().post(
                    url, json=payload, headers=self.headers(), timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_exc = exc
                continue
            if response.status_code in _RETRYABLE_STATUSES:
                statuses.append(response.status_code)
                last_exc = None
                continue
            if response.status_code >= 400:
                raise TransportError(
                    f"{url} returned HTTP {response.status_code}",
                    url=url,
                    status=response.status_code,
                    attempts=attempt + 1,
                    statuses=statuses + [response.status_code],
                    backoffs=backoffs,
                    body=response.text[:500],
                )
            try:
                body = response.json()
            except ValueError as exc:
                raise TransportError(
                    f"{url} returned a non-JSON body",
                    url=url,
                    status=response.status_code,
                    attempts=attempt + 1,
                    backoffs=backoffs,
                ) from exc
            if not isinstance(body, dict):
                raise TransportError(
                    f"{url} returned a non-object JSON body", url=url
                )
            return body
        raise TransportError(
            f"{url} unreachable after {self.transport_retries + 1} attempts",
            url=url,
            attempts=self.transport_retries + 1,
            statuses=statuses,
            backoffs=backoffs,
        ) from last_exc


class RemoteChatBackend:
    """Chat backend over the prevailing message-list/choice-list wire format."""

    strict_output = False
    is_network = True

    def __init__(
        self,
        model: str,
        base_url: str,
        *,
        api_key_env: str = _DEFAULT_API_KEY_ENV,
        retry_budget: int = 2,
        timeout: float = 60.0,
        transport_retries: int = 2,
        backoff_base: float = 0.5,
        session: requests.Session | None = None,
    ):
        if retry_budget < 0:
            raise ValueError("retry_budget must be >= 0")
        self.model = model
        self.retry_budget = retry_budget
        self._transport = _Transport(
            base_url,
            api_key_env=api_key_env,
            timeout=timeout,
            transport_retries=transport_retries,
            backoff_base=backoff_base,
            session=session,
        )
        self.backend_id = f"remote:{model}@{self._transport.base_url}"
        self._tls = threading.local()

    @property
    def last_call_retries(self) -> int:
        return getattr(self._tls, "retries", 0)

    @property
    def last_call_usage(self) -> dict:
        return getattr(self._tls, "usage", {})

    def _request_text(self, messages: list[dict], params: DecodingParams) -> str:
        payload = {
            "model": self.model,
            "messages": messages,
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
            "seed": params.seed,
            "response_format": {"type": "json_object"},
        }
        body = self._transport.post_json("/chat/completions", payload)
        usage = body.get("usage")
        if isinstance(usage, dict):
            self._tls.usage = {
                k: v for k, v in usage.items() if isinstance(v, int)
            }
        try:
            content = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise TransportError(
                "response lacks choices[0].message.content",
                body_keys=sorted(body) if isinstance(body, dict) else None,
            ) from None
        if not isinstance(content, str):
            raise TransportError("message content is not a string")
        return content

    def complete(self, prompt: str, params: DecodingParams) -> str:
        messages: list[dict] = [{"role": "user", "content": prompt}]
        self._tls.retries = 0
        self._tls.usage = {}
        last_error: Exception | None = None
        last_output = ""
        for attempt in range(self.retry_budget + 1):
            raw = self._request_text(messages, params)
            try:
                parse_verdict(raw, lenient=True)
            except (MalformedVerdict, SchemaViolation, RangeViolation) as exc:
                last_error = exc
                last_output = raw
                messages = messages + [
                    {"role": "assistant", "content": raw},
                    {"role": "user", "content": RETRY_INSTRUCTION_V1},
                ]
                self._tls.retries = attempt + 1
                continue
            self._tls.retries = attempt
            return raw
        raise MalformedVerdict(
            f"no valid verdict after {self.retry_budget} corrective retries",
            retries=self.retry_budget,
            snippet=last_output[:200],
        ) from last_error


class RemoteEmbeddingBackend:
    """Embedding backend over the common /embeddings wire format."""

    is_network = True

    def __init__(
        self,
        model: str,
        base_url: str,
        *,
        api_key_env: str = _DEFAULT_API_KEY_ENV,
        timeout: float = 60.0,
        transport_retries: int = 2,
        backoff_base: float = 0.5,
        session: requests.Session | None = None,
    ):
        self.model = model
        self._transport = _Transport(
            base_url,
            api_key_env=api_key_env,
            timeout=timeout,
            transport_retries=transport_retries,
            backoff_base=backoff_base,
            session=session,
        )
        self.backend_id = f"remote-embed:{model}@{self._transport.base_url}"

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            raise DomainError("embedding batch must be non-empty")
        payload = {"model": self.model, "input": list(texts)}
        body = self._transport.post_json("/embeddings", payload)
        data = body.get("data")
        if not isinstance(data, list) or len(data) != len(texts):
            raise TransportError(
                f"expected {len(texts)} embeddings, got "
                f"{len(data) if isinstance(data, list) else 'no list'}"
            )
        rows: list[list[float]] = []
        for entry in sorted(data, key=lambda e: e.get("index", 0)):
            vector = entry.get("embedding")
            if not isinstance(vector, list) or not vector:
                raise TransportError("embedding entry lacks a vector")
            rows.append([float(x) for x in vector])
        dims = {len(row) for row in rows}
        if len(dims) != 1:
            raise DimensionMismatch(
                f"batch returned differing dimensions {sorted(dims)}",
                dimensions=sorted(dims),
            )
        return np.asarray(rows, dtype=np.float64)
