"""HTTP client for the model inference service.

Wire protocol (JSON bodies, UTF-8; offsets are character offsets into the
request's own text/context field):

  POST /v1/summarize  {"text", "min_len", "max_len"}        -> {"summary"}
  POST /v1/ner        {"text", "domain"}                    -> {"entities": [{"text","type","start","end"}]}
  POST /v1/question   {"input", "min_len", "max_len"}       -> {"question"}
  POST /v1/qa_spans   {"question", "context", "top_k"}      -> {"spans": [{"text","start","end","score"}]}
  GET  /v1/health                                           -> {"status", "models"}

Non-2xx responses carry {"error": str}. Transient failures (network errors,
non-2xx statuses) are retried with exponential backoff up to the configured
attempt budget; a malformed 2xx body is a protocol violation and is not
retried.
"""

from __future__ import annotations

import logging
import threading
import time
from typing import Any, Sequence

import requests

from listqa.gateway.base import EntityMention, Gateway, GatewayConfig, GatewayError, ScoredSpan

logger = logging.getLogger(__name__)


class RemoteGateway(Gateway):
    def __init__(self, config: GatewayConfig, session: requests.Session | None = None):
        super().__init__(config)
        if not config.endpoint_url:
            raise GatewayError("remote backend requires endpoint_url")
        self._base = config.endpoint_url.rstrip("/")
        self._session = session or requests.Session()
        self._in_flight = threading.Semaphore(config.max_in_flight)

    # -- transport ----------------------------------------------------------

    def _post(self, path: str, payload: dict[str, Any]) -> dict[str, Any]:
        url = f"{self._base}{path}"
        last_error = "no attempt made"
        for attempt in range(self.config.retry_attempts):
            if attempt:
                time.sleep(self.config.retry_backoff * (2 ** (attempt - 1)))
            try:
                with self._in_flight:
                    response = self._session.post(url, json=payload, timeout=self.config.request_timeout)
            except requests.RequestException as exc:
                last_error = f"request to {url} failed: {exc}"
                logger.warning("%s (attempt %d/%d)", last_error, attempt + 1, self.config.retry_attempts)
                continue
            if response.status_code == 200:
                try:
                    body = response.json()
                except ValueError as exc:
                    raise GatewayError(f"{url} returned non-JSON body: {exc}") from exc
                if not isinstance(body, dict):
                    raise GatewayError(f"{url} returned non-object body")
                return body
            last_error = f"{url} returned HTTP {response.status_code}: {self._error_text(response)}"
            logger.warning("%s (attempt %d/%d)", last_error, attempt + 1, self.config.retry_attempts)
        raise GatewayError(last_error, retryable=True)

    @staticmethod
    def _error_text(response: requests.Response) -> str:
        try:
            body = response.json()
            if isinstance(body, dict) and "error" in body:
                return str(body["error"])
        except ValueError:
            pass
        return response.text[:200]

    # -- backend hooks -------------------------------------------------------

    def _summarize_impl(self, text: str) -> str:
        body = self._post(
            "/v1/summarize",
            {"text": text, "min_len": self.config.summary_min_len, "max_len": self.config.summary_max_len},
        )
        summary = body.get("summary")
        if not isinstance(summary, str):
            raise GatewayError("summarize response missing string field 'summary'")
        return summary

    def _tag_entities_impl(self, text: str, domain: str) -> list[EntityMention]:
        body = self._post("/v1/ner", {"text": text, "domain": domain})
        entities = body.get("entities")
        if not isinstance(entities, list):
            raise GatewayError("ner response missing list field 'entities'")
        mentions = []
        for item in entities:
            try:
                mentions.append(
                    EntityMention(
                        text=str(item["text"]),
                        entity_type=str(item["type"]),
                        start=int(item["start"]),
                        end=int(item["end"]),
                    )
                )
            except (TypeError, KeyError, ValueError) as exc:
                raise GatewayError(f"malformed entity in ner response: {item!r}") from exc
        return mentions

    def _generate_question_impl(self, prompt: str, answers: Sequence[str]) -> str:
        body = self._post(
            "/v1/question",
            {"input": prompt, "min_len": self.config.question_min_len, "max_len": self.config.question_max_len},
        )
        question = body.get("question")
        if not isinstance(question, str):
            raise GatewayError("question response missing string field 'question'")
        return question

    def _qa_top_spans_impl(self, question: str, context: str) -> list[ScoredSpan]:
        body = self._post(
            "/v1/qa_spans",
            {"question": question, "context": context, "top_k": self.config.top_k},
        )
        raw_spans = body.get("spans")
        if not isinstance(raw_spans, list):
            raise GatewayError("qa_spans response missing list field 'spans'")
        spans = []
        for item in raw_spans:
            try:
                spans.append(
                    ScoredSpan(
                        text=str(item["text"]),
                        start=int(item["start"]),
                        end=int(item["end"]),
                        score=float(item["score"]),
                    )
                )
            except (TypeError, KeyError, ValueError) as exc:
                raise GatewayError(f"malformed span in qa_spans response: {item!r}") from exc
        return spans


def fetch_health(endpoint_url: str, timeout: float = 10.0) -> dict[str, Any]:
    """GET the service health document; raises GatewayError when unreachable."""
    url = f"{endpoint_url.rstrip('/')}/v1/health"
    try:
        response = requests.get(url, timeout=timeout)
    except requests.RequestException as exc:
        raise GatewayError(f"health check failed: {exc}", retryable=True) from exc
    if response.status_code != 200:
        raise GatewayError(f"health check returned HTTP {response.status_code}", retryable=True)
    try:
        body = response.json()
    except ValueError as exc:
        raise GatewayError(f"health check returned non-JSON body: {exc}") from exc
    if not isinstance(body, dict):
        raise GatewayError("health check returned non-object body")
    return body
