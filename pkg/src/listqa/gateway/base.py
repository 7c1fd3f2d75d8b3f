"""Shared gateway contract: the four model roles and their common guarantees.

A gateway exposes summarization, entity tagging, question generation, and
top-k answer-span scoring behind one interface. Backends differ in where the
model output comes from (local deterministic stubs vs. an HTTP inference
service); everything contractual — the question-generation prompt format,
input length caps, span ordering, offset validity — is enforced here so both
backends behave identically at the seams.
"""

from __future__ import annotations

import logging
import re
import threading
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence

logger = logging.getLogger(__name__)

# Entity types that produce trivial candidate answers, dropped at tagging time.
DEFAULT_EXCLUDED_TYPES: dict[str, frozenset[str]] = {
    "general": frozenset({"DATE"}),
    "biomedical": frozenset({"species"}),
}

_TOKEN_RE = re.compile(r"\S+")


class GatewayError(Exception):
    """A model backend could not produce a usable result.

    retryable=True means the failure is transient (network, 5xx) and was
    already retried up to the configured attempt budget before surfacing.
    """

    def __init__(self, message: str, *, retryable: bool = False):
        super().__init__(message)
        self.retryable = retryable


@dataclass(frozen=True)
class EntityMention:
    """An entity occurrence; offsets are character offsets into the tagged text."""

    text: str
    entity_type: str
    start: int
    end: int


@dataclass(frozen=True)
class ScoredSpan:
    """A candidate answer span with a confidence score in [0, 1]."""

    text: str
    start: int
    end: int
    score: float


@dataclass
class GatewayConfig:
    """Backend selection plus generation/scoring limits.

    Length fields are model units; the gateway approximates them as
    whitespace tokens when it has to truncate inputs itself (the span-scoring
    request carries no length parameters on the wire, so the caps are applied
    client-side).
    """

    backend: str = "remote"
    endpoint_url: str | None = None
    stub_fixture_dir: str | None = None
    summary_min_len: int = 64
    summary_max_len: int = 128
    question_min_len: int = 32
    question_max_len: int = 128
    qa_max_question_len: int = 128
    qa_max_context_len: int = 384
    top_k: int = 20
    excluded_types: frozenset[str] | None = None  # None: default for the domain
    retry_attempts: int = 3
    retry_backoff: float = 0.5
    max_in_flight: int = 8
    request_timeout: float = 60.0

    def __post_init__(self) -> None:
        if self.summary_min_len >= self.summary_max_len:
            raise ValueError("summary_min_len must be < summary_max_len")
        if self.question_min_len >= self.question_max_len:
            raise ValueError("question_min_len must be < question_max_len")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.retry_attempts < 1:
            raise ValueError("retry_attempts must be >= 1")


def build_qg_prompt(answers: Sequence[str], context: str) -> str:
    """Serialize answers and context into the question-generation input.

    The format is fixed so stub and remote backends see the same string:
    "answer: a_1, a_2 context: ...".
    """
    return f"answer: {', '.join(answers)} context: {context}"


def truncate_units(text: str, max_units: int) -> tuple[str, bool]:
    """Cut text after max_units whitespace tokens, preserving original spacing.

    Returns (possibly shortened text, whether anything was cut).
    """
    count = 0
    for match in _TOKEN_RE.finditer(text):
        count += 1
        if count == max_units:
            end = match.end()
            if end < len(text) and text[end:].strip():
                return text[:end], True
            return text, False
    return text, False


class Gateway(ABC):
    """Uniform interface over the four model roles.

    Safe for concurrent calls. Wall time spent in each role is accumulated
    and can be read back with op_timings() for per-stage reporting.
    """

    def __init__(self, config: GatewayConfig):
        self.config = config
        self._timings: dict[str, float] = {}
        self._timing_lock = threading.Lock()

    # -- public operations ------------------------------------------------

    def summarize(self, passage_text: str) -> str:
        """Summarize a passage; the result is guaranteed non-empty."""
        if not passage_text.strip():
            raise GatewayError("cannot summarize empty text")
        summary = self._timed("summarization", self._summarize_impl, passage_text)
        if not summary or not summary.strip():
            raise GatewayError("summarizer returned empty output")
        return summary

    def tag_entities(self, text: str, domain: str) -> list[EntityMention]:
        """Tag entity mentions in text, sorted by start offset.

        Mentions whose type is in the configured exclusion list are dropped
        before return; mentions with invalid offsets are dropped with a
        warning rather than corrupting downstream span arithmetic.
        """
        if not text.strip():
            raise GatewayError("cannot tag empty text")
        mentions = self._timed("ner", self._tag_entities_impl, text, domain)
        excluded = self.excluded_types_for(domain)
        kept: list[EntityMention] = []
        for m in mentions:
            if not (0 <= m.start < m.end <= len(text)) or text[m.start : m.end] != m.text:
                logger.warning("dropping entity with invalid offsets: %r", m)
                continue
            if not m.entity_type:
                logger.warning("dropping entity with empty type: %r", m)
                continue
            if m.entity_type in excluded:
                continue
            kept.append(m)
        kept.sort(key=lambda m: (m.start, m.end))
        return kept

    def generate_question(self, answers: Sequence[str], context: str) -> str:
        """Generate one question covering the given answers in the context."""
        if not answers:
            raise GatewayError("cannot generate a question for an empty answer list")
        if not context.strip():
            raise GatewayError("cannot generate a question for empty context")
        prompt = build_qg_prompt(answers, context)
        question = self._timed("question_generation", self._generate_question_impl, prompt, answers)
        if not question or not question.strip():
            raise GatewayError("question generator returned empty output")
        return question

    def qa_top_spans(self, question: str, context: str) -> list[ScoredSpan]:
        """Score candidate answer spans for (question, context).

        Inputs are truncated to the configured unit caps first; offsets in
        the result index into the (possibly truncated, prefix-preserving)
        context and therefore also into the original. The result is sorted by
        (score desc, start asc, end asc) and capped at top_k.
        """
        if not question.strip() or not context.strip():
            raise GatewayError("question and context must be non-empty")
        question, _ = truncate_units(question, self.config.qa_max_question_len)
        context, _ = truncate_units(context, self.config.qa_max_context_len)
        spans = self._timed("qa_scoring", self._qa_top_spans_impl, question, context)
        kept: list[ScoredSpan] = []
        for s in spans:
            if not (0 <= s.start < s.end <= len(context)) or context[s.start : s.end] != s.text:
                logger.warning("dropping span with invalid offsets: %r", s)
                continue
            if not (0.0 <= s.score <= 1.0):
                logger.warning("dropping span with out-of-range score: %r", s)
                continue
            kept.append(s)
        kept.sort(key=lambda s: (-s.score, s.start, s.end))
        return kept[: self.config.top_k]

    # -- helpers -----------------------------------------------------------

    def excluded_types_for(self, domain: str) -> frozenset[str]:
        if self.config.excluded_types is not None:
            return self.config.excluded_types
        return DEFAULT_EXCLUDED_TYPES.get(domain, frozenset())

    def qa_caps_hit(self, question: str, context: str) -> bool:
        """Whether the span-scoring length caps would truncate these inputs."""
        _, q_cut = truncate_units(question, self.config.qa_max_question_len)
        _, c_cut = truncate_units(context, self.config.qa_max_context_len)
        return q_cut or c_cut

    def op_timings(self) -> dict[str, float]:
        """Accumulated wall seconds per operation since construction."""
        with self._timing_lock:
            return dict(self._timings)

    def _timed(self, op, fn, *args):
        start = time.perf_counter()
        try:
            return fn(*args)
        finally:
            elapsed = time.perf_counter() - start
            with self._timing_lock:
                self._timings[op] = self._timings.get(op, 0.0) + elapsed

    # -- backend hooks -----------------------------------------------------

    @abstractmethod
    def _summarize_impl(self, text: str) -> str: ...

    @abstractmethod
    def _tag_entities_impl(self, text: str, domain: str) -> list[EntityMention]: ...

    @abstractmethod
    def _generate_question_impl(self, prompt: str, answers: Sequence[str]) -> str: ...

    @abstractmethod
    def _qa_top_spans_impl(self, question: str, context: str) -> list[ScoredSpan]: ...
