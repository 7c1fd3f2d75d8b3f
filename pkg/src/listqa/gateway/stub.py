"""Deterministic offline backends, driven entirely by fixture files.

Every operation is a pure function of (inputs, fixtures), which makes full
pipeline runs reproducible byte-for-byte without any model service:

- summarizer: the first two sentences of the input, verbatim
- tagger: longest-match dictionary lookup over a surface-form -> type lexicon
- question generator: a fixed template over the first answer
- span scorer: a (question, span text) -> score table materialized against
  whatever actually occurs in the context

Fixture files inside the fixture directory:
  lexicon.json    {"Yale": "ORG", ...}
  qa_scores.json  {"<question>": {"Yale": 0.6, "Rice": [0.9, 0.2]}, ...}

A qa_scores value may be a single score (applied to every occurrence of the
span text) or a list of per-occurrence scores. The key "*" is a fallback used
when a question has no exact entry.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Mapping, Sequence

from listqa.gateway.base import EntityMention, Gateway, GatewayConfig, GatewayError, ScoredSpan

logger = logging.getLogger(__name__)

_SENTENCE_ENDS = ".!?"

QaScoreTable = Mapping[str, Mapping[str, float | Sequence[float]]]


def split_sentences(text: str) -> list[str]:
    """Maximal segments ending in '.', '!' or '?'; a terminator-less tail counts too."""
    sentences = []
    start = 0
    for i, ch in enumerate(text):
        if ch in _SENTENCE_ENDS:
            sentences.append(text[start : i + 1])
            start = i + 1
    if text[start:].strip():
        sentences.append(text[start:])
    return sentences


class StubGateway(Gateway):
    def __init__(
        self,
        config: GatewayConfig,
        lexicon: Mapping[str, str] | None = None,
        qa_scores: QaScoreTable | None = None,
    ):
        super().__init__(config)
        self._lexicon = dict(lexicon or {})
        self._qa_scores = {q: dict(table) for q, table in (qa_scores or {}).items()}
        self._validate_scores()
        # index lexicon by first character, longest surface first
        self._by_first: dict[str, list[str]] = {}
        for surface in self._lexicon:
            if surface:
                self._by_first.setdefault(surface[0], []).append(surface)
        for surfaces in self._by_first.values():
            surfaces.sort(key=len, reverse=True)

    @classmethod
    def from_dir(cls, config: GatewayConfig) -> "StubGateway":
        if not config.stub_fixture_dir:
            raise GatewayError("stub backend requires stub_fixture_dir")
        fixture_dir = Path(config.stub_fixture_dir)
        if not fixture_dir.is_dir():
            raise GatewayError(f"stub fixture directory not found: {fixture_dir}")
        lexicon = cls._load_json(fixture_dir / "lexicon.json")
        qa_scores = cls._load_json(fixture_dir / "qa_scores.json")
        return cls(config, lexicon=lexicon, qa_scores=qa_scores)

    @staticmethod
    def _load_json(path: Path) -> dict:
        if not path.exists():
            logger.warning("stub fixture %s missing, using empty mapping", path)
            return {}
        with path.open(encoding="utf-8") as fh:
            return json.load(fh)

    def _validate_scores(self) -> None:
        for question, table in self._qa_scores.items():
            for text, spec in table.items():
                scores = spec if isinstance(spec, (list, tuple)) else [spec]
                for score in scores:
                    if not isinstance(score, (int, float)) or not 0.0 <= float(score) <= 1.0:
                        raise GatewayError(
                            f"stub QA fixture score out of [0, 1] for ({question!r}, {text!r}): {score!r}"
                        )

    # -- backend hooks -----------------------------------------------------

    def _summarize_impl(self, text: str) -> str:
        sentences = split_sentences(text)
        return "".join(sentences[:2]).strip()

    def _tag_entities_impl(self, text: str, domain: str) -> list[EntityMention]:
        mentions = []
        i = 0
        n = len(text)
        while i < n:
            matched = None
            for surface in self._by_first.get(text[i], ()):
                j = i + len(surface)
                if text.startswith(surface, i) and self._at_boundary(text, i, j):
                    matched = (surface, j)
                    break
            if matched:
                surface, j = matched
                mentions.append(EntityMention(surface, self._lexicon[surface], i, j))
                i = j
            else:
                i += 1
        return mentions

    @staticmethod
    def _at_boundary(text: str, start: int, end: int) -> bool:
        before_ok = start == 0 or not text[start - 1].isalnum()
        after_ok = end == len(text) or not text[end].isalnum()
        return before_ok and after_ok

    def _generate_question_impl(self, prompt: str, answers: Sequence[str]) -> str:
        return f"Which entities include {answers[0]} in this context?"

    def _qa_top_spans_impl(self, question: str, context: str) -> list[ScoredSpan]:
        table = self._qa_scores.get(question)
        if table is None:
            table = self._qa_scores.get("*", {})
        spans = []
        for text, spec in table.items():
            if not text:
                continue
            scores = list(spec) if isinstance(spec, (list, tuple)) else None
            occurrence = 0
            start = context.find(text)
            while start != -1:
                if scores is None:
                    score = float(spec)  # type: ignore[arg-type]
                elif occurrence < len(scores):
                    score = float(scores[occurrence])
                else:
                    break
                spans.append(ScoredSpan(text, start, start + len(text), score))
                occurrence += 1
                start = context.find(text, start + len(text))
        return spans
