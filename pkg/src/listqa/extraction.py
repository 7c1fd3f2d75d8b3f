"""Candidate answer extraction: summarize a passage, group same-type entities.

Entities that co-occur in a summary tend to share a topic, so each
entity-type-homogeneous group from the summary becomes one candidate answer
set for a list question. Groups with fewer than two distinct answers are
useless for list questions and are dropped.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from typing import Iterable, Sequence

from listqa.corpus import Passage
from listqa.gateway.base import EntityMention, Gateway

_TERMINAL_PUNCT = ".,;:"


def normalize_answer(s: str) -> str:
    """Canonical form used for answer equality everywhere in the pipeline.

    Lowercase, NFC, whitespace collapsed to single spaces, then leading and
    trailing whitespace and terminal punctuation stripped.
    """
    s = unicodedata.normalize("NFC", s.lower())
    s = " ".join(s.split())
    return s.rstrip(_TERMINAL_PUNCT).strip()


@dataclass(frozen=True)
class Summary:
    passage_id: str
    text: str


@dataclass(frozen=True)
class CandidateAnswerSet:
    """Distinct same-type answers from one summary, in first-occurrence order."""

    passage_id: str
    entity_type: str
    answers: tuple[str, ...]


@dataclass(frozen=True)
class ExtractionResult:
    """Extraction output plus the accounting the pipeline report needs."""

    summary: str
    sets: tuple[CandidateAnswerSet, ...]
    dropped_too_few: int


def _drop_nested_mentions(mentions: Sequence[EntityMention]) -> list[EntityMention]:
    """Drop mentions strictly contained in a longer mention of the same type."""
    kept = []
    for m in mentions:
        contained = any(
            other is not m
            and other.entity_type == m.entity_type
            and other.start <= m.start
            and m.end <= other.end
            and (other.start, other.end) != (m.start, m.end)
            for other in mentions
        )
        if not contained:
            kept.append(m)
    return kept


def group_mentions(
    passage_id: str,
    mentions: Sequence[EntityMention],
    excluded_types: Iterable[str],
) -> tuple[list[CandidateAnswerSet], int]:
    """Group mentions into candidate sets; returns (sets, dropped_too_few)."""
    excluded = set(excluded_types)
    mentions = [m for m in sorted(mentions, key=lambda m: (m.start, m.end)) if m.entity_type not in excluded]
    mentions = _drop_nested_mentions(mentions)

    by_type: dict[str, list[str]] = {}
    seen: dict[str, set[str]] = {}
    for m in mentions:
        key = normalize_answer(m.text)
        if not key:
            continue
        if key in seen.setdefault(m.entity_type, set()):
            continue
        seen[m.entity_type].add(key)
        by_type.setdefault(m.entity_type, []).append(m.text)

    sets = []
    dropped = 0
    for entity_type in sorted(by_type):
        answers = by_type[entity_type]
        if len(answers) < 2:
            dropped += 1
            continue
        sets.append(CandidateAnswerSet(passage_id, entity_type, tuple(answers)))
    return sets, dropped


def extract_candidate_sets(
    passage: Passage,
    gateway: Gateway,
    excluded_types: Iterable[str] | None = None,
) -> ExtractionResult:
    """Summarize the passage and build its candidate answer sets."""
    if excluded_types is None:
        excluded_types = gateway.excluded_types_for(passage.source)
    summary = gateway.summarize(passage.text)
    mentions = gateway.tag_entities(summary, passage.source)
    sets, dropped = group_mentions(passage.id, mentions, excluded_types)
    return ExtractionResult(summary=summary, sets=tuple(sets), dropped_too_few=dropped)


def extract_candidates(
    passage: Passage,
    gateway: Gateway,
    excluded_types: Iterable[str] | None = None,
) -> tuple[CandidateAnswerSet, ...]:
    """The candidate answer sets for one passage, sorted by entity type."""
    return extract_candidate_sets(passage, gateway, excluded_types).sets
