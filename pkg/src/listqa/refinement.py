"""Iterative answer filtering, answer expansion, and final validation.

A candidate answer set goes through three phases:

1. refine_iteratively — generate a question, score every answer against it,
   drop answers below the confidence threshold, re-generate the question from
   the survivors, and repeat until the answer set stops changing or the
   iteration budget is spent. An instance that ever shrinks to fewer than two
   answers is discarded.
2. expand_answers — add extra high-confidence spans the tagger missed: any
   span scoring at least as high as the weakest retained answer, as long as
   it is not a duplicate and does not overlap an existing answer span.
3. finalize_instance — generate a fresh question for the expanded set and
   re-validate: if nothing gets filtered under the new question, emit it;
   otherwise fall back to the pre-expansion question while keeping the
   expanded answers. Every emitted answer must localize to a passage span
   under the emitted question.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from listqa.corpus import Passage
from listqa.extraction import CandidateAnswerSet, normalize_answer
from listqa.gateway.base import Gateway

STAGE_INITIAL = "initial"
STAGE_FILTERED = "filtered"
STAGE_EXPANDED = "expanded"
STAGE_FINALIZED = "finalized"
STAGE_DISCARDED = "discarded"


@dataclass(frozen=True)
class ScoredAnswer:
    """An answer string with its last-accepted confidence and passage span."""

    text: str
    confidence: float
    span: tuple[int, int] | None = None


@dataclass(frozen=True)
class DraftInstance:
    """The evolving (question, scored answers) pair during refinement."""

    passage_id: str
    question: str
    answers: tuple[ScoredAnswer, ...]
    iteration: int
    stage: str
    expanded_keys: frozenset[str] = field(default_factory=frozenset)
    fallback: bool = False


@dataclass(frozen=True)
class RefineParams:
    """Confidence threshold and iteration budget for refinement."""

    tau: float
    max_iters: int = 3
    strict_expansion_floor: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must be in (0, 1), got {self.tau}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")


def _answer_key(texts: Iterable[str]) -> tuple[str, ...]:
    """Order-insensitive identity of an answer set under normalization."""
    return tuple(sorted(normalize_answer(t) for t in texts))


def _overlaps(a: tuple[int, int], b: tuple[int, int]) -> bool:
    return a[0] < b[1] and b[0] < a[1]


def score_candidates(
    question: str,
    passage_text: str,
    answers: Sequence[str],
    gateway: Gateway,
) -> list[ScoredAnswer]:
    """Confidence for each answer: the best span score whose text matches it.

    Matching is under normalize_answer equivalence. An answer with no
    matching span gets confidence 0 and no span. Input order is preserved.
    """
    spans = gateway.qa_top_spans(question, passage_text)
    scored = []
    for answer in answers:
        key = normalize_answer(answer)
        best = next((s for s in spans if normalize_answer(s.text) == key), None)
        if best is None:
            scored.append(ScoredAnswer(answer, 0.0, None))
        else:
            scored.append(ScoredAnswer(answer, best.score, (best.start, best.end)))
    return scored


def filter_answers(scored: Sequence[ScoredAnswer], tau: float) -> list[ScoredAnswer]:
    """Keep answers with confidence >= tau, preserving order.

    The boundary is inclusive: only scores strictly below the threshold are
    treated as incorrect.
    """
    return [s for s in scored if s.confidence >= tau]


def localize_answer(
    answer: str,
    question: str,
    passage_text: str,
    gateway: Gateway,
) -> tuple[int, int] | None:
    """Offsets of the highest-scoring span matching the answer, if any."""
    key = normalize_answer(answer)
    for span in gateway.qa_top_spans(question, passage_text):
        if normalize_answer(span.text) == key:
            return (span.start, span.end)
    return None


def refine_iteratively(
    passage: Passage,
    initial: CandidateAnswerSet,
    params: RefineParams,
    gateway: Gateway,
) -> DraftInstance:
    """Alternate filtering and question re-generation until a fixed point.

    Each pass scores the current answers under the current question, drops
    those below tau, and re-generates the question from the survivors. The
    loop stops when the normalized answer set is unchanged between
    consecutive passes or after max_iters filter passes; the returned draft
    carries the last (question, answers) pair that was re-questioned.
    Shrinking to one or zero answers discards the instance immediately.
    """
    answers = [ScoredAnswer(text, 0.0, None) for text in initial.answers]
    question = gateway.generate_question([a.text for a in answers], passage.text)
    prev_key: tuple[str, ...] | None = None
    cur_key = _answer_key(initial.answers)
    passes = 0
    while cur_key != prev_key and passes < params.max_iters:
        scored = score_candidates(question, passage.text, [a.text for a in answers], gateway)
        kept = filter_answers(scored, params.tau)
        passes += 1
        if len(kept) <= 1:
            return DraftInstance(
                passage_id=passage.id,
                question=question,
                answers=tuple(kept),
                iteration=passes,
                stage=STAGE_DISCARDED,
            )
        question = gateway.generate_question([a.text for a in kept], passage.text)
        prev_key, cur_key = cur_key, _answer_key(a.text for a in kept)
        answers = kept
    return DraftInstance(
        passage_id=passage.id,
        question=question,
        answers=tuple(answers),
        iteration=passes,
        stage=STAGE_FILTERED,
    )


def expand_answers(
    passage: Passage,
    draft: DraftInstance,
    gateway: Gateway,
    strict_floor: bool = False,
) -> DraftInstance:
    """Append extra spans scoring at least the weakest retained confidence.

    Additions are considered in score-descending order; a span is skipped if
    its normalized text already appears in the set or its offsets overlap any
    answer span accepted so far. With strict_floor the comparison against the
    weakest confidence is strict.
    """
    if draft.stage != STAGE_FILTERED or len(draft.answers) < 2:
        raise ValueError("expand_answers requires a filtered draft with >= 2 answers")
    floor = min(a.confidence for a in draft.answers)
    seen = {normalize_answer(a.text) for a in draft.answers}
    occupied = [a.span for a in draft.answers if a.span is not None]
    additions = []
    for span in gateway.qa_top_spans(draft.question, passage.text):
        below_floor = span.score <= floor if strict_floor else span.score < floor
        if below_floor:
            continue
        key = normalize_answer(span.text)
        if not key or key in seen:
            continue
        if any(_overlaps((span.start, span.end), r) for r in occupied):
            continue
        additions.append(ScoredAnswer(span.text, span.score, (span.start, span.end)))
        seen.add(key)
        occupied.append((span.start, span.end))
    return replace(
        draft,
        answers=draft.answers + tuple(additions),
        stage=STAGE_EXPANDED,
        expanded_keys=frozenset(normalize_answer(a.text) for a in additions),
    )


def _resolve_overlaps(answers: Sequence[ScoredAnswer]) -> list[ScoredAnswer]:
    """Drop the lower-confidence answer wherever localized spans collide."""
    order = sorted(range(len(answers)), key=lambda i: (-answers[i].confidence, i))
    taken: list[tuple[int, int]] = []
    keep = set()
    for i in order:
        span = answers[i].span
        assert span is not None
        if any(_overlaps(span, r) for r in taken):
            continue
        taken.append(span)
        keep.add(i)
    return [a for i, a in enumerate(answers) if i in keep]


def finalize_instance(
    passage: Passage,
    expanded: DraftInstance,
    params: RefineParams,
    gateway: Gateway,
) -> DraftInstance:
    """Validate the expanded set under a fresh question and localize answers.

    A new question is generated from the expanded answers and the set is
    re-scored against it. If nothing falls below tau, the new question is
    emitted with the fresh scores; otherwise the draft's original question is
    kept (fallback) and the previously recorded confidences stand. Either
    way, every emitted answer must localize to a span under the emitted
    question; answers that do not are dropped, overlapping localizations keep
    the higher-confidence answer, and fewer than two survivors discards the
    instance.
    """
    if expanded.stage != STAGE_EXPANDED:
        raise ValueError("finalize_instance requires an expanded draft")
    texts = [a.text for a in expanded.answers]
    final_question = gateway.generate_question(texts, passage.text)
    rescored = score_candidates(final_question, passage.text, texts, gateway)
    revalidated = filter_answers(rescored, params.tau)

    if _answer_key(a.text for a in revalidated) == _answer_key(texts):
        question = final_question
        located = rescored
        fallback = False
    else:
        question = expanded.question
        located = []
        for answer in expanded.answers:
            span = localize_answer(answer.text, question, passage.text, gateway)
            located.append(ScoredAnswer(answer.text, answer.confidence, span))
        fallback = True

    kept = _resolve_overlaps([a for a in located if a.span is not None])
    stage = STAGE_FINALIZED if len(kept) >= 2 else STAGE_DISCARDED
    return replace(expanded, question=question, answers=tuple(kept), stage=stage, fallback=fallback)
