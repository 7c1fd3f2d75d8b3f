"""End-to-end dataset generation: sample, extract, refine, serialize, report.

Passages are processed independently (optionally by a worker pool); emitted
instances are buffered, sorted by (passage_id, entity_type) and written by a
single writer, so the output file is byte-identical for any worker count.
"""

from __future__ import annotations

import json
import logging
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from listqa.corpus import Passage, SamplingSpec, load_corpus, sample_passages
from listqa.extraction import extract_candidate_sets, normalize_answer
from listqa.gateway import Gateway, GatewayConfig, GatewayError, build_gateway
from listqa.refinement import (
    STAGE_DISCARDED,
    DraftInstance,
    RefineParams,
    expand_answers,
    finalize_instance,
    refine_iteratively,
)

logger = logging.getLogger(__name__)

HISTOGRAM_BUCKETS = ("2", "3", "4-5", "6-9", ">=10")

_TOKEN_RE = re.compile(r"\S+")


class PipelineError(Exception):
    """Fatal configuration or IO problem during a pipeline run."""


@dataclass
class PipelineConfig:
    domain: str
    corpus_path: str
    output_path: str
    sampling: SamplingSpec
    refine: RefineParams
    gateway: GatewayConfig
    excluded_types: frozenset[str] | None = None
    workers: int = 4

    def __post_init__(self) -> None:
        if self.domain not in ("general", "biomedical"):
            raise ValueError(f"domain must be 'general' or 'biomedical', got {self.domain!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class AnswerSpan:
    text: str
    char_start: int
    char_end: int
    confidence: float


@dataclass(frozen=True)
class QaInstance:
    """A finalized (context, question, answer spans) record with provenance."""

    id: str
    passage_id: str
    context: str
    question: str
    answers: tuple[AnswerSpan, ...]
    entity_type: str
    provenance: dict


@dataclass
class RunReport:
    passages_processed: int = 0
    passages_failed: int = 0
    candidate_sets: int = 0
    instances_emitted: int = 0
    discarded_too_few_initial: int = 0
    discarded_filtered_out: int = 0
    discarded_unlocalizable: int = 0
    gateway_failures: int = 0
    stage_timings: dict[str, float] = field(default_factory=dict)
    answer_count_histogram: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "passages_processed": self.passages_processed,
            "passages_failed": self.passages_failed,
            "candidate_sets": self.candidate_sets,
            "instances_emitted": self.instances_emitted,
            "discarded": {
                "too_few_initial": self.discarded_too_few_initial,
                "filtered_out": self.discarded_filtered_out,
                "unlocalizable": self.discarded_unlocalizable,
            },
            "gateway_failures": self.gateway_failures,
            "stage_timings": {k: round(v, 3) for k, v in self.stage_timings.items()},
            "answer_count_histogram": dict(self.answer_count_histogram),
        }


def serialize_instance(inst: QaInstance) -> str:
    """One canonical JSON line per instance: fixed field order, UTF-8, compact."""
    record = {
        "id": inst.id,
        "passage_id": inst.passage_id,
        "context": inst.context,
        "question": inst.question,
        "answers": [
            {
                "text": a.text,
                "char_start": a.char_start,
                "char_end": a.char_end,
                "confidence": a.confidence,
            }
            for a in inst.answers
        ],
        "entity_type": inst.entity_type,
        "provenance": inst.provenance,
    }
    return json.dumps(record, ensure_ascii=False, separators=(",", ":"))


def parse_instance(line: str) -> QaInstance:
    """Inverse of serialize_instance, with structural validation."""
    record = json.loads(line)
    answers = tuple(
        AnswerSpan(
            text=a["text"],
            char_start=int(a["char_start"]),
            char_end=int(a["char_end"]),
            confidence=float(a["confidence"]),
        )
        for a in record["answers"]
    )
    return QaInstance(
        id=record["id"],
        passage_id=record["passage_id"],
        context=record["context"],
        question=record["question"],
        answers=answers,
        entity_type=record["entity_type"],
        provenance=record["provenance"],
    )


@dataclass
class _PassageOutcome:
    candidate_sets: int = 0
    too_few_initial: int = 0
    filtered_out: int = 0
    unlocalizable: int = 0
    gateway_failures: int = 0
    instances: list[QaInstance] = field(default_factory=list)


def _assemble_instance(
    passage: Passage,
    entity_type: str,
    summary: str,
    draft: DraftInstance,
    gateway: Gateway,
) -> QaInstance:
    answers = sorted(draft.answers, key=lambda a: a.span)  # type: ignore[arg-type]
    spans = tuple(
        AnswerSpan(text=a.text, char_start=a.span[0], char_end=a.span[1], confidence=a.confidence)
        for a in answers
    )
    provenance = {
        "summary": summary,
        "iterations": draft.iteration,
        "expanded_indices": [
            i for i, a in enumerate(answers) if normalize_answer(a.text) in draft.expanded_keys
        ],
        "fallback": draft.fallback,
    }
    if gateway.qa_caps_hit(draft.question, passage.text):
        provenance["truncated"] = True
    return QaInstance(
        id=f"{passage.id}#{entity_type}",
        passage_id=passage.id,
        context=passage.text,
        question=draft.question,
        answers=spans,
        entity_type=entity_type,
        provenance=provenance,
    )


def _process_passage(passage: Passage, config: PipelineConfig, gateway: Gateway) -> _PassageOutcome:
    outcome = _PassageOutcome()
    extraction = extract_candidate_sets(passage, gateway, config.excluded_types)
    outcome.candidate_sets = len(extraction.sets) + extraction.dropped_too_few
    outcome.too_few_initial = extraction.dropped_too_few
    for candidate_set in extraction.sets:
        try:
            draft = refine_iteratively(passage, candidate_set, config.refine, gateway)
            if draft.stage == STAGE_DISCARDED:
                outcome.filtered_out += 1
                continue
            draft = expand_answers(passage, draft, gateway, config.refine.strict_expansion_floor)
            draft = finalize_instance(passage, draft, config.refine, gateway)
            if draft.stage == STAGE_DISCARDED:
                outcome.unlocalizable += 1
                continue
            outcome.instances.append(
                _assemble_instance(passage, candidate_set.entity_type, extraction.summary, draft, gateway)
            )
        except GatewayError as exc:
            logger.warning(
                "skipping candidate set %s#%s after gateway failure: %s",
                passage.id,
                candidate_set.entity_type,
                exc,
            )
            outcome.gateway_failures += 1
    return outcome


def histogram_bucket(n_answers: int) -> str:
    if n_answers <= 2:
        return "2"
    if n_answers == 3:
        return "3"
    if n_answers <= 5:
        return "4-5"
    if n_answers <= 9:
        return "6-9"
    return ">=10"


def run_pipeline(config: PipelineConfig) -> RunReport:
    """Run the full generation pipeline and write the dataset file."""
    started = time.perf_counter()
    passages = load_corpus(config.corpus_path, source=config.domain)
    if not passages:
        raise PipelineError(f"corpus {config.corpus_path} contains no usable passages")
    sampled = sample_passages(passages, config.sampling)
    gateway = build_gateway(config.gateway)

    report = RunReport()
    outcomes: list[_PassageOutcome] = []

    def worker(passage: Passage) -> _PassageOutcome | None:
        try:
            return _process_passage(passage, config, gateway)
        except GatewayError as exc:
            logger.warning("skipping passage %s after gateway failure: %s", passage.id, exc)
            return None

    if config.workers == 1:
        results = [worker(p) for p in sampled]
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(worker, sampled))

    for result in results:
        if result is None:
            report.passages_failed += 1
            continue
        report.passages_processed += 1
        outcomes.append(result)

    instances: list[QaInstance] = []
    for outcome in outcomes:
        report.candidate_sets += outcome.candidate_sets
        report.discarded_too_few_initial += outcome.too_few_initial
        report.discarded_filtered_out += outcome.filtered_out
        report.discarded_unlocalizable += outcome.unlocalizable
        report.gateway_failures += outcome.gateway_failures
        instances.extend(outcome.instances)

    instances.sort(key=lambda inst: (inst.passage_id, inst.entity_type))
    report.instances_emitted = len(instances)

    output_path = Path(config.output_path)
    if output_path.parent and not output_path.parent.exists():
        output_path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with output_path.open("w", encoding="utf-8", newline="\n") as fh:
            for inst in instances:
                fh.write(serialize_instance(inst))
                fh.write("\n")
    except OSError as exc:
        raise PipelineError(f"cannot write dataset to {output_path}: {exc}") from exc

    counts = {bucket: 0 for bucket in HISTOGRAM_BUCKETS}
    for inst in instances:
        counts[histogram_bucket(len(inst.answers))] += 1
    report.answer_count_histogram = counts

    timings = gateway.op_timings()
    timings["total"] = time.perf_counter() - started
    report.stage_timings = timings
    return report


def tokenize_with_offsets(text: str) -> list[tuple[str, int, int]]:
    """Whitespace tokens with their (start, end) character offsets."""
    return [(m.group(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def bio_labels(context: str, ranges: list[tuple[int, int]]) -> tuple[list[str], list[str]]:
    """Per-token B/I/O labels for the answer character ranges.

    A range not aligned to token boundaries extends to the covering tokens:
    the first covering token is B, the rest are I.
    """
    tokens = tokenize_with_offsets(context)
    labels = ["O"] * len(tokens)
    for start, end in sorted(ranges):
        covering = [i for i, (_, ts, te) in enumerate(tokens) if ts < end and te > start]
        for position, i in enumerate(covering):
            if labels[i] != "O":
                continue
            labels[i] = "B" if position == 0 else "I"
    return [t for t, _, _ in tokens], labels


def export_multispan(dataset_path: str | Path, out_path: str | Path) -> int:
    """Convert a dataset file to token-level BIO records for tagger training.

    Emits one JSON line per instance with whitespace-tokenized question and
    context plus per-context-token labels. Returns the number of exported
    records; unparseable input lines are skipped with a warning.
    """
    dataset_path = Path(dataset_path)
    out_path = Path(out_path)
    try:
        lines = dataset_path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise PipelineError(f"cannot read dataset {dataset_path}: {exc}") from exc

    exported = 0
    with out_path.open("w", encoding="utf-8", newline="\n") as fh:
        for lineno, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                inst = parse_instance(line)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                logger.warning("%s:%d: unparseable instance skipped (%s)", dataset_path, lineno, exc)
                continue
            context_tokens, labels = bio_labels(
                inst.context, [(a.char_start, a.char_end) for a in inst.answers]
            )
            record = {
                "id": inst.id,
                "question_tokens": inst.question.split(),
                "context_tokens": context_tokens,
                "labels": labels,
            }
            fh.write(json.dumps(record, ensure_ascii=False, separators=(",", ":")))
            fh.write("\n")
            exported += 1
    return exported


def compute_stats(dataset_path: str | Path) -> dict[str, float]:
    """Percentage of instances per answer-count bucket, to one decimal."""
    dataset_path = Path(dataset_path)
    try:
        lines = dataset_path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise PipelineError(f"cannot read dataset {dataset_path}: {exc}") from exc

    counts = {bucket: 0 for bucket in HISTOGRAM_BUCKETS}
    total = 0
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            inst = parse_instance(line)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise PipelineError(f"{dataset_path}:{lineno}: unparseable instance ({exc})") from exc
        counts[histogram_bucket(len(inst.answers))] += 1
        total += 1

    if total == 0:
        logger.warning("%s: empty dataset, histogram is all zeros", dataset_path)
        return {bucket: 0.0 for bucket in HISTOGRAM_BUCKETS}
    return {bucket: round(100.0 * count / total, 1) for bucket, count in counts.items()}
