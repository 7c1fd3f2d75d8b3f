"""Corpus loading and reproducible passage sampling.

The corpus format is JSONL: one object per line with string fields "id" and
"text". Sampling is seeded and without replacement so that a (corpus, spec)
pair always yields the same passages in the same order.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

logger = logging.getLogger(__name__)


class CorpusError(Exception):
    """Fatal problem with a corpus file or sampling request."""


@dataclass(frozen=True)
class Passage:
    """A unit of source text with a stable identifier."""

    id: str
    text: str
    source: str = "general"


@dataclass(frozen=True)
class SamplingSpec:
    """How many passages to draw and which word-count range is eligible."""

    count: int
    seed: int = 42
    min_words: int = 50
    max_words: int = 600

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")
        if self.min_words < 0:
            raise ValueError(f"min_words must be >= 0, got {self.min_words}")
        if self.min_words >= self.max_words:
            raise ValueError(
                f"min_words must be < max_words, got {self.min_words} >= {self.max_words}"
            )


def load_corpus(path: str | Path, source: str = "general") -> list[Passage]:
    """Read a JSONL corpus file, in file order.

    Lines that do not parse, or whose text is empty after trimming, are
    skipped with a warning. A duplicate id is fatal: downstream provenance
    keys on it.
    """
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read corpus file {path}: {exc}") from exc

    passages: list[Passage] = []
    seen_ids: set[str] = set()
    skipped = 0
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            logger.warning("%s:%d: malformed JSON, line skipped (%s)", path, lineno, exc)
            skipped += 1
            continue
        if not isinstance(record, dict):
            logger.warning("%s:%d: record is not an object, line skipped", path, lineno)
            skipped += 1
            continue
        pid = record.get("id")
        text = record.get("text")
        if not isinstance(pid, str) or not pid or not isinstance(text, str):
            logger.warning("%s:%d: missing or non-string id/text, line skipped", path, lineno)
            skipped += 1
            continue
        if not text.strip():
            logger.warning("%s:%d: empty text, line skipped", path, lineno)
            skipped += 1
            continue
        if pid in seen_ids:
            raise CorpusError(f"duplicate passage id {pid!r} at {path}:{lineno}")
        seen_ids.add(pid)
        passages.append(Passage(id=pid, text=text, source=source))

    if skipped:
        logger.warning("%s: skipped %d invalid line(s), kept %d passage(s)", path, skipped, len(passages))
    return passages


def sample_passages(corpus: Sequence[Passage], spec: SamplingSpec) -> list[Passage]:
    """Sample min(count, eligible) passages uniformly without replacement.

    Eligibility is a whitespace word-count filter. The order of the result is
    the seeded shuffle order, so identical inputs reproduce byte-identical
    downstream datasets.
    """
    eligible = [p for p in corpus if spec.min_words <= len(p.text.split()) <= spec.max_words]
    if not eligible:
        raise CorpusError(
            f"no passage has a word count within [{spec.min_words}, {spec.max_words}] "
            f"({len(corpus)} passages checked)"
        )
    rng = random.Random(spec.seed)
    order = list(range(len(eligible)))
    rng.shuffle(order)
    return [eligible[i] for i in order[: spec.count]]
