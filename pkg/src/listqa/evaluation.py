"""Exact and partial multi-span scoring with micro-averaged P/R/F1.

Exact match credits a string only for literal membership in the reference
set. Partial match credits character overlap: the longest common subsequence
with the best reference string, normalized by the scored string's length.
Both are pooled over all questions (micro-averaging) before precision and
recall are computed.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Collection, Mapping

logger = logging.getLogger(__name__)

Scorer = Callable[[str, Collection[str]], float]


class EvaluationError(Exception):
    """Fatal problem with evaluation inputs."""


@dataclass(frozen=True)
class EvalInput:
    """Gold and predicted answer sets keyed by question id.

    Answer collections are stored as sorted, de-duplicated tuples so that
    summation order (and thus output) is deterministic.
    """

    gold: Mapping[str, tuple[str, ...]]
    predictions: Mapping[str, tuple[str, ...]]

    def __post_init__(self) -> None:
        unknown = sorted(set(self.predictions) - set(self.gold))
        if unknown:
            raise EvaluationError(f"prediction ids missing from gold: {', '.join(unknown)}")


@dataclass(frozen=True)
class MetricTriple:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class EvalScores:
    exact: MetricTriple
    partial: MetricTriple

    def to_dict(self, digits: int = 4) -> dict:
        def fmt(t: MetricTriple) -> dict:
            return {
                "precision": round(t.precision, digits),
                "recall": round(t.recall, digits),
                "f1": round(t.f1, digits),
            }

        return {"exact": fmt(self.exact), "partial": fmt(self.partial)}


def exact_score(x: str, answers: Collection[str]) -> float:
    """1.0 iff x is literally a member of the reference set."""
    return 1.0 if x in answers else 0.0


def lcs_length(x: str, y: str) -> int:
    """Character-level longest-common-subsequence length (classic DP)."""
    if not x or not y:
        return 0
    prev = [0] * (len(y) + 1)
    for cx in x:
        cur = [0]
        for j, cy in enumerate(y, start=1):
            if cx == cy:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[len(y)]


def longest_common_substring(x: str, y: str) -> int:
    """Longest contiguous common substring length."""
    if not x or not y:
        return 0
    best = 0
    prev = [0] * (len(y) + 1)
    for cx in x:
        cur = [0]
        for j, cy in enumerate(y, start=1):
            run = prev[j - 1] + 1 if cx == cy else 0
            cur.append(run)
            best = max(best, run)
        prev = cur
    return best


def partial_score(x: str, answers: Collection[str], substring_mode: bool = False) -> float:
    """Best character-overlap ratio of x against the reference set.

    Overlap is the longest common subsequence by default, or the longest
    common substring with substring_mode, divided by len(x). Empty reference
    sets score 0; an empty x is a domain error.
    """
    if not x:
        raise EvaluationError("partial_score is undefined for an empty string")
    if not answers:
        return 0.0
    common = longest_common_substring if substring_mode else lcs_length
    return max(common(x, y) for y in answers) / len(x)


def micro_metrics(eval_input: EvalInput, scorer: Scorer) -> MetricTriple:
    """Micro-averaged precision, recall and F1 under the given scorer.

    Precision pools scorer(prediction, gold set) over all predictions;
    recall pools scorer(gold answer, prediction set) over all gold answers.
    When a denominator is zero the metric is 1.0 if every gold and every
    prediction set is empty (vacuously perfect), else 0.0.
    """
    precision_sum = 0.0
    precision_count = 0
    recall_sum = 0.0
    recall_count = 0
    for qid, gold_answers in eval_input.gold.items():
        predicted = eval_input.predictions.get(qid, ())
        for p in predicted:
            precision_sum += scorer(p, gold_answers)
        precision_count += len(predicted)
        for g in gold_answers:
            recall_sum += scorer(g, predicted)
        recall_count += len(gold_answers)

    all_empty = precision_count == 0 and recall_count == 0
    precision = precision_sum / precision_count if precision_count else (1.0 if all_empty else 0.0)
    recall = recall_sum / recall_count if recall_count else (1.0 if all_empty else 0.0)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return MetricTriple(precision=precision, recall=recall, f1=f1)


def load_answer_file(path: str | Path) -> dict[str, tuple[str, ...]]:
    """Load a JSON object mapping question id -> list of answer strings.

    Duplicate answers within a list are removed with a warning; the scoring
    formulas are defined over sets.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise EvaluationError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise EvaluationError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise EvaluationError(f"{path} must contain a JSON object mapping id -> answers")
    result: dict[str, tuple[str, ...]] = {}
    for qid, answers in data.items():
        if not isinstance(answers, list) or not all(isinstance(a, str) for a in answers):
            raise EvaluationError(f"{path}: answers for {qid!r} must be a list of strings")
        unique = sorted(set(answers))
        if len(unique) != len(answers):
            logger.warning("%s: %d duplicate answer(s) removed for %r", path, len(answers) - len(unique), qid)
        result[qid] = tuple(unique)
    return result


def evaluate(gold_path: str | Path, pred_path: str | Path, substring_mode: bool = False) -> EvalScores:
    """Score a prediction file against a gold file under both metrics."""
    eval_input = EvalInput(gold=load_answer_file(gold_path), predictions=load_answer_file(pred_path))

    def partial(x: str, answers: Collection[str]) -> float:
        return partial_score(x, answers, substring_mode=substring_mode)

    return EvalScores(
        exact=micro_metrics(eval_input, exact_score),
        partial=micro_metrics(eval_input, partial),
    )
