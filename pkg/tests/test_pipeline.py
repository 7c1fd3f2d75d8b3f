from __future__ import annotations

import json
from pathlib import Path

import pytest

from listqa.corpus import SamplingSpec
from listqa.gateway import GatewayConfig
from listqa.pipeline import (
    AnswerSpan,
    PipelineConfig,
    PipelineError,
    QaInstance,
    bio_labels,
    compute_stats,
    export_multispan,
    parse_instance,
    run_pipeline,
    serialize_instance,
)
from listqa.refinement import RefineParams

from conftest import DATA_DIR, write_corpus, write_stub_dir

FIGURE_DIR = DATA_DIR / "figure_trace"


def make_config(
    corpus_path: Path,
    out_path: Path,
    stub_dir: Path,
    count: int = 1,
    seed: int = 42,
    tau: float = 0.1,
    max_iters: int = 3,
    workers: int = 1,
    **gateway_overrides,
) -> PipelineConfig:
    return PipelineConfig(
        domain="general",
        corpus_path=str(corpus_path),
        output_path=str(out_path),
        sampling=SamplingSpec(count=count, seed=seed, min_words=1, max_words=10_000),
        refine=RefineParams(tau=tau, max_iters=max_iters),
        gateway=GatewayConfig(backend="stub", stub_fixture_dir=str(stub_dir), **gateway_overrides),
        workers=workers,
    )


def figure_config(out_path: Path, workers: int = 1, seed: int = 42) -> PipelineConfig:
    return make_config(
        FIGURE_DIR / "corpus.jsonl", out_path, FIGURE_DIR, workers=workers, seed=seed
    )


class TestGoldenTrace:
    def test_worked_example_byte_exact(self, tmp_path):
        out = tmp_path / "dataset.jsonl"
        report = run_pipeline(figure_config(out))
        golden = (FIGURE_DIR / "golden.jsonl").read_bytes()
        assert out.read_bytes() == golden
        assert report.candidate_sets == 2  # ORG set + GPE singleton
        assert report.discarded_too_few_initial == 1
        assert report.instances_emitted == 1

    def test_worked_example_content(self, tmp_path):
        out = tmp_path / "dataset.jsonl"
        run_pipeline(figure_config(out))
        inst = parse_instance(out.read_text(encoding="utf-8").splitlines()[0])
        assert [a.text for a in inst.answers] == ["Rice", "Baylor", "Yale"]
        assert [a.confidence for a in inst.answers] == [0.73, 0.45, 0.61]
        assert inst.provenance["expanded_indices"] == [2]
        assert inst.provenance["fallback"] is False
        assert inst.provenance["iterations"] == 2
        for a in inst.answers:
            assert inst.context[a.char_start : a.char_end] == a.text


class TestDeterminism:
    def _run(self, tmp_path, name, workers=1, seed=42):
        out = tmp_path / name
        report = run_pipeline(figure_config(out, workers=workers, seed=seed))
        return out.read_bytes(), report.to_dict()

    def test_identical_runs_identical_outputs(self, tmp_path):
        bytes_a, report_a = self._run(tmp_path, "a.jsonl")
        bytes_b, report_b = self._run(tmp_path, "b.jsonl")
        assert bytes_a == bytes_b
        report_a.pop("stage_timings")
        report_b.pop("stage_timings")
        assert report_a == report_b

    def test_worker_count_does_not_change_output(self, tmp_path):
        corpus = tmp_path / "corpus.jsonl"
        rows = [
            {"id": f"p{i:02d}", "text": f"Aco and Bco expanded in year {i}. Cco joined them."}
            for i in range(12)
        ]
        write_corpus(corpus, rows)
        stub = write_stub_dir(
            tmp_path / "stub",
            {"Aco": "ORG", "Bco": "ORG", "Cco": "ORG"},
            {"*": {"Aco": 0.9, "Bco": 0.8, "Cco": 0.7}},
        )
        outs = []
        for workers in (1, 4):
            out = tmp_path / f"out{workers}.jsonl"
            run_pipeline(make_config(corpus, out, stub, count=12, workers=workers))
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]
        assert outs[0].count(b"\n") == 12

    def test_seed_changes_sample(self, tmp_path):
        corpus = tmp_path / "corpus.jsonl"
        rows = [
            {"id": f"p{i:02d}", "text": f"Aco and Bco expanded in year {i}. Cco joined."}
            for i in range(30)
        ]
        write_corpus(corpus, rows)
        stub = write_stub_dir(
            tmp_path / "stub",
            {"Aco": "ORG", "Bco": "ORG", "Cco": "ORG"},
            {"*": {"Aco": 0.9, "Bco": 0.8, "Cco": 0.7}},
        )
        sampled = []
        for seed in (42, 43):
            out = tmp_path / f"out{seed}.jsonl"
            run_pipeline(make_config(corpus, out, stub, count=5, seed=seed))
            ids = [parse_instance(line).passage_id for line in out.read_text().splitlines()]
            sampled.append(ids)
        assert sampled[0] != sampled[1]


class TestAccounting:
    def test_conservation_over_mixed_outcomes(self, tmp_path):
        corpus = tmp_path / "corpus.jsonl"
        write_corpus(
            corpus,
            [
                # emits one ORG instance, drops a GPE singleton
                {"id": "ok", "text": "Aco and Bco lead in Oslo. They are firms."},
                # every answer scores below tau -> filtered out
                {"id": "weak", "text": "Dro and Ero struggle. They are firms."},
                # no entities at all -> zero candidate sets
                {"id": "plain", "text": "Nothing notable happens here. Truly nothing."},
            ],
        )
        stub = write_stub_dir(
            tmp_path / "stub",
            {"Aco": "ORG", "Bco": "ORG", "Oslo": "GPE", "Dro": "ORG", "Ero": "ORG"},
            {"*": {"Aco": 0.9, "Bco": 0.8, "Dro": 0.01, "Ero": 0.02}},
        )
        out = tmp_path / "out.jsonl"
        report = run_pipeline(make_config(corpus, out, stub, count=3))
        discarded_total = (
            report.discarded_too_few_initial
            + report.discarded_filtered_out
            + report.discarded_unlocalizable
        )
        assert report.candidate_sets == 3
        assert report.instances_emitted == 1
        assert report.discarded_too_few_initial == 1
        assert report.discarded_filtered_out == 1
        assert report.instances_emitted + discarded_total == report.candidate_sets
        assert report.gateway_failures == 0
        assert report.passages_processed == 3

    def test_every_output_line_is_a_valid_instance(self, tmp_path):
        corpus = tmp_path / "corpus.jsonl"
        write_corpus(
            corpus,
            [
                {"id": f"p{i}", "text": f"Aco and Bco lead region {i}. Oslo and Lima host. Cco waits."}
                for i in range(6)
            ],
        )
        stub = write_stub_dir(
            tmp_path / "stub",
            {"Aco": "ORG", "Bco": "ORG", "Cco": "ORG", "Oslo": "GPE", "Lima": "GPE"},
            {"*": {"Aco": 0.9, "Bco": 0.5, "Oslo": 0.7, "Lima": 0.6, "Cco": 0.55}},
        )
        out = tmp_path / "out.jsonl"
        run_pipeline(make_config(corpus, out, stub, count=6, workers=2))
        lines = out.read_text(encoding="utf-8").splitlines()
        assert lines
        from listqa.extraction import normalize_answer

        for line in lines:
            inst = parse_instance(line)
            assert len(inst.answers) >= 2
            starts = [a.char_start for a in inst.answers]
            assert starts == sorted(starts)
            for a, b in zip(inst.answers, inst.answers[1:]):
                assert a.char_end <= b.char_start  # no overlapping ranges
            for a in inst.answers:
                assert normalize_answer(inst.context[a.char_start : a.char_end]) == normalize_answer(a.text)

    def test_output_sorted_by_passage_and_type(self, tmp_path):
        corpus = tmp_path / "corpus.jsonl"
        write_corpus(
            corpus,
            [
                {"id": "zz", "text": "Aco and Bco lead. Oslo and Lima host them."},
                {"id": "aa", "text": "Aco and Bco lead. Oslo and Lima host them."},
            ],
        )
        stub = write_stub_dir(
            tmp_path / "stub",
            {"Aco": "ORG", "Bco": "ORG", "Oslo": "GPE", "Lima": "GPE"},
            {"*": {"Aco": 0.9, "Bco": 0.8, "Oslo": 0.7, "Lima": 0.6}},
        )
        out = tmp_path / "out.jsonl"
        run_pipeline(make_config(corpus, out, stub, count=2))
        ids = [parse_instance(line).id for line in out.read_text().splitlines()]
        assert ids == ["aa#GPE", "aa#ORG", "zz#GPE", "zz#ORG"]


class TestFallbackPath:
    LEXICON = {"Aco": "ORG", "Bco": "ORG", "Cco": "ORG"}
    Q_A = "Which entities include Aco in this context?"
    Q_B = "Which entities include Bco in this context?"

    def _corpus(self, tmp_path) -> Path:
        return write_corpus(
            tmp_path / "corpus.jsonl",
            [{"id": "fb", "text": "Aco, Bco and Cco are firms. They compete loudly."}],
        )

    def test_failed_revalidation_emits_fallback_instance(self, tmp_path):
        # T=1 stops before the set stabilizes; revalidation under the fresh
        # question rejects Cco, so the prior question is emitted instead.
        stub = write_stub_dir(
            tmp_path / "stub",
            self.LEXICON,
            {
                self.Q_A: {"Aco": 0.05, "Bco": 0.5, "Cco": 0.5},
                self.Q_B: {"Bco": 0.5, "Cco": 0.05},
            },
        )
        out = tmp_path / "out.jsonl"
        report = run_pipeline(make_config(self._corpus(tmp_path), out, stub, max_iters=1))
        assert report.instances_emitted == 1
        inst = parse_instance(out.read_text().splitlines()[0])
        assert inst.question == self.Q_B
        assert inst.provenance["fallback"] is True
        assert [a.text for a in inst.answers] == ["Bco", "Cco"]
        assert [a.confidence for a in inst.answers] == [0.5, 0.5]

    def test_unlocalizable_fallback_answer_discards_instance(self, tmp_path):
        stub = write_stub_dir(
            tmp_path / "stub",
            self.LEXICON,
            {
                self.Q_A: {"Aco": 0.05, "Bco": 0.5, "Cco": 0.5},
                self.Q_B: {"Bco": 0.5},  # Cco has no span under the emitted question
            },
        )
        out = tmp_path / "out.jsonl"
        report = run_pipeline(make_config(self._corpus(tmp_path), out, stub, max_iters=1))
        assert report.instances_emitted == 0
        assert report.discarded_unlocalizable == 1


class TestTruncationProvenance:
    def test_context_over_cap_flagged(self, tmp_path):
        corpus = write_corpus(
            tmp_path / "corpus.jsonl",
            [{"id": "long", "text": "Aco and Bco lead. More words follow here well beyond the cap."}],
        )
        stub = write_stub_dir(
            tmp_path / "stub",
            {"Aco": "ORG", "Bco": "ORG"},
            {"*": {"Aco": 0.9, "Bco": 0.8}},
        )
        out = tmp_path / "out.jsonl"
        run_pipeline(make_config(corpus, out, stub, qa_max_context_len=5))
        inst = parse_instance(out.read_text().splitlines()[0])
        assert inst.provenance["truncated"] is True

    def test_no_flag_when_within_cap(self, tmp_path):
        out = tmp_path / "out.jsonl"
        run_pipeline(figure_config(out))
        inst = parse_instance(out.read_text().splitlines()[0])
        assert "truncated" not in inst.provenance


def _instance(n_answers: int, pid: str = "p1") -> QaInstance:
    words = [f"ans{i}" for i in range(n_answers)]
    context = " ".join(words) + " trailing"
    answers = []
    offset = 0
    for word in words:
        answers.append(AnswerSpan(word, offset, offset + len(word), 0.5))
        offset += len(word) + 1
    return QaInstance(
        id=f"{pid}#T",
        passage_id=pid,
        context=context,
        question="Which answers appear here?",
        answers=tuple(answers),
        entity_type="T",
        provenance={"summary": context, "iterations": 1, "expanded_indices": [], "fallback": False},
    )


class TestSerialization:
    def test_round_trip(self):
        inst = _instance(3)
        assert parse_instance(serialize_instance(inst)) == inst

    def test_equal_instances_identical_bytes(self):
        assert serialize_instance(_instance(2)) == serialize_instance(_instance(2))

    def test_field_order_fixed(self):
        line = serialize_instance(_instance(2))
        keys = list(json.loads(line).keys())
        assert keys == ["id", "passage_id", "context", "question", "answers", "entity_type", "provenance"]

    def test_non_ascii_lossless(self):
        inst = QaInstance(
            id="p#T",
            passage_id="p",
            context="Zoé und Łukasz trafen sich in 北京.",
            question="Wer traf sich?",
            answers=(AnswerSpan("Zoé", 0, 3, 0.9), AnswerSpan("Łukasz", 8, 14, 0.8)),
            entity_type="PERSON",
            provenance={"summary": "s", "iterations": 0, "expanded_indices": [], "fallback": False},
        )
        line = serialize_instance(inst)
        assert "Zoé" in line  # not escaped
        assert parse_instance(line) == inst


class TestBioExport:
    def test_two_single_token_answers(self):
        tokens, labels = bio_labels("Rice and Yale win", [(0, 4), (9, 13)])
        assert tokens == ["Rice", "and", "Yale", "win"]
        assert labels == ["B", "O", "B", "O"]

    def test_multi_token_answer(self):
        context = "She attended Le Notre in Paris"
        start = context.find("Le Notre")
        tokens, labels = bio_labels(context, [(start, start + len("Le Notre"))])
        assert labels == ["O", "O", "B", "I", "O", "O"]

    def test_misaligned_answer_extends_to_covering_token(self):
        tokens, labels = bio_labels("Yale wins", [(1, 4)])  # "ale" inside "Yale"
        assert labels == ["B", "O"]

    def test_export_file(self, tmp_path):
        dataset = tmp_path / "data.jsonl"
        lines = [serialize_instance(_instance(2, "a")), serialize_instance(_instance(3, "b"))]
        dataset.write_text("\n".join(lines) + "\n", encoding="utf-8")
        out = tmp_path / "bio.jsonl"
        count = export_multispan(dataset, out)
        assert count == 2
        records = [json.loads(line) for line in out.read_text().splitlines()]
        assert records[0]["labels"] == ["B", "B", "O"]
        assert records[0]["question_tokens"] == ["Which", "answers", "appear", "here?"]
        assert len(records[1]["context_tokens"]) == len(records[1]["labels"])

    def test_unparseable_line_skipped_with_warning(self, tmp_path, caplog):
        dataset = tmp_path / "data.jsonl"
        dataset.write_text(serialize_instance(_instance(2)) + "\nnot json\n", encoding="utf-8")
        out = tmp_path / "bio.jsonl"
        assert export_multispan(dataset, out) == 1
        assert any("unparseable" in r.message for r in caplog.records)


class TestComputeStats:
    def _dataset(self, tmp_path, counts: list[int]) -> Path:
        path = tmp_path / "data.jsonl"
        lines = [serialize_instance(_instance(n, f"p{i}")) for i, n in enumerate(counts)]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    def test_direct_count_example(self, tmp_path):
        stats = compute_stats(self._dataset(tmp_path, [2, 2, 3]))
        assert stats == {"2": 66.7, "3": 33.3, "4-5": 0.0, "6-9": 0.0, ">=10": 0.0}

    def test_single_bucket(self, tmp_path):
        stats = compute_stats(self._dataset(tmp_path, [12]))
        assert stats == {"2": 0.0, "3": 0.0, "4-5": 0.0, "6-9": 0.0, ">=10": 100.0}

    def test_empty_dataset_zeros_with_warning(self, tmp_path, caplog):
        path = tmp_path / "empty.jsonl"
        path.write_text("", encoding="utf-8")
        stats = compute_stats(path)
        assert set(stats.values()) == {0.0}
        assert any("empty" in r.message for r in caplog.records)

    def test_percentages_sum_close_to_hundred(self, tmp_path):
        stats = compute_stats(self._dataset(tmp_path, [2, 2, 2, 3, 3, 4, 5, 6, 9, 10, 11]))
        assert sum(stats.values()) == pytest.approx(100.0, abs=0.2)

    def test_unparseable_dataset_fatal(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text("nope\n", encoding="utf-8")
        with pytest.raises(PipelineError):
            compute_stats(path)


class TestRunPipelineErrors:
    def test_empty_corpus_fatal(self, tmp_path):
        corpus = tmp_path / "corpus.jsonl"
        corpus.write_text("", encoding="utf-8")
        stub = write_stub_dir(tmp_path / "stub", {}, {})
        with pytest.raises(PipelineError):
            run_pipeline(make_config(corpus, tmp_path / "out.jsonl", stub))

    def test_report_histogram_counts(self, tmp_path):
        out = tmp_path / "out.jsonl"
        report = run_pipeline(figure_config(out))
        assert report.answer_count_histogram == {"2": 0, "3": 1, "4-5": 0, "6-9": 0, ">=10": 0}
