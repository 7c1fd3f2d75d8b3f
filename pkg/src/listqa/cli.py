"""Command-line interface: generate, evaluate, stats, export, health.

All commands print machine-readable JSON to stdout and diagnostics to
stderr. Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from listqa.corpus import CorpusError, SamplingSpec
from listqa.evaluation import EvaluationError, evaluate
from listqa.gateway import GatewayConfig, GatewayError, fetch_health
from listqa.pipeline import PipelineConfig, PipelineError, compute_stats, export_multispan, run_pipeline
from listqa.refinement import RefineParams

logger = logging.getLogger("listqa")

ENDPOINT_ENV_VAR = "LIQUID_ENDPOINT"

DOMAIN_TAU = {"general": 0.1, "biomedical": 0.05}

GENERATE_DEFAULTS = {
    "num_passages": 1000,
    "max_iters": 3,
    "seed": 42,
    "workers": 4,
    "backend": "remote",
    "min_words": 50,
    "max_words": 600,
    "top_k": 20,
    "strict_expansion_floor": False,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="listqa", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a synthetic dataset from a passage corpus")
    gen.add_argument("--corpus", help="JSONL corpus file with id/text fields")
    gen.add_argument("--domain", choices=["general", "biomedical"])
    gen.add_argument("--out", help="output dataset path (JSONL)")
    gen.add_argument("--config", help="JSON config file; flags override its values")
    gen.add_argument("--num-passages", type=int, dest="num_passages")
    gen.add_argument("--tau", type=float)
    gen.add_argument("--max-iters", type=int, dest="max_iters")
    gen.add_argument("--seed", type=int)
    gen.add_argument("--workers", type=int)
    gen.add_argument("--backend", choices=["stub", "remote"])
    gen.add_argument("--endpoint", help=f"inference service URL (or ${ENDPOINT_ENV_VAR})")
    gen.add_argument("--stub-dir", dest="stub_dir", help="fixture directory for the stub backend")
    gen.add_argument("--min-words", type=int, dest="min_words")
    gen.add_argument("--max-words", type=int, dest="max_words")

    ev = sub.add_parser("evaluate", help="score predictions against gold answers")
    ev.add_argument("--gold", required=True)
    ev.add_argument("--pred", required=True)
    ev.add_argument(
        "--substring-mode",
        action="store_true",
        help="partial match uses longest common substring instead of subsequence",
    )

    st = sub.add_parser("stats", help="answer-count histogram of a dataset file")
    st.add_argument("--data", required=True)

    ex = sub.add_parser("export", help="convert a dataset to token-level BIO records")
    ex.add_argument("--data", required=True)
    ex.add_argument("--out", required=True)

    he = sub.add_parser("health", help="query the inference service health endpoint")
    he.add_argument("--endpoint", help=f"inference service URL (or ${ENDPOINT_ENV_VAR})")

    return parser


def _usage_error(parser: argparse.ArgumentParser, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    parser.print_usage(sys.stderr)
    return 2


def _merge_generate_options(args: argparse.Namespace, parser: argparse.ArgumentParser) -> dict | int:
    """Resolve generate options: flags > config file > defaults."""
    options = dict(GENERATE_DEFAULTS)
    if args.config:
        try:
            file_values = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read config file: {exc}", file=sys.stderr)
            return 1
        if not isinstance(file_values, dict):
            return _usage_error(parser, "--config must contain a JSON object")
        unknown = set(file_values) - set(GENERATE_DEFAULTS) - {
            "corpus", "domain", "out", "tau", "endpoint", "stub_dir"
        }
        if unknown:
            return _usage_error(parser, f"unknown config keys: {', '.join(sorted(unknown))}")
        options.update(file_values)
    for key in (
        "corpus", "domain", "out", "num_passages", "tau", "max_iters", "seed",
        "workers", "backend", "endpoint", "stub_dir", "min_words", "max_words",
    ):
        value = getattr(args, key, None)
        if value is not None:
            options[key] = value

    for required in ("corpus", "domain", "out"):
        if not options.get(required):
            return _usage_error(parser, f"--{required} is required")
    if options["domain"] not in DOMAIN_TAU:
        return _usage_error(parser, "--domain must be general or biomedical")
    if options.get("tau") is None:
        options["tau"] = DOMAIN_TAU[options["domain"]]

    if options["backend"] == "stub":
        if not options.get("stub_dir"):
            return _usage_error(parser, "--backend stub requires --stub-dir")
    elif options["backend"] == "remote":
        options.setdefault("endpoint", None)
        options["endpoint"] = options["endpoint"] or os.environ.get(ENDPOINT_ENV_VAR)
        if not options["endpoint"]:
            return _usage_error(
                parser, f"--backend remote requires --endpoint or ${ENDPOINT_ENV_VAR}"
            )
    return options


def _cmd_generate(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    options = _merge_generate_options(args, parser)
    if isinstance(options, int):
        return options
    try:
        config = PipelineConfig(
            domain=options["domain"],
            corpus_path=options["corpus"],
            output_path=options["out"],
            sampling=SamplingSpec(
                count=options["num_passages"],
                seed=options["seed"],
                min_words=options["min_words"],
                max_words=options["max_words"],
            ),
            refine=RefineParams(
                tau=options["tau"],
                max_iters=options["max_iters"],
                strict_expansion_floor=bool(options["strict_expansion_floor"]),
            ),
            gateway=GatewayConfig(
                backend=options["backend"],
                endpoint_url=options.get("endpoint"),
                stub_fixture_dir=options.get("stub_dir"),
                top_k=options["top_k"],
            ),
            workers=options["workers"],
        )
    except ValueError as exc:
        return _usage_error(parser, str(exc))
    try:
        report = run_pipeline(config)
    except (CorpusError, PipelineError, GatewayError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(report.to_dict(), ensure_ascii=False, indent=2))
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    try:
        scores = evaluate(args.gold, args.pred, substring_mode=args.substring_mode)
    except EvaluationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(scores.to_dict(), indent=2))
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    try:
        histogram = compute_stats(args.data)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(histogram, indent=2))
    return 0


def _cmd_export(args: argparse.Namespace) -> int:
    try:
        count = export_multispan(args.data, args.out)
    except (PipelineError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps({"exported": count, "out": args.out}))
    return 0


def _cmd_health(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    endpoint = args.endpoint or os.environ.get(ENDPOINT_ENV_VAR)
    if not endpoint:
        return _usage_error(parser, f"health requires --endpoint or ${ENDPOINT_ENV_VAR}")
    try:
        body = fetch_health(endpoint)
    except GatewayError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(body, ensure_ascii=False, indent=2))
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "generate":
        return _cmd_generate(args, parser)
    if args.command == "evaluate":
        return _cmd_evaluate(args)
    if args.command == "stats":
        return _cmd_stats(args)
    if args.command == "export":
        return _cmd_export(args)
    if args.command == "health":
        return _cmd_health(args, parser)
    return 2


if __name__ == "__main__":
    sys.exit(main())
