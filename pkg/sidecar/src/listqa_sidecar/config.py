"""Service configuration: engine choice, model checkpoints, bind address."""

from __future__ import annotations

from dataclasses import dataclass, field

# Public checkpoints used by the hf engine when none are given explicitly.
DEFAULT_MODELS = {
    "general": {
        "summarizer": "facebook/bart-large-cnn",
        "ner": "dslim/bert-base-NER",
        "question": "mrm8488/t5-base-finetuned-question-generation-ap",
        "qa": "thatdramebaazguy/roberta-base-squad",
    },
    "biomedical": {
        "summarizer": "facebook/bart-large-cnn",
        "ner": "d4data/biomedical-ner-all",
        "question": "mrm8488/t5-base-finetuned-question-generation-ap",
        "qa": "dmis-lab/biobert-base-cased-v1.1-squad",
    },
}

ROLES = ("summarizer", "ner", "question", "qa")


@dataclass
class SidecarConfig:
    domain: str = "general"
    engine: str = "lite"
    models: dict[str, str] = field(default_factory=dict)
    device: str = "cpu"
    host: str = "127.0.0.1"
    port: int = 8000

    def __post_init__(self) -> None:
        if self.domain not in DEFAULT_MODELS:
            raise ValueError(f"domain must be one of {sorted(DEFAULT_MODELS)}, got {self.domain!r}")
        if self.engine not in ("lite", "hf"):
            raise ValueError(f"engine must be 'lite' or 'hf', got {self.engine!r}")
        resolved = dict(DEFAULT_MODELS[self.domain])
        resolved.update(self.models)
        missing = [role for role in ROLES if not resolved.get(role)]
        if missing:
            raise ValueError(f"missing model configuration for: {', '.join(missing)}")
        self.models = resolved


def build_engine(config: SidecarConfig):
    if config.engine == "lite":
        from listqa_sidecar.engines.lite import LiteEngine

        return LiteEngine()
    from listqa_sidecar.engines.hf import HfEngine

    return HfEngine(config)
