"""Run configuration: one structured file, credentials via env-var indirection."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from .util import digest


@dataclass
class ProviderConfig:
    """Settings for one remote capability (generation, search, or embedding)."""

    kind: str = "mock"  # mock | replay | http
    endpoint: str = ""
    credential_env: str = ""
    model: str = ""
    concurrency: int = 4

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ProviderConfig":
        return cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})


@dataclass
class OpenEPConfig:
    data_dir: str = "data"
    language: str = "en"
    seed: int = 0

    window_days: int = 15
    interval_count: int = 3

    # Retrieval / construction knobs (all recorded in the run manifest).
    relevance_threshold: int = 3
    rerank_threshold: int = 3
    stakeholder_cap: int = 8
    query_cap: int = 5
    max_search_results: int = 8
    enrich_max_articles: int = 5
    candidate_question_cap: int = 12

    # Integration knobs.
    dedup_tau: float = 0.92
    k_max: int = 10

    retry_attempts: int = 3
    retry_base_delay: float = 0.5
    concurrency: int = 4

    auth_token_env: str = "OPENEP_TOKEN"
    mock_corpus: Optional[str] = None  # articles JSONL for the mock search provider
    mock_index: Optional[str] = None  # query -> article-id index file
    prompt_overrides: Optional[str] = None  # per-language template resource file

    generation: ProviderConfig = field(default_factory=ProviderConfig)
    search: ProviderConfig = field(default_factory=ProviderConfig)
    embedding: ProviderConfig = field(default_factory=ProviderConfig)

    @classmethod
    def load(cls, path: str | Path) -> "OpenEPConfig":
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "OpenEPConfig":
        kwargs: dict[str, Any] = {}
        for name in cls.__dataclass_fields__:
            if name not in raw:
                continue
            value = raw[name]
            if name in ("generation", "search", "embedding"):
                value = ProviderConfig.from_dict(value or {})
            kwargs[name] = value
        return cls(**kwargs)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def config_digest(self) -> str:
        """Stable digest of everything that can influence pipeline output."""
        return digest(self.to_dict())
