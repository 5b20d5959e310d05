"""Pipeline context: storage, providers, config, and the logical clock.

Every stage takes a PipelineContext rather than reaching for globals. The
``today`` field is the logical calendar day the pipeline believes it is
running on; leakage cutoffs, window checks, and produced_at stamps all derive
from it, never from the wall clock.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date
from typing import Any, Optional

from .config import OpenEPConfig, ProviderConfig
from .domain import NewsArticle
from .providers import (
    GenerationRequest,
    MockEmbeddingProvider,
    MockGenerationProvider,
    MockSearchProvider,
    PromptLibrary,
    ProviderTranscript,
    RecordedEmbedding,
    RecordedGeneration,
    RecordedSearch,
    ReplayEmbeddingProvider,
    ReplayGenerationProvider,
    ReplaySearchProvider,
    SearchRequest,
)
from .storage import Store
from .util import format_date, parse_date


def build_providers(
    config: OpenEPConfig,
    transcript: ProviderTranscript,
    library: Optional[PromptLibrary] = None,
    replay_source: Optional[ProviderTranscript] = None,
):
    """Construct the three capability clients per config, transcript-wrapped."""
    library = library or PromptLibrary.load(config.prompt_overrides)

    def pick(cfg: ProviderConfig, capability: str):
        if cfg.kind == "mock":
            if capability == "generation":
                return MockGenerationProvider(seed=config.seed, library=library)
            if capability == "search":
                if config.mock_corpus:
                    return MockSearchProvider.from_files(config.mock_corpus, config.mock_index)
                return MockSearchProvider([])
            return MockEmbeddingProvider(seed=config.seed)
        if cfg.kind == "replay":
            if replay_source is None:
                raise ValueError("replay providers need a recorded transcript")
            if capability == "generation":
                return ReplayGenerationProvider(replay_source)
            if capability == "search":
                return ReplaySearchProvider(replay_source)
            return ReplayEmbeddingProvider(replay_source)
        if cfg.kind == "http":
            from .providers.live import (
                HttpEmbeddingProvider,
                HttpGenerationProvider,
                HttpSearchProvider,
            )

            if capability == "generation":
                return HttpGenerationProvider(cfg, library)
            if capability == "search":
                return HttpSearchProvider(cfg)
            return HttpEmbeddingProvider(cfg)
        raise ValueError(f"unknown provider kind {cfg.kind!r}")

    attempts = config.retry_attempts
    delay = config.retry_base_delay
    gen = RecordedGeneration(pick(config.generation, "generation"), transcript, attempts, delay)
    search = RecordedSearch(pick(config.search, "search"), transcript, attempts, delay)
    embed = RecordedEmbedding(pick(config.embedding, "embedding"), transcript, attempts, delay)
    return gen, search, embed


@dataclass
class PipelineContext:
    store: Store
    config: OpenEPConfig
    gen: Any
    searcher: Any
    embedder: Any
    transcript: ProviderTranscript
    library: PromptLibrary
    today: date
    flags: list[dict] = field(default_factory=list)

    @classmethod
    def create(
        cls,
        store: Store,
        config: OpenEPConfig,
        today: date | str,
        transcript: Optional[ProviderTranscript] = None,
        replay_source: Optional[ProviderTranscript] = None,
        providers: Optional[tuple] = None,
    ) -> "PipelineContext":
        transcript = transcript or ProviderTranscript()
        library = PromptLibrary.load(config.prompt_overrides)
        if providers is not None:
            gen, searcher, embedder = providers
        else:
            gen, searcher, embedder = build_providers(
                config, transcript, library, replay_source
            )
        if isinstance(today, str):
            today = parse_date(today)
        return cls(
            store=store,
            config=config,
            gen=gen,
            searcher=searcher,
            embedder=embedder,
            transcript=transcript,
            library=library,
            today=today,
        )

    # -- convenience wrappers ---------------------------------------------------

    def generate(self, template_id: str, **variables: str) -> str:
        req = GenerationRequest(template_id=template_id, variables=variables)
        return self.gen.generate(req)

    def search(
        self,
        query: str,
        not_before: Optional[str] = None,
        not_after: Optional[str] = None,
        max_results: Optional[int] = None,
    ) -> list[NewsArticle]:
        req = SearchRequest(
            query=query,
            not_before=not_before,
            not_after=not_after,
            max_results=max_results or self.config.max_search_results,
        )
        return self.searcher.search(req)

    def embed(self, texts: list[str]) -> list[list[float]]:
        return self.embedder.embed(texts)

    def flag(self, kind: str, **details: Any) -> None:
        self.flags.append({"kind": kind, **details})

    @property
    def today_str(self) -> str:
        return format_date(self.today)
