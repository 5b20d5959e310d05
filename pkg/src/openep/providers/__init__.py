from .base import (
    GenerationProvider,
    GenerationRequest,
    ProviderError,
    ProviderTranscript,
    QuotaExhaustedError,
    ReplayMissError,
    SearchProvider,
    SearchRequest,
    SnapshotMissingError,
    TransportError,
    EmbeddingProvider,
    apply_date_window,
    dedup_by_url,
    with_retry,
)
from .mock import (
    MockEmbeddingProvider,
    MockGenerationProvider,
    MockSearchProvider,
    load_corpus,
)
from .recorded import RecordedEmbedding, RecordedGeneration, RecordedSearch
from .replay import (
    ReplayEmbeddingProvider,
    ReplayGenerationProvider,
    ReplaySearchProvider,
)
from .templates import DEFAULT_TEMPLATES, PromptLibrary, TemplateError

__all__ = [
    "GenerationProvider",
    "GenerationRequest",
    "ProviderError",
    "ProviderTranscript",
    "QuotaExhaustedError",
    "ReplayMissError",
    "SearchProvider",
    "SearchRequest",
    "SnapshotMissingError",
    "TransportError",
    "EmbeddingProvider",
    "apply_date_window",
    "dedup_by_url",
    "with_retry",
    "MockEmbeddingProvider",
    "MockGenerationProvider",
    "MockSearchProvider",
    "load_corpus",
    "RecordedEmbedding",
    "RecordedGeneration",
    "RecordedSearch",
    "ReplayEmbeddingProvider",
    "ReplayGenerationProvider",
    "ReplaySearchProvider",
    "DEFAULT_TEMPLATES",
    "PromptLibrary",
    "TemplateError",
]
