"""Transcript-recording wrappers with the retry policy applied."""

from __future__ import annotations

import time

from ..domain import NewsArticle
from .base import (
    EmbeddingProvider,
    GenerationProvider,
    GenerationRequest,
    ProviderTranscript,
    SearchProvider,
    SearchRequest,
    with_retry,
)


class RecordedGeneration:
    def __init__(
        self,
        inner: GenerationProvider,
        transcript: ProviderTranscript,
        attempts: int = 3,
        base_delay: float = 0.5,
    ):
        self.inner = inner
        self.transcript = transcript
        self.attempts = attempts
        self.base_delay = base_delay

    def generate(self, req: GenerationRequest) -> str:
        start = time.monotonic()
        text = with_retry(lambda: self.inner.generate(req), self.attempts, self.base_delay)
        self.transcript.record(
            "generate", req.payload(), text, (time.monotonic() - start) * 1000
        )
        return text


class RecordedSearch:
    def __init__(
        self,
        inner: SearchProvider,
        transcript: ProviderTranscript,
        attempts: int = 3,
        base_delay: float = 0.5,
    ):
        self.inner = inner
        self.transcript = transcript
        self.attempts = attempts
        self.base_delay = base_delay

    def search(self, req: SearchRequest) -> list[NewsArticle]:
        start = time.monotonic()
        articles = with_retry(lambda: self.inner.search(req), self.attempts, self.base_delay)
        self.transcript.record(
            "search",
            req.payload(),
            [a.to_dict() for a in articles],
            (time.monotonic() - start) * 1000,
        )
        return articles


class RecordedEmbedding:
    def __init__(
        self,
        inner: EmbeddingProvider,
        transcript: ProviderTranscript,
        attempts: int = 3,
        base_delay: float = 0.5,
    ):
        self.inner = inner
        self.transcript = transcript
        self.attempts = attempts
        self.base_delay = base_delay

    def embed(self, texts: list[str]) -> list[list[float]]:
        start = time.monotonic()
        vectors = with_retry(lambda: self.inner.embed(texts), self.attempts, self.base_delay)
        self.transcript.record(
            "embed", {"kind": "embed", "texts": list(texts)}, vectors,
            (time.monotonic() - start) * 1000,
        )
        return vectors
