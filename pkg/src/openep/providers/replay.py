"""Transcript-backed providers for bit-identical offline re-runs."""

from __future__ import annotations

from ..domain import NewsArticle
from .base import (
    GenerationRequest,
    ProviderTranscript,
    SearchRequest,
)


class ReplayGenerationProvider:
    def __init__(self, transcript: ProviderTranscript):
        self.transcript = transcript

    def generate(self, req: GenerationRequest) -> str:
        return self.transcript.lookup(req.payload())


class ReplaySearchProvider:
    def __init__(self, transcript: ProviderTranscript):
        self.transcript = transcript

    def search(self, req: SearchRequest) -> list[NewsArticle]:
        rows = self.transcript.lookup(req.payload())
        return [NewsArticle.from_dict(r) for r in rows]


class ReplayEmbeddingProvider:
    def __init__(self, transcript: ProviderTranscript):
        self.transcript = transcript

    def embed(self, texts: list[str]) -> list[list[float]]:
        return self.transcript.lookup({"kind": "embed", "texts": list(texts)})
