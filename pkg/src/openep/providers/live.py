"""Thin HTTP-backed providers.

Generation and embedding speak the common chat/embeddings JSON wire shape;
search expects a JSON endpoint returning article objects. These are
deliberately minimal: provider choice is a config concern and everything
downstream depends only on the three interfaces.
"""

from __future__ import annotations

import os
from typing import Any, Optional

import httpx

from ..config import ProviderConfig
from ..domain import NewsArticle
from ..util import format_date
from .base import (
    GenerationRequest,
    QuotaExhaustedError,
    SearchRequest,
    TransportError,
    apply_date_window,
    dedup_by_url,
)
from .templates import PromptLibrary


def _auth_headers(cfg: ProviderConfig) -> dict[str, str]:
    headers = {"Content-Type": "application/json"}
    if cfg.credential_env:
        token = os.environ.get(cfg.credential_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
    return headers


def _post(cfg: ProviderConfig, path: str, payload: dict[str, Any]) -> dict[str, Any]:
    try:
        resp = httpx.post(
            cfg.endpoint.rstrip("/") + path,
            json=payload,
            headers=_auth_headers(cfg),
            timeout=60.0,
        )
    except httpx.HTTPError as exc:
        raise TransportError(str(exc)) from exc
    if resp.status_code == 429:
        raise QuotaExhaustedError(resp.text)
    if resp.status_code >= 500:
        raise TransportError(f"server error {resp.status_code}")
    if resp.status_code >= 400:
        raise TransportError(f"request rejected with {resp.status_code}: {resp.text}")
    return resp.json()


class HttpGenerationProvider:
    def __init__(self, cfg: ProviderConfig, library: Optional[PromptLibrary] = None):
        self.cfg = cfg
        self.library = library or PromptLibrary()

    def generate(self, req: GenerationRequest) -> str:
        prompt = self.library.render(req.template_id, req.variables)
        body = _post(
            self.cfg,
            "/chat/completions",
            {
                "model": self.cfg.model,
                "messages": [{"role": "user", "content": prompt}],
                "temperature": 0.0 if req.mode == "deterministic" else 1.0,
                "max_tokens": req.max_output_tokens,
            },
        )
        return body["choices"][0]["message"]["content"]


class HttpEmbeddingProvider:
    def __init__(self, cfg: ProviderConfig):
        self.cfg = cfg

    def embed(self, texts: list[str]) -> list[list[float]]:
        if not texts:
            raise ValueError("embed needs at least one text")
        for t in texts:
            if not t:
                raise ValueError("cannot embed an empty string")
        body = _post(self.cfg, "/embeddings", {"model": self.cfg.model, "input": texts})
        data = sorted(body["data"], key=lambda d: d.get("index", 0))
        return [d["embedding"] for d in data]


class HttpSearchProvider:
    """Date-filtered news search against a JSON endpoint.

    The endpoint receives {query, not_before, not_after, count} and must
    return {"articles": [...]} with NewsArticle-shaped objects. The date
    window is re-applied locally: the leakage guard never trusts the remote
    side alone.
    """

    def __init__(self, cfg: ProviderConfig):
        self.cfg = cfg

    def search(self, req: SearchRequest) -> list[NewsArticle]:
        body = _post(
            self.cfg,
            "/search",
            {
                "query": req.query,
                "not_before": req.not_before,
                "not_after": req.not_after,
                "count": req.max_results,
            },
        )
        articles = [NewsArticle.from_dict(a) for a in body.get("articles", [])]
        articles = apply_date_window(articles, req.not_before, req.not_after)
        return dedup_by_url(articles)[: req.max_results]
