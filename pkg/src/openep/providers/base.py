"""Provider abstractions for the three remote capabilities.

Everything the pipeline asks of the outside world goes through three small
interfaces (text generation, news search, text embedding). Each call is
recorded in a transcript keyed by a request digest, which is what makes
replayed, bit-identical offline runs possible.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Protocol

from ..domain import NewsArticle
from ..util import digest, parse_date


class ProviderError(Exception):
    """Base class for provider failures."""


class TransportError(ProviderError):
    """Retryable transport-level failure."""


class QuotaExhaustedError(ProviderError):
    """Distinct signal so the harness can back off instead of retrying."""


class SnapshotMissingError(ProviderError):
    """The search corpus has no coverage for the requested date."""


class TruncatedOutputError(ProviderError):
    """Generation hit the output-length ceiling."""


class ReplayMissError(ProviderError):
    """Replay found no recorded response for this request digest.

    This signals pipeline nondeterminism and is a test failure, never a
    fallback path.
    """


@dataclass
class GenerationRequest:
    template_id: str
    variables: dict[str, str] = field(default_factory=dict)
    mode: str = "deterministic"  # deterministic | sampled
    max_output_tokens: int = 1024

    def payload(self) -> dict[str, Any]:
        return {
            "kind": "generate",
            "template_id": self.template_id,
            "variables": dict(self.variables),
            "mode": self.mode,
            "max_output_tokens": self.max_output_tokens,
        }


@dataclass
class SearchRequest:
    query: str
    not_before: Optional[str] = None
    not_after: Optional[str] = None  # leakage cutoff
    max_results: int = 8

    def __post_init__(self) -> None:
        if not self.query:
            raise ValueError("search query must be non-empty")
        if self.not_before and self.not_after:
            if parse_date(self.not_before) > parse_date(self.not_after):
                raise ValueError("not_before is after not_after")

    def payload(self) -> dict[str, Any]:
        return {
            "kind": "search",
            "query": self.query,
            "not_before": self.not_before,
            "not_after": self.not_after,
            "max_results": self.max_results,
        }


@dataclass
class TranscriptEntry:
    index: int
    kind: str
    request_digest: str
    response_digest: str
    wall_ms: float
    request: dict[str, Any]
    response: Any

    def to_dict(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "kind": self.kind,
            "request_digest": self.request_digest,
            "response_digest": self.response_digest,
            "wall_ms": self.wall_ms,
            "request": self.request,
            "response": self.response,
        }


class ProviderTranscript:
    """Append-only record of every provider exchange in a run."""

    def __init__(self, run_id: str = ""):
        self.run_id = run_id
        self._entries: list[TranscriptEntry] = []
        self._lock = threading.Lock()

    def record(self, kind: str, request: dict[str, Any], response: Any, wall_ms: float) -> None:
        with self._lock:
            self._entries.append(
                TranscriptEntry(
                    index=len(self._entries),
                    kind=kind,
                    request_digest=digest(request),
                    response_digest=digest(response),
                    wall_ms=wall_ms,
                    request=request,
                    response=response,
                )
            )

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def entries(self) -> list[TranscriptEntry]:
        with self._lock:
            return list(self._entries)

    def to_rows(self) -> list[dict[str, Any]]:
        return [e.to_dict() for e in self.entries()]

    @classmethod
    def from_rows(cls, rows: list[dict[str, Any]], run_id: str = "") -> "ProviderTranscript":
        t = cls(run_id)
        for row in rows:
            t._entries.append(
                TranscriptEntry(
                    index=row["index"],
                    kind=row["kind"],
                    request_digest=row["request_digest"],
                    response_digest=row["response_digest"],
                    wall_ms=row["wall_ms"],
                    request=row["request"],
                    response=row["response"],
                )
            )
        return t

    def lookup(self, request: dict[str, Any]) -> Any:
        """Return the recorded response for this request digest.

        Repeated identical requests replay their recorded responses in call
        order, then stick to the last one (deterministic-mode calls are
        identical anyway).
        """
        want = digest(request)
        with self._lock:
            matches = [e for e in self._entries if e.request_digest == want]
            if not matches:
                raise ReplayMissError(
                    f"no recorded response for {request.get('kind')} digest {want[:12]}"
                )
            served = self._served = getattr(self, "_served", {})
            idx = served.get(want, 0)
            served[want] = idx + 1
            return matches[min(idx, len(matches) - 1)].response


class GenerationProvider(Protocol):
    def generate(self, req: GenerationRequest) -> str: ...


class SearchProvider(Protocol):
    def search(self, req: SearchRequest) -> list[NewsArticle]: ...


class EmbeddingProvider(Protocol):
    def embed(self, texts: list[str]) -> list[list[float]]: ...


def with_retry(
    fn: Callable[[], Any],
    attempts: int = 3,
    base_delay: float = 0.5,
    sleep: Callable[[float], None] = time.sleep,
) -> Any:
    """Retry idempotent calls on transport failures with exponential backoff."""
    last: Optional[Exception] = None
    for attempt in range(attempts):
        try:
            return fn()
        except TransportError as exc:
            last = exc
            if attempt < attempts - 1:
                sleep(base_delay * 2**attempt)
    assert last is not None
    raise last


def apply_date_window(
    articles: list[NewsArticle],
    not_before: Optional[str],
    not_after: Optional[str],
) -> list[NewsArticle]:
    """Enforce the leakage guard on a result list.

    Articles with an unknown publication date are excluded whenever a date
    bound is active: conservatism beats recall where leakage is concerned.
    """
    if not_before is None and not_after is None:
        return list(articles)
    kept = []
    for a in articles:
        if a.published_at is None:
            continue
        day = parse_date(a.published_at)
        if not_before is not None and day < parse_date(not_before):
            continue
        if not_after is not None and day > parse_date(not_after):
            continue
        kept.append(a)
    return kept


def dedup_by_url(articles: list[NewsArticle]) -> list[NewsArticle]:
    seen: set[str] = set()
    out = []
    for a in articles:
        if a.url in seen:
            continue
        seen.add(a.url)
        out.append(a)
    return out
