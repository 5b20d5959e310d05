"""Shared plumbing: canonical hashing, date handling, bounded parallel map."""

from __future__ import annotations

import hashlib
import json
import re
from concurrent.futures import ThreadPoolExecutor
from datetime import date, datetime
from typing import Any, Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

DATE_FMT = "%Y-%m-%d"

_WS_RE = re.compile(r"\s+")


def canonical_json(value: Any) -> str:
    """Stable JSON rendering used for digests and on-disk records."""
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def digest(value: Any) -> str:
    """sha256 hex digest of the canonical JSON form of ``value``."""
    return hashlib.sha256(canonical_json(value).encode("utf-8")).hexdigest()


def stable_unit(*parts: str) -> float:
    """Deterministic pseudo-uniform in [0, 1) derived from string parts."""
    h = hashlib.sha256("\x1f".join(parts).encode("utf-8")).digest()
    return int.from_bytes(h[:8], "big") / 2**64


def parse_date(value: str) -> date:
    return datetime.strptime(value, DATE_FMT).date()


def format_date(value: date) -> str:
    return value.strftime(DATE_FMT)


def normalize_ws(text: str) -> str:
    """Collapse runs of whitespace and trim; used for span and dedup matching."""
    return _WS_RE.sub(" ", text).strip()


def parallel_map(
    fn: Callable[[T], R],
    items: Sequence[T],
    max_workers: int = 4,
) -> list[R]:
    """Map ``fn`` over ``items`` with a bounded worker pool.

    Results are returned in input order regardless of completion order, so
    callers stay deterministic under concurrency.
    """
    if not items:
        return []
    if max_workers <= 1 or len(items) == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(fn, items))


def dedup_preserving_order(items: Iterable[T]) -> list[T]:
    seen: set[T] = set()
    out: list[T] = []
    for item in items:
        if item not in seen:
            seen.add(item)
            out.append(item)
    return out
