"""Embedded store: line-delimited JSON tables plus per-run artifact directories.

One JSONL file per record type keeps the canonical layout importable and
diffable as-is. Writes go through a process lock and a directory file lock,
with whole-table rewrites done atomically (temp file + rename), which is all
the transactionality the single-writer pipeline needs. Run outputs live under
``runs/<run_id>/`` and are never rewritten once the manifest is finalized.
"""

from __future__ import annotations

import json
import os
import threading
from pathlib import Path
from typing import Any, Callable, Iterable, Optional, TypeVar

from filelock import FileLock

from .domain import Record

T = TypeVar("T", bound=Record)

TABLES = {
    "topics": "HotTopic",
    "questions": "PredictiveQuestion",
    "articles": "NewsArticle",
    "outcomes": "Outcome",
    "checklists": "PrincipleChecklist",
    "reranked": "RerankedArticle",
    "audits": "AuditEntry",
}


class StorageError(Exception):
    pass


class DuplicateRecordError(StorageError):
    pass


class ConflictError(StorageError):
    """Optimistic-lock failure: the record changed under the writer."""


def read_jsonl(path: Path) -> list[dict[str, Any]]:
    if not path.exists():
        return []
    rows = []
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def write_jsonl(path: Path, rows: Iterable[dict[str, Any]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")
    os.replace(tmp, path)


class Store:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()
        self._flock = FileLock(str(self.root / ".store.lock"))
        self._tables: dict[str, dict[str, dict[str, Any]]] = {}
        self._counters: dict[str, int] = {}
        self._load()

    # -- table plumbing ------------------------------------------------------

    def _path(self, table: str) -> Path:
        return self.root / f"{table}.jsonl"

    def _load(self) -> None:
        for table in TABLES:
            rows = read_jsonl(self._path(table))
            self._tables[table] = {row["id"]: row for row in rows if "id" in row}
        counters_path = self.root / "counters.json"
        if counters_path.exists():
            self._counters = json.loads(counters_path.read_text(encoding="utf-8"))

    def _flush(self, table: str) -> None:
        write_jsonl(self._path(table), self._tables[table].values())

    def _flush_counters(self) -> None:
        path = self.root / "counters.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(self._counters, sort_keys=True), encoding="utf-8")
        os.replace(tmp, path)

    def new_id(self, prefix: str) -> str:
        with self._lock:
            n = self._counters.get(prefix, 0) + 1
            self._counters[prefix] = n
            self._flush_counters()
            return f"{prefix}-{n:06d}"

    def add(self, table: str, record: Record, *, replace: bool = False) -> None:
        row = record.to_dict()
        if "id" not in row:
            raise StorageError(f"records in {table!r} need an id")
        with self._lock, self._flock:
            if not replace and row["id"] in self._tables[table]:
                raise DuplicateRecordError(f"{table}:{row['id']} already exists")
            self._tables[table][row["id"]] = row
            self._flush(table)

    def get(self, table: str, record_id: str, cls: type[T]) -> Optional[T]:
        with self._lock:
            row = self._tables[table].get(record_id)
        return cls.from_dict(row) if row is not None else None

    def all(self, table: str, cls: type[T]) -> list[T]:
        with self._lock:
            rows = list(self._tables[table].values())
        return [cls.from_dict(row) for row in rows]

    def update(
        self,
        table: str,
        record_id: str,
        cls: type[T],
        mutate: Callable[[T], T],
        *,
        expect: Optional[Callable[[T], bool]] = None,
    ) -> T:
        """Read-modify-write under the store lock.

        ``expect`` is the optimistic guard: when it rejects the current state
        a ConflictError is raised and nothing is written.
        """
        with self._lock, self._flock:
            row = self._tables[table].get(record_id)
            if row is None:
                raise StorageError(f"{table}:{record_id} not found")
            current = cls.from_dict(row)
            if expect is not None and not expect(current):
                raise ConflictError(f"{table}:{record_id} changed state")
            updated = mutate(current)
            self._tables[table][record_id] = updated.to_dict()
            self._flush(table)
            return updated

    # -- cross-record links --------------------------------------------------

    def link(self, name: str, key: str, values: list[str]) -> None:
        """Persist a one-to-many link table (e.g. question -> candidate articles)."""
        path = self.root / "links" / f"{name}.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        data = json.loads(path.read_text(encoding="utf-8")) if path.exists() else {}
        data[key] = values
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(data, sort_keys=True, ensure_ascii=False), encoding="utf-8")
        os.replace(tmp, path)

    def linked(self, name: str, key: str) -> list[str]:
        path = self.root / "links" / f"{name}.json"
        if not path.exists():
            return []
        data = json.loads(path.read_text(encoding="utf-8"))
        return data.get(key, [])

    # -- run artifacts ---------------------------------------------------------

    def run_dir(self, run_id: str) -> Path:
        path = self.root / "runs" / run_id
        path.mkdir(parents=True, exist_ok=True)
        return path

    def run_exists(self, run_id: str) -> bool:
        return (self.root / "runs" / run_id / "manifest.json").exists()

    def write_run_json(self, run_id: str, name: str, payload: Any) -> Path:
        path = self.run_dir(run_id) / name
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(
            json.dumps(payload, sort_keys=True, ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8",
        )
        os.replace(tmp, path)
        return path

    def read_run_json(self, run_id: str, name: str) -> Any:
        path = self.root / "runs" / run_id / name
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def write_run_jsonl(self, run_id: str, name: str, rows: Iterable[dict[str, Any]]) -> Path:
        path = self.run_dir(run_id) / name
        write_jsonl(path, rows)
        return path

    def read_run_jsonl(self, run_id: str, name: str) -> list[dict[str, Any]]:
        return read_jsonl(self.root / "runs" / run_id / name)

    def list_runs(self) -> list[str]:
        runs_root = self.root / "runs"
        if not runs_root.exists():
            return []
        return sorted(p.name for p in runs_root.iterdir() if (p / "manifest.json").exists())
