"""Deterministic in-process providers for offline runs and tests.

The generation mock is a pure function of (seed, request): built-in handlers
produce parseable text for every pipeline template, and tests can override any
template with a constant or a pure callable. The search mock serves a fixture
corpus (optionally driven by a query -> article-id index file); the embedding
mock derives vectors from a text hash so equal texts embed identically.
"""

from __future__ import annotations

import hashlib
import re
from pathlib import Path
from typing import Callable, Optional, Union

import json

from ..domain import CATEGORY_ORDER, NewsArticle
from ..util import dedup_preserving_order, normalize_ws, stable_unit
from .base import (
    GenerationRequest,
    SearchRequest,
    SnapshotMissingError,
    apply_date_window,
    dedup_by_url,
)
from .templates import PromptLibrary

ScriptValue = Union[str, Callable[[dict[str, str]], str]]

_CAP_RUN_RE = re.compile(r"\b[A-Z][a-zA-Z'-]*(?:\s+[A-Z][a-zA-Z'-]*)*")
_SENTENCE_RE = re.compile(r"(?<=[.!?])\s+")
_WORD_RE = re.compile(r"[a-z0-9]+")

_STOPWORDS = {
    "the", "a", "an", "in", "on", "at", "of", "for", "to", "and", "or",
    "will", "what", "when", "where", "how", "which", "who", "is", "are",
    "be", "next", "this", "that", "with", "by", "after", "before", "its",
}

_SKIP_NAMES = {"The", "A", "An", "In", "On", "At", "What", "When", "Where", "How", "Which", "Who", "It", "This", "That"}


def _sentences(text: str) -> list[str]:
    return [s.strip() for s in _SENTENCE_RE.split(text) if s.strip()]


def _tokens(text: str) -> set[str]:
    return {t for t in _WORD_RE.findall(text.lower()) if t not in _STOPWORDS}


def _capitalized_names(text: str, limit: int = 5) -> list[str]:
    names = []
    for m in _CAP_RUN_RE.finditer(text):
        name = m.group(0).strip()
        if name in _SKIP_NAMES or len(name) < 2:
            continue
        names.append(name)
    return dedup_preserving_order(names)[:limit]


class MockGenerationProvider:
    """Scriptable deterministic text generation."""

    def __init__(
        self,
        seed: int = 0,
        script: Optional[dict[str, ScriptValue]] = None,
        library: Optional[PromptLibrary] = None,
    ):
        self.seed = seed
        self.script = dict(script or {})
        self.library = library or PromptLibrary()
        self._sample_counter = 0

    def _unit(self, *parts: str) -> float:
        return stable_unit(str(self.seed), *parts)

    def generate(self, req: GenerationRequest) -> str:
        if req.template_id in self.library:
            # Validates the placeholder/variable binding invariant.
            self.library.render(req.template_id, req.variables)
        if req.mode == "sampled":
            self._sample_counter += 1
        scripted = self.script.get(req.template_id)
        if scripted is not None:
            return scripted(req.variables) if callable(scripted) else scripted
        handler = getattr(self, f"_h_{req.template_id}", None)
        if handler is not None:
            return handler(req.variables)
        salt = str(self._sample_counter) if req.mode == "sampled" else ""
        tag = hashlib.sha256(
            f"{self.seed}|{req.template_id}|{sorted(req.variables.items())}|{salt}".encode()
        ).hexdigest()[:8]
        return f"[mock:{req.template_id}:{tag}]"

    # -- built-in template handlers -------------------------------------------

    def _h_echo(self, v: dict[str, str]) -> str:
        return v["x"]

    def _h_enrich_background(self, v: dict[str, str]) -> str:
        coverage = "; ".join(line.strip() for line in v["articles"].splitlines() if line.strip())
        text = f"{v['title']}. {v['raw_background']}"
        return f"{text} Recent coverage: {coverage}" if coverage else text

    def _h_topic_validity(self, v: dict[str, str]) -> str:
        blob = f"{v['title']} {v['background']}".lower()
        stale = ("years ago", "has ended", "concluded", "do you remember", "occurred years")
        if any(marker in blob for marker in stale):
            return "INVALID: the event is not currently unfolding"
        return "VALID: ongoing event with developments expected"

    def _h_candidate_questions(self, v: dict[str, str]) -> str:
        t = v["title"].rstrip(".?!")
        lines = {
            "time": f"time: When will {t} reach its next milestone?",
            "location": f"location: Where will the next development of {t} take place?",
            "development": f"development: How will {t} unfold over the coming days?",
            "outcome": f"outcome: What will be the direct result of {t}?",
            "impact": f"impact: What impact will {t} have on related sectors?",
            "response": f"response: How will the public react to {t}?",
            "other": f"other: What open aspects of {t} need clarification?",
        }
        return "\n".join(lines[c] for c in CATEGORY_ORDER)

    def _h_principle_check(self, v: dict[str, str]) -> str:
        return "PASS: no issue found"

    def _h_rerank_outcome(self, v: dict[str, str]) -> str:
        return "SCORE: 4"

    def _h_relevance(self, v: dict[str, str]) -> str:
        return "SCORE: 4"

    def _h_relevance_similar(self, v: dict[str, str]) -> str:
        return "SCORE: 4"

    def _h_extract_stakeholders_article(self, v: dict[str, str]) -> str:
        return "\n".join(_capitalized_names(f"{v['title']} {v['body']}"))

    def _h_extract_stakeholders_question(self, v: dict[str, str]) -> str:
        return "\n".join(_capitalized_names(f"{v['question']} {v['background']}"))

    def _h_expand_relevant_queries(self, v: dict[str, str]) -> str:
        names = [s.strip() for s in v["stakeholders"].split(",") if s.strip()]
        if not names:
            return f"{v['question']} latest developments\n{v['question']} background"
        return "\n".join(f"{v['question']} {name}" for name in names[:4])

    def _h_abstract_role(self, v: dict[str, str]) -> str:
        roles = ("country", "government officials", "organization", "entity")
        return roles[int(self._unit("role", v["name"]) * len(roles))]

    def _h_expand_similar_queries(self, v: dict[str, str]) -> str:
        roles = dedup_preserving_order(
            r.strip() for r in v["roles"].split(",") if r.strip()
        )
        tail = " ".join(v["question"].split()[-4:]).rstrip("?")
        if not roles:
            return f"past events similar to {tail}"
        return "\n".join(f"{role} {tail} precedent" for role in roles[:3])

    def _h_similar_followup_queries(self, v: dict[str, str]) -> str:
        return f"{v['title']} outcome\n{v['title']} aftermath"

    def _h_extract_segments_relevant(self, v: dict[str, str]) -> str:
        return "\n".join(_sentences(v["body"])[:2])

    def _h_extract_segments_similar(self, v: dict[str, str]) -> str:
        return "\n".join(_sentences(v["body"])[:2])

    def _h_describe_cluster_relevant(self, v: dict[str, str]) -> str:
        first = v["members"].splitlines()[0].strip()
        return first

    def _h_describe_cluster_similar(self, v: dict[str, str]) -> str:
        first = v["members"].splitlines()[0].strip()
        return first

    def _h_summ(self, v: dict[str, str]) -> str:
        body = _sentences(v["body"])
        lead = body[0] if body else v["title"]
        return f"Summary of {v['title']}: {lead}"

    def _h_summ_reduce(self, v: dict[str, str]) -> str:
        lines = [line.strip() for line in v["summaries"].splitlines() if line.strip()]
        return f"Brief over {len(lines)} summaries: " + " | ".join(
            " ".join(line.split()[:6]) for line in lines
        )

    def _h_propose_candidate(self, v: dict[str, str]) -> str:
        first = _sentences(v["description"])
        return f"Prediction: {first[0] if first else v['description']}"

    def _h_aggregate_answers(self, v: dict[str, str]) -> str:
        lines = [line.strip() for line in v["candidates"].splitlines() if line.strip()]
        first = re.sub(r"^\d+[.)]\s*", "", lines[0]) if lines else ""
        out = [f"FINAL: {first} [synthesized from {len(lines)} candidates]"]
        out += [f"STANCE {i}: consistent with the final answer" for i in range(1, len(lines) + 1)]
        return "\n".join(out)

    def _h_predict_time(self, v: dict[str, str]) -> str:
        count = len([l for l in v["options"].splitlines() if l.strip()])
        raw = [self._unit("time-prob", v["question"], str(i)) + 0.05 for i in range(count)]
        total = sum(raw)
        probs = [round(x / total, 4) for x in raw]
        return "PROBS: " + " ".join(f"{p:.4f}" for p in probs)

    def _h_judge_accuracy_aspect(self, v: dict[str, str]) -> str:
        aspect = normalize_ws(v["aspect"]).casefold()
        prediction = normalize_ws(v["prediction"]).casefold()
        return "HIT" if aspect and aspect in prediction else "MISS"

    def _h_judge_scaled(self, v: dict[str, str]) -> str:
        h1 = self._unit("scaled", v["dimension"], v["prediction"], v["outcome"])
        h2 = self._unit("scaled-prob", v["dimension"], v["prediction"], v["outcome"])
        score = 1 + int(h1 * 5)
        prob = round(0.5 + h2 / 2, 2)
        return f"SCORE: {score}\nPROB: {prob}"

    def _h_validity_classify(self, v: dict[str, str]) -> str:
        return "ANSWERABLE" if self._unit("validity", v["question"]) >= 0.5 else "UNANSWERABLE"


class MockSearchProvider:
    """Fixture-corpus search with the leakage guard applied at the source."""

    def __init__(
        self,
        articles: list[NewsArticle],
        index: Optional[dict[str, list[str]]] = None,
        missing_cutoffs: Optional[set[str]] = None,
    ):
        self.articles = {a.id: a for a in articles}
        self.index = dict(index or {})
        self.missing_cutoffs = set(missing_cutoffs or ())

    @classmethod
    def from_files(cls, corpus_path: str | Path, index_path: Optional[str | Path] = None) -> "MockSearchProvider":
        articles = load_corpus(corpus_path)
        index = None
        if index_path is not None:
            index = json.loads(Path(index_path).read_text(encoding="utf-8"))
        return cls(articles, index)

    def search(self, req: SearchRequest) -> list[NewsArticle]:
        if req.not_after is not None and req.not_after in self.missing_cutoffs:
            raise SnapshotMissingError(f"no corpus snapshot at {req.not_after}")
        if req.query in self.index:
            hits = [self.articles[i] for i in self.index[req.query] if i in self.articles]
        else:
            qtokens = _tokens(req.query)
            scored = []
            for a in self.articles.values():
                overlap = len(qtokens & _tokens(f"{a.title} {a.body}"))
                if overlap:
                    scored.append((-overlap, a.published_at or "9999-12-31", a.id, a))
            hits = [a for *_, a in sorted(scored)]
        hits = apply_date_window(hits, req.not_before, req.not_after)
        hits = dedup_by_url(hits)
        return hits[: req.max_results]


class MockEmbeddingProvider:
    """Hash-derived unit vectors: equal texts map to equal embeddings."""

    def __init__(self, dim: int = 16, seed: int = 0):
        if dim < 2:
            raise ValueError("embedding dimension must be at least 2")
        self.dim = dim
        self.seed = seed

    def _vector(self, text: str) -> list[float]:
        values = []
        counter = 0
        material = f"{self.seed}|{text}".encode("utf-8")
        while len(values) < self.dim:
            block = hashlib.sha256(material + counter.to_bytes(4, "big")).digest()
            for i in range(0, len(block) - 7, 8):
                values.append(int.from_bytes(block[i : i + 8], "big") / 2**63 - 1.0)
                if len(values) == self.dim:
                    break
            counter += 1
        norm = sum(v * v for v in values) ** 0.5 or 1.0
        return [v / norm for v in values]

    def embed(self, texts: list[str]) -> list[list[float]]:
        if not texts:
            raise ValueError("embed needs at least one text")
        for t in texts:
            if not t:
                raise ValueError("cannot embed an empty string")
        return [self._vector(t) for t in texts]


def load_corpus(path: str | Path) -> list[NewsArticle]:
    articles = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                articles.append(NewsArticle.from_dict(json.loads(line)))
    return articles
