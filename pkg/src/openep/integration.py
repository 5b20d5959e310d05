"""Integration stage: compress retrieved evidence into described clusters.

Supportable segments are extracted per article with a branch-specific focus
(information-gathering for relevant events, outcome-and-causes for similar
ones), embedded, deduplicated exactly and then by cosine similarity, and
clustered per branch with the BIC-selected K-means. The baseline integrators
(per-article summaries, and a summary of summaries) live here too.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .clustering import KSelection, select_k
from .domain import (
    Branch,
    EvidenceCluster,
    EvidenceSegment,
    NewsArticle,
    PredictiveQuestion,
    Record,
    register_validator,
)
from .providers import ProviderError
from .providers.parsing import parse_lines
from .runtime import PipelineContext
from .util import normalize_ws, parallel_map

logger = logging.getLogger(__name__)

DESCRIPTION_FALLBACK_CHARS = 500


@dataclass
class ClusteringResult(Record):
    branch: str
    k_selected: int = 1
    bic_by_k: dict = field(default_factory=dict)  # str(k) -> float, JSON-friendly
    assignments: dict = field(default_factory=dict)  # segment_id -> cluster index
    centroids: list = field(default_factory=list)
    iterations_run: int = 0
    seed: int = 0
    extra: dict = field(default_factory=dict)


@register_validator(ClusteringResult)
def _check_clustering(c: ClusteringResult, **_) -> list[str]:
    problems = []
    if c.bic_by_k:
        best = min(sorted(c.bic_by_k, key=int), key=lambda k: (c.bic_by_k[k], int(k)))
        if int(best) != c.k_selected:
            problems.append("k_selected does not minimize the stored BIC curve")
    if c.assignments and c.centroids:
        used = set(c.assignments.values())
        if not used <= set(range(len(c.centroids))):
            problems.append("assignment indexes exceed centroid count")
    return problems


@dataclass
class IntegrationResult:
    question_id: str
    integrator: str  # cluster | summ | summ-over-summ
    segments: dict = field(default_factory=dict)  # branch -> list[EvidenceSegment]
    clusters: dict = field(default_factory=dict)  # branch -> list[EvidenceCluster]
    clustering: dict = field(default_factory=dict)  # branch -> ClusteringResult
    summaries: list = field(default_factory=list)  # [(article_id, summary)]
    briefs: dict = field(default_factory=dict)  # branch -> brief text

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "integrator": self.integrator,
            "segments": {
                b: [s.to_dict() for s in segs] for b, segs in self.segments.items()
            },
            "clusters": {
                b: [c.to_dict() for c in cl] for b, cl in self.clusters.items()
            },
            "clustering": {b: c.to_dict() for b, c in self.clustering.items()},
            "summaries": list(self.summaries),
            "briefs": dict(self.briefs),
        }


def extract_segments(
    ctx: PipelineContext,
    article: NewsArticle,
    question: PredictiveQuestion,
    branch: str,
    assign_ids: bool = True,
) -> list[EvidenceSegment]:
    """Pull supportable spans from one article and embed them.

    ``assign_ids=False`` defers id assignment so callers extracting in
    parallel can hand out ids in input order afterwards (ids must not depend
    on thread scheduling).
    """
    template = (
        "extract_segments_similar"
        if branch == Branch.SIMILAR.value
        else "extract_segments_relevant"
    )
    response = ctx.generate(
        template, question=question.text, title=article.title, body=article.body
    )
    texts = parse_lines(response)
    if not texts:
        return []
    vectors = ctx.embed(texts)
    segments = [
        EvidenceSegment(
            id=ctx.store.new_id("seg") if assign_ids else "",
            text=text,
            source_article_id=article.id,
            branch=branch,
            embedding=vector,
        )
        for text, vector in zip(texts, vectors)
    ]
    return segments


def dedup_segments(
    segments: Sequence[EvidenceSegment], tau: float = 0.92
) -> list[EvidenceSegment]:
    """Drop exact duplicates (normalized text), then near-duplicates.

    Near-duplicate removal is greedy in input order: a segment whose cosine
    similarity to any earlier survivor reaches ``tau`` is dropped, so the
    earlier segment always wins. Idempotent by construction.
    """
    survivors: list[EvidenceSegment] = []
    seen_text: set[str] = set()
    kept_vectors: list[np.ndarray] = []
    for seg in segments:
        key = normalize_ws(seg.text).casefold()
        if key in seen_text:
            continue
        vector = np.asarray(seg.embedding, dtype=float)
        norm = np.linalg.norm(vector)
        duplicate = False
        for other in kept_vectors:
            denom = norm * np.linalg.norm(other)
            if denom == 0:
                continue
            if float(vector @ other) / denom >= tau:
                duplicate = True
                break
        if duplicate:
            continue
        seen_text.add(key)
        kept_vectors.append(vector)
        survivors.append(seg)
    return survivors


def cluster_branch(
    ctx: PipelineContext,
    question: PredictiveQuestion,
    segments: Sequence[EvidenceSegment],
    branch: str,
) -> tuple[Optional[ClusteringResult], list[EvidenceCluster]]:
    """Cluster one branch's segments and describe every cluster."""
    if not segments:
        return None, []
    selection = select_k(
        [s.embedding for s in segments],
        seed=ctx.config.seed,
        k_max=ctx.config.k_max,
    )
    assert selection is not None
    record = ClusteringResult(
        branch=branch,
        k_selected=selection.k_selected,
        bic_by_k={str(k): v for k, v in selection.bic_by_k.items()},
        assignments={
            s.id: int(c) for s, c in zip(segments, selection.best.assignments)
        },
        centroids=[list(map(float, c)) for c in selection.best.centroids],
        iterations_run=selection.best.iterations,
        seed=selection.seed,
    )
    clusters = []
    for idx in range(selection.k_selected):
        members = [
            s for s, c in zip(segments, selection.best.assignments) if int(c) == idx
        ]
        if not members:
            continue
        clusters.append(
            EvidenceCluster(
                id=f"{question.id}:{branch}:{idx}",
                branch=branch,
                member_segment_ids=[m.id for m in members],
                centroid=list(map(float, selection.best.centroids[idx])),
            )
        )
    clusters = describe_clusters(ctx, question, clusters, {s.id: s for s in segments})
    return record, clusters


def describe_clusters(
    ctx: PipelineContext,
    question: PredictiveQuestion,
    clusters: Sequence[EvidenceCluster],
    segments_by_id: dict[str, EvidenceSegment],
) -> list[EvidenceCluster]:
    """One description call per cluster; failures fall back to member text."""

    def describe(cluster: EvidenceCluster) -> EvidenceCluster:
        members = "\n".join(
            segments_by_id[sid].text for sid in cluster.member_segment_ids
        )
        template = (
            "describe_cluster_similar"
            if cluster.branch == Branch.SIMILAR.value
            else "describe_cluster_relevant"
        )
        try:
            description = ctx.generate(
                template, question=question.text, members=members
            ).strip()
        except ProviderError:
            description = ""
        if not description:
            description = normalize_ws(members)[:DESCRIPTION_FALLBACK_CHARS]
            ctx.flag("description-fallback", cluster_id=cluster.id)
        cluster.description = description
        return cluster

    return parallel_map(describe, list(clusters), ctx.config.concurrency)


def summ(ctx: PipelineContext, article: NewsArticle) -> str:
    """Baseline per-document summary."""
    return ctx.generate("summ", title=article.title, body=article.body)


def summ_over_summ(ctx: PipelineContext, articles: Sequence[NewsArticle]) -> tuple[str, list]:
    """Baseline summary-of-summaries: N summary calls then one reducing call."""
    summaries: list[tuple[str, str]] = []
    for article in articles:
        try:
            summaries.append((article.id, summ(ctx, article)))
        except ProviderError:
            ctx.flag("summary-failed", article_id=article.id)
    if not summaries:
        ctx.flag("empty-brief")
        return "", summaries
    brief = ctx.generate("summ_reduce", summaries="\n".join(s for _, s in summaries))
    return brief, summaries


def run_integration(
    ctx: PipelineContext,
    question: PredictiveQuestion,
    relevant_articles: Sequence[NewsArticle],
    similar_articles: Sequence[NewsArticle],
    integrator: str,
) -> IntegrationResult:
    """Apply the chosen integrator to both evidence branches."""
    result = IntegrationResult(question_id=question.id, integrator=integrator)

    if integrator == "cluster":
        for branch, articles in (
            (Branch.RELEVANT.value, relevant_articles),
            (Branch.SIMILAR.value, similar_articles),
        ):
            per_article = parallel_map(
                lambda a, b=branch: extract_segments(ctx, a, question, b, assign_ids=False),
                list(articles),
                ctx.config.concurrency,
            )
            segments: list[EvidenceSegment] = [s for batch in per_article for s in batch]
            for seg in segments:
                seg.id = ctx.store.new_id("seg")
            segments = dedup_segments(segments, ctx.config.dedup_tau)
            result.segments[branch] = segments
            record, clusters = cluster_branch(ctx, question, segments, branch)
            if record is not None:
                result.clustering[branch] = record
            result.clusters[branch] = clusters
        return result

    if integrator == "summ":
        for article in relevant_articles:
            try:
                result.summaries.append((article.id, summ(ctx, article)))
            except ProviderError:
                ctx.flag("summary-failed", article_id=article.id)
        return result

    if integrator == "summ-over-summ":
        brief, summaries = summ_over_summ(ctx, relevant_articles)
        result.summaries.extend(summaries)
        if brief:
            result.briefs[Branch.RELEVANT.value] = brief
        if similar_articles:
            brief_sim, summaries_sim = summ_over_summ(ctx, similar_articles)
            result.summaries.extend(summaries_sim)
            if brief_sim:
                result.briefs[Branch.SIMILAR.value] = brief_sim
        return result

    raise ValueError(f"unknown integrator {integrator!r}")
