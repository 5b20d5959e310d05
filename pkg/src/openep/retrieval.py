"""Retrieval stage: stakeholder-driven expansion and two evidence branches.

The relevant branch gathers news directly about the question (original query
plus stakeholder-expanded queries, relevance-filtered). The similar branch
abstracts stakeholders into roles, queries for historical analogues, and
expands each hit event with follow-up searches. Every search carries the
leakage cutoff: nothing published after the question's creation date may
enter either branch.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .domain import (
    Branch,
    ExpandedQueries,
    NewsArticle,
    PredictiveQuestion,
    Record,
    Stakeholder,
    register_validator,
)
from .providers import ProviderError
from .providers.parsing import ParseError, parse_lines, parse_score
from .runtime import PipelineContext
from .util import dedup_preserving_order, normalize_ws, parallel_map

logger = logging.getLogger(__name__)


@dataclass
class RelevanceJudgment(Record):
    article_id: str
    question_id: str
    score: int = 1
    keep: bool = False
    extra: dict = field(default_factory=dict)


@register_validator(RelevanceJudgment)
def _check_judgment(j: RelevanceJudgment, **_) -> list[str]:
    if j.score not in (1, 2, 3, 4, 5):
        return ["relevance score must be 1-5"]
    return []


@dataclass
class SimilarEvent:
    seed: NewsArticle
    expansion: list[NewsArticle] = field(default_factory=list)

    def articles(self) -> list[NewsArticle]:
        return [self.seed, *self.expansion]


@dataclass
class RetrievalResult:
    question_id: str
    method: str
    stakeholders: list[Stakeholder] = field(default_factory=list)
    expanded_relevant: Optional[ExpandedQueries] = None
    expanded_similar: Optional[ExpandedQueries] = None
    relevant_events: list[NewsArticle] = field(default_factory=list)  # SE
    similar_events: list[SimilarEvent] = field(default_factory=list)  # RE
    judgments: list[RelevanceJudgment] = field(default_factory=list)

    def similar_articles(self) -> list[NewsArticle]:
        out: list[NewsArticle] = []
        for event in self.similar_events:
            out.extend(event.articles())
        return out

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "method": self.method,
            "stakeholders": [s.to_dict() for s in self.stakeholders],
            "expanded_relevant": self.expanded_relevant.to_dict() if self.expanded_relevant else None,
            "expanded_similar": self.expanded_similar.to_dict() if self.expanded_similar else None,
            "relevant_events": [a.id for a in self.relevant_events],
            "similar_events": [
                {"seed": e.seed.id, "expansion": [a.id for a in e.expansion]}
                for e in self.similar_events
            ],
            "judgments": [j.to_dict() for j in self.judgments],
        }


def _cutoff(ctx: PipelineContext) -> str:
    # The leakage cutoff is the logical prediction date. Under the same-day
    # protocol it equals the question's creation date; the daily study
    # advances it one day per test.
    return ctx.today_str


def initial_retrieve(ctx: PipelineContext, question: PredictiveQuestion) -> list[NewsArticle]:
    """Search with the original question text under the leakage cutoff."""
    return ctx.search(question.text, not_after=_cutoff(ctx))


def filter_relevance(
    ctx: PipelineContext,
    question: PredictiveQuestion,
    articles: Sequence[NewsArticle],
    *,
    roles: Optional[Sequence[str]] = None,
) -> tuple[list[NewsArticle], list[RelevanceJudgment]]:
    """Judge each article 1-5 and keep those at or above the threshold.

    Passing ``roles`` switches to the analogue-aware prompt used for the
    similar branch. Order is preserved; unparseable judgments score 1.
    """

    def judge(article: NewsArticle) -> RelevanceJudgment:
        if roles is None:
            response = ctx.generate(
                "relevance", question=question.text, title=article.title, body=article.body
            )
        else:
            response = ctx.generate(
                "relevance_similar",
                question=question.text,
                title=article.title,
                body=article.body,
                roles=", ".join(roles),
            )
        try:
            score = parse_score(response)
        except ParseError:
            ctx.flag("unparseable-relevance", question_id=question.id, article_id=article.id)
            score = 1
        return RelevanceJudgment(
            article_id=article.id,
            question_id=question.id,
            score=score,
            keep=score >= ctx.config.relevance_threshold,
        )

    judgments = parallel_map(judge, list(articles), ctx.config.concurrency)
    kept = [a for a, j in zip(articles, judgments) if j.keep]
    return kept, judgments


def extract_stakeholders(
    ctx: PipelineContext,
    question: PredictiveQuestion,
    articles: Sequence[NewsArticle],
) -> list[Stakeholder]:
    """Mine salient entities from the question and each kept article.

    Names merge case-insensitively (first surface form wins) with source
    articles unioned; the list is capped most-frequent-first, then by first
    appearance.
    """
    outputs: list[tuple[Optional[str], str]] = [
        (
            None,
            ctx.generate(
                "extract_stakeholders_question",
                question=question.text,
                background=question.background,
            ),
        )
    ]

    def per_article(article: NewsArticle) -> tuple[Optional[str], str]:
        return article.id, ctx.generate(
            "extract_stakeholders_article",
            question=question.text,
            title=article.title,
            body=article.body,
        )

    outputs.extend(parallel_map(per_article, list(articles), ctx.config.concurrency))

    merged: dict[str, dict] = {}
    order: list[str] = []
    for article_id, response in outputs:
        for name in parse_lines(response):
            key = name.casefold()
            if key not in merged:
                merged[key] = {"name": name, "count": 0, "sources": []}
                order.append(key)
            merged[key]["count"] += 1
            if article_id and article_id not in merged[key]["sources"]:
                merged[key]["sources"].append(article_id)
    ranked = sorted(order, key=lambda k: (-merged[k]["count"], order.index(k)))
    capped = ranked[: ctx.config.stakeholder_cap]
    return [
        Stakeholder(name=merged[k]["name"], source_article_ids=merged[k]["sources"])
        for k in capped
    ]


def expand_relevant_queries(
    ctx: PipelineContext,
    question: PredictiveQuestion,
    stakeholders: Sequence[Stakeholder],
) -> ExpandedQueries:
    """Generate expansion queries; the original question is always included."""
    queries = [question.text]
    try:
        response = ctx.generate(
            "expand_relevant_queries",
            question=question.text,
            background=question.background,
            stakeholders=", ".join(s.name for s in stakeholders),
            limit=str(ctx.config.query_cap),
        )
        queries.extend(parse_lines(response)[: ctx.config.query_cap])
    except ProviderError:
        ctx.flag("expansion-failed", question_id=question.id, branch=Branch.RELEVANT.value)
    seen: set[str] = set()
    unique = []
    for q in queries:
        key = normalize_ws(q).casefold()
        if key and key not in seen:
            seen.add(key)
            unique.append(q)
    return ExpandedQueries(
        question_id=question.id, branch=Branch.RELEVANT.value, queries=unique
    )


def retrieve_relevant_events(
    ctx: PipelineContext,
    expanded: ExpandedQueries,
    question: PredictiveQuestion,
) -> tuple[list[NewsArticle], list[RelevanceJudgment]]:
    """Search every expanded query, dedup by URL, and relevance-filter: SE."""
    if expanded.branch != Branch.RELEVANT.value:
        raise ValueError("retrieve_relevant_events needs the relevant branch")

    def run_query(query: str) -> list[NewsArticle]:
        try:
            return ctx.search(query, not_after=_cutoff(ctx))
        except ProviderError:
            ctx.flag("query-failed", question_id=question.id, query=query)
            return []

    batches = parallel_map(run_query, expanded.queries, ctx.config.concurrency)
    union: list[NewsArticle] = []
    seen_urls: set[str] = set()
    for batch in batches:
        for a in batch:
            if a.url not in seen_urls:
                seen_urls.add(a.url)
                union.append(a)
    return filter_relevance(ctx, question, union)


def abstract_roles(
    ctx: PipelineContext, stakeholders: Sequence[Stakeholder]
) -> list[Stakeholder]:
    """Fill each stakeholder's abstract role; unmappable names become 'entity'."""
    if not stakeholders:
        raise ValueError("no stakeholders to abstract")

    def one(s: Stakeholder) -> Stakeholder:
        try:
            response = ctx.generate("abstract_role", name=s.name)
            role = normalize_ws(response.splitlines()[0]) if response.strip() else ""
        except ProviderError:
            role = ""
        if not role or role.casefold() == s.name.casefold():
            role = "entity"
        return Stakeholder(name=s.name, role=role, source_article_ids=s.source_article_ids)

    return parallel_map(one, list(stakeholders), ctx.config.concurrency)


def expand_similar_queries(
    ctx: PipelineContext,
    question: PredictiveQuestion,
    roles: Sequence[str],
) -> ExpandedQueries:
    """Role-level analogue queries; the original question is NOT included.

    A generation failure leaves the query list empty, which downstream treats
    as an absent similar branch.
    """
    queries: list[str] = []
    try:
        response = ctx.generate(
            "expand_similar_queries",
            question=question.text,
            background=question.background,
            roles=", ".join(roles),
            limit=str(ctx.config.query_cap),
        )
        for q in parse_lines(response)[: ctx.config.query_cap]:
            key = normalize_ws(q).casefold()
            if key and key not in {normalize_ws(x).casefold() for x in queries}:
                queries.append(q)
    except ProviderError:
        ctx.flag("expansion-failed", question_id=question.id, branch=Branch.SIMILAR.value)
    return ExpandedQueries(
        question_id=question.id, branch=Branch.SIMILAR.value, queries=queries
    )


def retrieve_similar_events(
    ctx: PipelineContext,
    expanded: ExpandedQueries,
    question: PredictiveQuestion,
    roles: Optional[Sequence[str]] = None,
) -> tuple[list[SimilarEvent], list[RelevanceJudgment]]:
    """Retrieve analogue seeds and expand each with follow-up queries: RE.

    Seeds are deduplicated by URL across queries and screened with the
    role-aware relevance prompt; a failed expansion leaves a bare seed.
    """
    if expanded.branch != Branch.SIMILAR.value:
        raise ValueError("retrieve_similar_events needs the similar branch")

    def run_query(query: str) -> list[NewsArticle]:
        try:
            return ctx.search(query, not_after=_cutoff(ctx))
        except ProviderError:
            ctx.flag("query-failed", question_id=question.id, query=query)
            return []

    batches = parallel_map(run_query, expanded.queries, ctx.config.concurrency)
    seeds: list[NewsArticle] = []
    seen_urls: set[str] = set()
    for batch in batches:
        for a in batch:
            if a.url not in seen_urls:
                seen_urls.add(a.url)
                seeds.append(a)
    kept_seeds, judgments = filter_relevance(
        ctx, question, seeds, roles=list(roles or [])
    )

    def expand_seed(seed: NewsArticle) -> SimilarEvent:
        try:
            response = ctx.generate(
                "similar_followup_queries", title=seed.title, body=seed.body
            )
            followups = parse_lines(response)[: ctx.config.query_cap]
        except ProviderError:
            ctx.flag("followup-failed", question_id=question.id, seed=seed.id)
            return SimilarEvent(seed=seed)
        extras: list[NewsArticle] = []
        urls = {seed.url}
        for query in followups:
            for a in run_query(query):
                if a.url not in urls:
                    urls.add(a.url)
                    extras.append(a)
        return SimilarEvent(seed=seed, expansion=extras)

    events = parallel_map(expand_seed, kept_seeds, ctx.config.concurrency)
    return events, judgments


def run_retrieval(
    ctx: PipelineContext,
    question: PredictiveQuestion,
    method: str,
    *,
    no_stakeholders: bool = False,
    no_similar: bool = False,
) -> RetrievalResult:
    """Drive the retrieval strategy for one question.

    dr-*: the original question only. gqr-sos: LLM query expansion from
    question+background, no stakeholders, no similar branch. stkfep: the full
    stakeholder pipeline, trimmed by the ablation flags.
    """
    result = RetrievalResult(question_id=question.id, method=method)

    if method in ("dr-summ", "dr-sos"):
        articles = initial_retrieve(ctx, question)
        kept, judgments = filter_relevance(ctx, question, articles)
        result.relevant_events = kept
        result.judgments = judgments
        return result

    if method == "gqr-sos":
        expanded = expand_relevant_queries(ctx, question, [])
        result.expanded_relevant = expanded
        se, judgments = retrieve_relevant_events(ctx, expanded, question)
        result.relevant_events = se
        result.judgments = judgments
        return result

    if method != "stkfep":
        raise ValueError(f"unknown method {method!r}")

    stakeholders: list[Stakeholder] = []
    if not no_stakeholders:
        articles = initial_retrieve(ctx, question)
        kept, judgments = filter_relevance(ctx, question, articles)
        result.judgments.extend(judgments)
        stakeholders = extract_stakeholders(ctx, question, kept)
    result.stakeholders = stakeholders

    expanded = expand_relevant_queries(ctx, question, stakeholders)
    result.expanded_relevant = expanded
    se, judgments = retrieve_relevant_events(ctx, expanded, question)
    result.relevant_events = se
    result.judgments.extend(judgments)

    if not no_similar:
        roles: list[str] = []
        if stakeholders:
            with_roles = abstract_roles(ctx, stakeholders)
            result.stakeholders = with_roles
            roles = dedup_preserving_order(s.role for s in with_roles if s.role)
        expanded_similar = expand_similar_queries(ctx, question, roles)
        result.expanded_similar = expanded_similar
        if expanded_similar.queries:
            events, judgments = retrieve_similar_events(
                ctx, expanded_similar, question, roles
            )
            result.similar_events = events
            result.judgments.extend(judgments)
    return result
