"""Benchmark construction: topics in, verified questions and outcomes out.

Two stages, both LLM-automated with a human gate. Question side: ingest hot
topics, enrich their backgrounds from retrieved coverage, screen topic
validity, draft candidate questions in the seven categories, and checklist
them against the six annotation principles before the review queue. Outcome
side: after a question's window closes, collect in-window news, rerank by
outcome likelihood, and record verbatim outcome segments (or the explicit
no-outcome verdict).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional, Sequence

from .domain import (
    CATEGORY_ORDER,
    PRINCIPLES,
    HotTopic,
    NewsArticle,
    Outcome,
    OutcomeAspect,
    PredictiveQuestion,
    QuestionCategory,
    QuestionStatus,
    Record,
    STATUS_TRANSITIONS,
    TopicValidity,
    interval_of,
    register_validator,
)
from .providers.parsing import ParseError, parse_lines, parse_score, parse_verdict
from .runtime import PipelineContext
from .storage import ConflictError, DuplicateRecordError
from .util import format_date, parse_date

logger = logging.getLogger(__name__)


@dataclass
class PrincipleChecklist(Record):
    id: str  # equals the question id; one checklist per question
    question_id: str
    verdicts: dict = field(default_factory=dict)  # principle -> {verdict, rationale}
    extra: dict = field(default_factory=dict)

    def failed_principles(self) -> list[str]:
        return [p for p in PRINCIPLES if self.verdicts.get(p, {}).get("verdict") == "fail"]

    def queue_eligible(self) -> bool:
        return not self.failed_principles()


@register_validator(PrincipleChecklist)
def _check_checklist(c: PrincipleChecklist, **_) -> list[str]:
    problems = []
    if sorted(c.verdicts) != sorted(PRINCIPLES):
        problems.append("checklist must cover exactly the six principles")
    for principle, entry in c.verdicts.items():
        if entry.get("verdict") not in {"pass", "fail", "unsure"}:
            problems.append(f"bad verdict for {principle}")
    return problems


@dataclass
class RerankedArticle(Record):
    id: str  # "<question_id>:<article_id>"
    article_id: str
    question_id: str
    outcome_likelihood_score: int = 1
    rationale: str = ""
    extra: dict = field(default_factory=dict)


@register_validator(RerankedArticle)
def _check_reranked(r: RerankedArticle, **_) -> list[str]:
    if r.outcome_likelihood_score not in (1, 2, 3, 4, 5):
        return ["outcome likelihood score must be 1-5"]
    return []


def _audit(ctx: PipelineContext, action: str, subject_id: str, editor: str) -> None:
    ctx.store.add(
        "audits",
        _AuditEntry(
            id=ctx.store.new_id("audit"),
            action=action,
            subject_id=subject_id,
            editor=editor,
            at=datetime.now(timezone.utc).isoformat(),
        ),
    )


@dataclass
class _AuditEntry(Record):
    id: str
    action: str
    subject_id: str
    editor: str
    at: str
    extra: dict = field(default_factory=dict)


def store_articles(ctx: PipelineContext, articles: Sequence[NewsArticle], query: str) -> list[NewsArticle]:
    """Assign ids where missing and upsert into the article table."""
    stored = []
    for a in articles:
        if not a.id:
            a.id = ctx.store.new_id("art")
        if not a.retrieval_query:
            a.retrieval_query = query
        ctx.store.add("articles", a, replace=True)
        stored.append(a)
    return stored


# -- question construction -----------------------------------------------------


def ingest_topics(
    ctx: PipelineContext,
    source: str,
    on_date: str,
    items: Sequence[tuple[str, str]],
) -> list[HotTopic]:
    """Persist one unchecked topic per (title, background) item.

    The whole batch is rejected if any (source, title, date) triple already
    exists; empty-title items are skipped with a warning and do not poison
    the rest.
    """
    if parse_date(on_date) > ctx.today:
        raise ValueError(f"cannot ingest topics dated in the future ({on_date})")
    existing = {
        (t.source, t.title, t.collected_on) for t in ctx.store.all("topics", HotTopic)
    }
    usable = []
    for title, background in items:
        if not title.strip():
            logger.warning("skipping topic with empty title collected on %s", on_date)
            ctx.flag("empty-topic-title", date=on_date)
            continue
        usable.append((title, background))
    for title, _ in usable:
        if (source, title, on_date) in existing:
            raise DuplicateRecordError(f"topic {title!r} already ingested for {on_date}")
    topics = []
    for title, background in usable:
        topic = HotTopic(
            id=ctx.store.new_id("topic"),
            source=source,
            title=title,
            raw_background=background,
            collected_on=on_date,
        )
        ctx.store.add("topics", topic)
        topics.append(topic)
    return topics


def enrich_background(ctx: PipelineContext, topic: HotTopic) -> HotTopic:
    """Regenerate a fuller background from coverage retrieved at collection time."""
    if topic.validity == TopicValidity.INVALID.value:
        raise ValueError(f"topic {topic.id} is invalid; nothing to enrich")
    articles = ctx.search(
        topic.title,
        not_after=topic.collected_on,
        max_results=ctx.config.enrich_max_articles,
    )
    articles = store_articles(ctx, articles, topic.title)
    if not articles:
        ctx.flag("no-articles", topic_id=topic.id)
    digest_lines = "\n".join(
        f"{a.title}: {a.body[:200]}" for a in articles
    )
    enriched = ctx.generate(
        "enrich_background",
        title=topic.title,
        raw_background=topic.raw_background,
        articles=digest_lines,
    )
    return ctx.store.update(
        "topics",
        topic.id,
        HotTopic,
        lambda t: _set(t, enriched_background=enriched),
    )


def check_topic_validity(ctx: PipelineContext, topic: HotTopic) -> HotTopic:
    """LLM screen for continuity/real-time suitability; unparseable stays unchecked."""
    if not topic.enriched_background:
        raise ValueError(f"topic {topic.id} has no enriched background yet")
    response = ctx.generate(
        "topic_validity",
        title=topic.title,
        background=topic.enriched_background,
    )
    try:
        verdict = parse_verdict(response, ("VALID", "INVALID"))
    except ParseError:
        ctx.flag("unparseable-validity", topic_id=topic.id, response=response)
        return topic
    reason = response.split(":", 1)[1].strip() if ":" in response else response.strip()
    validity = TopicValidity.VALID.value if verdict == "VALID" else TopicValidity.INVALID.value
    return ctx.store.update(
        "topics",
        topic.id,
        HotTopic,
        lambda t: _set(t, validity=validity, validity_reason=reason),
    )


def generate_candidate_questions(
    ctx: PipelineContext, topic: HotTopic
) -> list[PredictiveQuestion]:
    """Draft candidate questions across the seven categories for a valid topic."""
    if topic.validity != TopicValidity.VALID.value:
        raise ValueError(f"topic {topic.id} is not valid for question generation")
    response = ctx.generate(
        "candidate_questions",
        title=topic.title,
        background=topic.enriched_background or topic.raw_background,
        categories=", ".join(CATEGORY_ORDER),
    )
    known = set(CATEGORY_ORDER)
    questions = []
    for line in parse_lines(response):
        if ":" not in line:
            continue
        head, _, text = line.partition(":")
        category = head.strip().lower()
        text = text.strip()
        if not text:
            continue
        if category not in known:
            logger.info("dropping candidate with unknown category %r", category)
            ctx.flag("unknown-category", topic_id=topic.id, category=category)
            continue
        questions.append((category, text))
    questions = questions[: ctx.config.candidate_question_cap]
    records = []
    for category, text in questions:
        q = PredictiveQuestion(
            id=ctx.store.new_id("q"),
            topic_id=topic.id,
            text=text,
            created_at=ctx.today_str,
            background=topic.enriched_background or topic.raw_background,
            category=category,
            window_days=ctx.config.window_days,
        )
        ctx.store.add("questions", q)
        records.append(q)
    return records


def run_principle_checklist(
    ctx: PipelineContext, question: PredictiveQuestion
) -> PrincipleChecklist:
    """Screen a candidate against the six principles; any fail auto-rejects."""
    if question.status != QuestionStatus.CANDIDATE.value:
        raise ValueError(f"question {question.id} is not a candidate")
    verdicts = {}
    for principle in PRINCIPLES:
        response = ctx.generate(
            "principle_check",
            principle=principle,
            question=question.text,
            background=question.background,
        )
        try:
            verdict = parse_verdict(response, ("PASS", "FAIL", "UNSURE")).lower()
        except ParseError:
            verdict = "unsure"
            ctx.flag("unparseable-principle", question_id=question.id, principle=principle)
        rationale = response.split(":", 1)[1].strip() if ":" in response else response.strip()
        verdicts[principle] = {"verdict": verdict, "rationale": rationale}
    checklist = PrincipleChecklist(id=question.id, question_id=question.id, verdicts=verdicts)
    ctx.store.add("checklists", checklist, replace=True)
    failed = checklist.failed_principles()
    if failed:
        transition_question(
            ctx,
            question.id,
            QuestionStatus.REJECTED.value,
            rejection_principle=failed[0],
        )
        _audit(ctx, "auto-reject", question.id, editor="checklist")
    return checklist


def review_queue(ctx: PipelineContext, on_date: Optional[str] = None) -> list[PredictiveQuestion]:
    """Candidates that cleared the checklist and await a human verdict."""
    queue = []
    for q in ctx.store.all("questions", PredictiveQuestion):
        if q.status != QuestionStatus.CANDIDATE.value:
            continue
        if on_date is not None and q.created_at != on_date:
            continue
        checklist = ctx.store.get("checklists", q.id, PrincipleChecklist)
        if checklist is None or not checklist.queue_eligible():
            continue
        queue.append(q)
    topics_order = {t.id: t.collected_on for t in ctx.store.all("topics", HotTopic)}
    category_rank = {c: i for i, c in enumerate(CATEGORY_ORDER)}
    queue.sort(
        key=lambda q: (topics_order.get(q.topic_id, ""), q.topic_id,
                       category_rank.get(q.category, len(category_rank)), q.id)
    )
    return queue


def record_review_verdict(
    ctx: PipelineContext,
    question_id: str,
    verdict: str,
    principle: Optional[str] = None,
    editor: str = "",
) -> PredictiveQuestion:
    """Apply a human accept/reject; the first verdict on a question stands."""
    if verdict not in ("accept", "reject"):
        raise ValueError(f"verdict must be accept or reject, got {verdict!r}")
    question = ctx.store.get("questions", question_id, PredictiveQuestion)
    if question is None:
        raise KeyError(question_id)
    queued_ids = {q.id for q in review_queue(ctx)}
    if question_id not in queued_ids:
        raise ConflictError(f"question {question_id} is not awaiting review")
    new_status = (
        QuestionStatus.ACCEPTED.value if verdict == "accept" else QuestionStatus.REJECTED.value
    )
    updated = transition_question(
        ctx,
        question_id,
        new_status,
        rejection_principle=(principle or "other") if verdict == "reject" else None,
    )
    _audit(ctx, f"review-{verdict}", question_id, editor)
    return updated


def transition_question(
    ctx: PipelineContext,
    question_id: str,
    new_status: str,
    rejection_principle: Optional[str] = None,
    **updates,
) -> PredictiveQuestion:
    """Move a question along the lifecycle DAG, optimistically locked."""

    def mutate(q: PredictiveQuestion) -> PredictiveQuestion:
        q.status = new_status
        if rejection_principle is not None:
            q.rejection_principle = rejection_principle
        for key, value in updates.items():
            setattr(q, key, value)
        return q

    def expect(q: PredictiveQuestion) -> bool:
        return new_status in STATUS_TRANSITIONS.get(q.status, set())

    return ctx.store.update("questions", question_id, PredictiveQuestion, mutate, expect=expect)


# -- outcome construction --------------------------------------------------------


def collect_outcome_news(ctx: PipelineContext, question: PredictiveQuestion) -> list[NewsArticle]:
    """Retrieve in-window coverage once the prediction window has closed."""
    window_end = question.window_end()
    if ctx.today < window_end:
        raise ValueError(
            f"window for {question.id} closes {format_date(window_end)}; today is {ctx.today_str}"
        )
    articles = ctx.search(
        question.text,
        not_before=question.created_at,
        not_after=format_date(window_end),
    )
    articles = store_articles(ctx, articles, question.text)
    ctx.store.link("outcome_candidates", question.id, [a.id for a in articles])
    if not articles:
        ctx.flag("potential-no-outcome", question_id=question.id)
    return articles


def rerank_outcome_news(
    ctx: PipelineContext,
    question: PredictiveQuestion,
    articles: Sequence[NewsArticle],
) -> list[RerankedArticle]:
    """Score each collected article 1-5 for outcome likelihood; sort desc."""
    reranked = []
    for a in articles:
        response = ctx.generate(
            "rerank_outcome", question=question.text, title=a.title, body=a.body
        )
        try:
            score = parse_score(response)
        except ParseError:
            score = 1
            ctx.flag("unparseable-rerank", question_id=question.id, article_id=a.id)
        record = RerankedArticle(
            id=f"{question.id}:{a.id}",
            article_id=a.id,
            question_id=question.id,
            outcome_likelihood_score=score,
            rationale=response,
        )
        ctx.store.add("reranked", record, replace=True)
        reranked.append(record)
    dates = {a.id: a.published_at or "9999-12-31" for a in articles}
    reranked.sort(key=lambda r: (-r.outcome_likelihood_score, dates[r.article_id], r.article_id))
    candidates = [
        r.article_id for r in reranked if r.outcome_likelihood_score >= ctx.config.rerank_threshold
    ]
    ctx.store.link("outcome_candidates_selected", question.id, candidates)
    return reranked


def record_outcome(
    ctx: PipelineContext,
    question_id: str,
    aspects: Sequence[tuple[str, tuple[int, int]]],
    editor: str = "",
) -> Outcome:
    """Materialize outcome segments from article spans and close the question."""
    if not aspects:
        raise ValueError("no aspects given; use mark_no_outcome for empty outcomes")
    question = ctx.store.get("questions", question_id, PredictiveQuestion)
    if question is None:
        raise KeyError(question_id)
    candidate_ids = set(ctx.store.linked("outcome_candidates_selected", question_id))
    built = []
    earliest: Optional[str] = None
    for article_id, (start, end) in aspects:
        if candidate_ids and article_id not in candidate_ids:
            raise ValueError(f"article {article_id} is not an outcome candidate")
        article = ctx.store.get("articles", article_id, NewsArticle)
        if article is None:
            raise KeyError(article_id)
        if not (0 <= start < end <= len(article.body)):
            raise ValueError(f"span [{start}, {end}) outside article body")
        built.append(
            OutcomeAspect(
                text=article.body[start:end],
                source_article_id=article_id,
                char_span={"start": start, "end": end},
            )
        )
        if article.published_at and (earliest is None or article.published_at < earliest):
            earliest = article.published_at
    resolved = None
    if question.category == QuestionCategory.TIME.value:
        event_date = parse_date(earliest) if earliest else None
        resolved = interval_of(event_date, question, ctx.config.interval_count)
    outcome = Outcome(
        question_id=question_id,
        aspects=built,
        recorded_at=ctx.today_str,
        resolved_interval=resolved,
    )
    ctx.store.add("outcomes", _keyed(outcome, question_id), replace=True)
    transition_question(ctx, question_id, QuestionStatus.OUTCOME_RECORDED.value)
    _audit(ctx, "record-outcome", question_id, editor)
    return outcome


def mark_no_outcome(ctx: PipelineContext, question_id: str, editor: str = "") -> PredictiveQuestion:
    """Close a question whose window ended with no discoverable answer."""
    question = ctx.store.get("questions", question_id, PredictiveQuestion)
    if question is None:
        raise KeyError(question_id)
    if question.status == QuestionStatus.OUTCOME_RECORDED.value:
        raise ConflictError(f"question {question_id} already has a recorded outcome")
    if ctx.today < question.window_end():
        raise ValueError(f"window for {question_id} is still open")
    updated = transition_question(ctx, question_id, QuestionStatus.NO_OUTCOME.value)
    _audit(ctx, "no-outcome", question_id, editor)
    return updated


def get_outcome(ctx: PipelineContext, question_id: str) -> Optional[Outcome]:
    raw = ctx.store.get("outcomes", question_id, Outcome)
    return raw


def _keyed(outcome: Outcome, question_id: str) -> Outcome:
    # outcomes are keyed by their question id on disk
    outcome.extra.setdefault("id", question_id)
    return outcome


def _set(record, **updates):
    for key, value in updates.items():
        setattr(record, key, value)
    return record
