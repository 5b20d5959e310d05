"""Domain records shared by every pipeline stage.

All records are immutable-by-convention dataclasses that serialize to flat
JSON objects (one per line in the on-disk tables). Unknown fields survive a
round-trip: anything not declared on the dataclass is kept in ``extra`` and
merged back on serialization. Dates are calendar-day strings (YYYY-MM-DD);
finer timestamps appear only in audit fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from datetime import date, timedelta
from enum import Enum
from typing import Any, Callable, Mapping, Optional, Type, TypeVar

from .util import normalize_ws, parse_date

TRecord = TypeVar("TRecord", bound="Record")


class QuestionCategory(str, Enum):
    TIME = "time"
    LOCATION = "location"
    DEVELOPMENT = "development"
    OUTCOME = "outcome"
    IMPACT = "impact"
    RESPONSE = "response"
    OTHER = "other"


# Report columns and the annotation queue follow this listing order.
CATEGORY_ORDER = [c.value for c in QuestionCategory]


class QuestionStatus(str, Enum):
    CANDIDATE = "candidate"
    ACCEPTED = "accepted"
    REJECTED = "rejected"
    OUTCOME_RECORDED = "outcome-recorded"
    NO_OUTCOME = "no-outcome"


# Legal lifecycle transitions; anything else is a bug, not data.
STATUS_TRANSITIONS: dict[str, set[str]] = {
    QuestionStatus.CANDIDATE.value: {
        QuestionStatus.ACCEPTED.value,
        QuestionStatus.REJECTED.value,
    },
    QuestionStatus.ACCEPTED.value: {
        QuestionStatus.OUTCOME_RECORDED.value,
        QuestionStatus.NO_OUTCOME.value,
    },
    QuestionStatus.REJECTED.value: set(),
    QuestionStatus.OUTCOME_RECORDED.value: set(),
    QuestionStatus.NO_OUTCOME.value: set(),
}


class TopicValidity(str, Enum):
    UNCHECKED = "unchecked"
    VALID = "valid"
    INVALID = "invalid"


class Branch(str, Enum):
    RELEVANT = "relevant"
    SIMILAR = "similar"


class Method(str, Enum):
    DR_SUMM = "dr-summ"
    DR_SOS = "dr-sos"
    GQR_SOS = "gqr-sos"
    STKFEP = "stkfep"


class Dimension(str, Enum):
    ACCURACY = "accuracy"
    COMPLETENESS = "completeness"
    RELEVANCE = "relevance"
    SPECIFICITY = "specificity"
    REASONABLENESS = "reasonableness"


DIMENSION_ORDER = [d.value for d in Dimension]
SCALED_DIMENSIONS = {
    Dimension.RELEVANCE.value,
    Dimension.SPECIFICITY.value,
    Dimension.REASONABLENESS.value,
}

# Annotation principles a rejection may cite (plus the catch-all).
PRINCIPLES = [
    "real-time",
    "answerability",
    "specificity",
    "continuity",
    "short-term",
    "truthfulness",
]
REJECTION_PRINCIPLES = set(PRINCIPLES) | {"other"}

TOPIC_SOURCES = {"zh-forum", "en-news"}


@dataclass
class Record:
    """Base for all persisted records; subclasses declare the schema."""

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for f in fields(self):
            if f.name == "extra":
                continue
            value = getattr(self, f.name)
            out[f.name] = _plain(value)
        for key, value in getattr(self, "extra", {}).items():
            out.setdefault(key, value)
        return out

    @classmethod
    def from_dict(cls: Type[TRecord], data: Mapping[str, Any]) -> TRecord:
        names = {f.name for f in fields(cls) if f.name != "extra"}
        known = {k: v for k, v in data.items() if k in names}
        extra = {k: v for k, v in data.items() if k not in names}
        obj = cls(**known)  # type: ignore[arg-type]
        obj.extra = extra
        return obj


def _plain(value: Any) -> Any:
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Record):
        return value.to_dict()
    if isinstance(value, list):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    return value


@dataclass
class HotTopic(Record):
    id: str
    source: str
    title: str
    raw_background: str
    collected_on: str
    enriched_background: Optional[str] = None
    validity: str = TopicValidity.UNCHECKED.value
    validity_reason: str = ""
    extra: dict = field(default_factory=dict)


@dataclass
class PredictiveQuestion(Record):
    id: str
    topic_id: str
    text: str
    created_at: str
    background: str
    category: str
    window_days: int = 15
    status: str = QuestionStatus.CANDIDATE.value
    rejection_principle: Optional[str] = None
    extra: dict = field(default_factory=dict)

    def window_end(self) -> date:
        return parse_date(self.created_at) + timedelta(days=self.window_days)


@dataclass
class OutcomeAspect(Record):
    text: str
    source_article_id: str
    char_span: dict = field(default_factory=dict)  # {"start": int, "end": int}
    extra: dict = field(default_factory=dict)


@dataclass
class Outcome(Record):
    question_id: str
    aspects: list = field(default_factory=list)
    recorded_at: str = ""
    resolved_interval: Optional[int] = None
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Outcome":
        obj = super().from_dict(data)
        obj.aspects = [
            a if isinstance(a, OutcomeAspect) else OutcomeAspect.from_dict(a)
            for a in obj.aspects
        ]
        return obj


@dataclass
class NewsArticle(Record):
    id: str
    url: str
    title: str
    body: str
    published_at: Optional[str] = None  # unknown stays None, never defaulted
    retrieved_at: str = ""
    retrieval_query: str = ""
    extra: dict = field(default_factory=dict)


@dataclass
class Stakeholder(Record):
    name: str
    role: Optional[str] = None
    source_article_ids: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)


@dataclass
class EvidenceSegment(Record):
    id: str
    text: str
    source_article_id: str
    branch: str
    embedding: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)


@dataclass
class EvidenceCluster(Record):
    id: str
    branch: str
    member_segment_ids: list = field(default_factory=list)
    centroid: list = field(default_factory=list)
    description: str = ""
    extra: dict = field(default_factory=dict)


@dataclass
class Prediction(Record):
    question_id: str
    run_id: str
    method: str
    no_cluster_summ: bool = False
    no_similar: bool = False
    no_stakeholders: bool = False
    candidates: list = field(default_factory=list)  # [{"source", "branch", "answer"}]
    final_answer: Optional[str] = None
    interval_choice: Optional[int] = None
    produced_at: str = ""
    extra: dict = field(default_factory=dict)


@dataclass
class ExpandedQueries(Record):
    question_id: str
    branch: str
    queries: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)


@dataclass
class JudgeScore(Record):
    question_id: str
    dimension: str
    raw_score: float
    probability: float = 1.0
    rationale: str = ""
    extra: dict = field(default_factory=dict)


@dataclass
class DimensionAggregate(Record):
    dimension: str
    category: str  # a QuestionCategory value or "overall"
    n: int = 0
    score: float = 0.0
    extra: dict = field(default_factory=dict)


RECORD_TYPES: dict[str, Type[Record]] = {
    "HotTopic": HotTopic,
    "PredictiveQuestion": PredictiveQuestion,
    "Outcome": Outcome,
    "OutcomeAspect": OutcomeAspect,
    "NewsArticle": NewsArticle,
    "Stakeholder": Stakeholder,
    "EvidenceSegment": EvidenceSegment,
    "EvidenceCluster": EvidenceCluster,
    "Prediction": Prediction,
    "ExpandedQueries": ExpandedQueries,
    "JudgeScore": JudgeScore,
    "DimensionAggregate": DimensionAggregate,
}

# Modules can register validators for their own record types.
_VALIDATORS: dict[type, Callable[..., list[str]]] = {}


def register_validator(record_type: type):
    def wrap(fn):
        _VALIDATORS[record_type] = fn
        return fn

    return wrap


def _valid_date(value: Any) -> bool:
    if not isinstance(value, str):
        return False
    try:
        parse_date(value)
        return True
    except ValueError:
        return False


def validate_record(
    record: Record,
    *,
    articles: Optional[Mapping[str, NewsArticle]] = None,
    question: Optional[PredictiveQuestion] = None,
    interval_count: int = 3,
) -> list[str]:
    """Check a record against its type invariants.

    Returns a list of violated-invariant descriptions (empty when clean).
    Violations are data, not errors: this never raises on bad content and
    never mutates its input. Checks that need surrounding context (article
    bodies, the owning question) run only when that context is supplied.
    """
    checker = _VALIDATORS.get(type(record))
    if checker is not None:
        return checker(
            record, articles=articles, question=question, interval_count=interval_count
        )
    return []


@register_validator(HotTopic)
def _check_topic(t: HotTopic, **_: Any) -> list[str]:
    problems = []
    if not _valid_date(t.collected_on):
        problems.append("collected_on is not a valid calendar date")
    if t.validity not in {v.value for v in TopicValidity}:
        problems.append(f"unknown validity {t.validity!r}")
    if t.validity == TopicValidity.INVALID.value and not t.validity_reason.strip():
        problems.append("invalid topic missing a reason")
    if t.source not in TOPIC_SOURCES:
        problems.append(f"unknown source {t.source!r}")
    return problems


@register_validator(PredictiveQuestion)
def _check_question(q: PredictiveQuestion, *, interval_count: int = 3, **_: Any) -> list[str]:
    problems = []
    if q.category not in {c.value for c in QuestionCategory}:
        problems.append(f"category {q.category!r} is not one of the seven categories")
    if q.status not in {s.value for s in QuestionStatus}:
        problems.append(f"unknown status {q.status!r}")
    if q.status == QuestionStatus.REJECTED.value:
        if q.rejection_principle not in REJECTION_PRINCIPLES:
            problems.append("rejected question must cite a principle or 'other'")
    if not _valid_date(q.created_at):
        problems.append("created_at is not a valid calendar date")
    if q.window_days < 3:
        problems.append("window_days must be at least 3")
    elif interval_count > 0 and q.window_days % interval_count != 0:
        problems.append("window not divisible by intervals")
    return problems


@register_validator(OutcomeAspect)
def _check_aspect(
    a: OutcomeAspect,
    *,
    articles: Optional[Mapping[str, NewsArticle]] = None,
    **_: Any,
) -> list[str]:
    problems = []
    span = a.char_span or {}
    start, end = span.get("start"), span.get("end")
    if not isinstance(start, int) or not isinstance(end, int) or start < 0 or end <= start:
        problems.append("char_span must be a valid [start, end) range")
        return problems
    if articles is not None:
        article = articles.get(a.source_article_id)
        if article is None:
            problems.append(f"source article {a.source_article_id!r} not in storage")
        elif end > len(article.body):
            problems.append("char_span exceeds article body")
        elif normalize_ws(a.text) != normalize_ws(article.body[start:end]):
            problems.append("span mismatch")
    return problems


@register_validator(Outcome)
def _check_outcome(
    o: Outcome,
    *,
    articles: Optional[Mapping[str, NewsArticle]] = None,
    question: Optional[PredictiveQuestion] = None,
    interval_count: int = 3,
    **_: Any,
) -> list[str]:
    problems = []
    if question is not None:
        if (
            question.status == QuestionStatus.OUTCOME_RECORDED.value
            and question.category != QuestionCategory.TIME.value
            and not o.aspects
        ):
            problems.append("recorded outcome has no aspects")
        if _valid_date(o.recorded_at) and _valid_date(question.created_at):
            if parse_date(o.recorded_at) > question.window_end():
                problems.append("recorded_at falls after the prediction window")
    if o.recorded_at and not _valid_date(o.recorded_at):
        problems.append("recorded_at is not a valid calendar date")
    for a in o.aspects:
        problems.extend(_check_aspect(a, articles=articles))
    return problems


@register_validator(NewsArticle)
def _check_article(n: NewsArticle, **_: Any) -> list[str]:
    problems = []
    if not n.body:
        problems.append("article body is empty")
    if n.published_at is not None and not _valid_date(n.published_at):
        problems.append("published_at must be a calendar date or explicitly unknown")
    return problems


@register_validator(Stakeholder)
def _check_stakeholder(s: Stakeholder, **_: Any) -> list[str]:
    problems = []
    if not s.name.strip():
        problems.append("stakeholder name is empty")
    if s.role is not None and s.role.casefold() == s.name.casefold():
        problems.append("role must differ from the surface name")
    return problems


@register_validator(EvidenceSegment)
def _check_segment(s: EvidenceSegment, **_: Any) -> list[str]:
    problems = []
    if s.branch not in {b.value for b in Branch}:
        problems.append(f"unknown branch {s.branch!r}")
    if not s.text:
        problems.append("segment text is empty")
    if not s.embedding:
        problems.append("segment has no embedding")
    return problems


@register_validator(EvidenceCluster)
def _check_cluster(c: EvidenceCluster, **_: Any) -> list[str]:
    problems = []
    if c.branch not in {b.value for b in Branch}:
        problems.append(f"unknown branch {c.branch!r}")
    if not c.member_segment_ids:
        problems.append("cluster has no members")
    return problems


@register_validator(Prediction)
def _check_prediction(
    p: Prediction,
    *,
    question: Optional[PredictiveQuestion] = None,
    interval_count: int = 3,
    **_: Any,
) -> list[str]:
    problems = []
    has_text = p.final_answer is not None
    has_interval = p.interval_choice is not None
    if has_text == has_interval:
        problems.append("exactly one of final_answer/interval_choice must be set")
    if has_interval and not (1 <= p.interval_choice <= interval_count + 1):
        problems.append(f"interval_choice outside [1, {interval_count + 1}]")
    if p.method not in {m.value for m in Method}:
        problems.append(f"unknown method {p.method!r}")
    if question is not None:
        is_time = question.category == QuestionCategory.TIME.value
        if is_time and not has_interval:
            problems.append("time question needs an interval choice")
        if not is_time and not has_text:
            problems.append("non-time question needs a free-text answer")
    return problems


@register_validator(ExpandedQueries)
def _check_expanded(e: ExpandedQueries, **_: Any) -> list[str]:
    problems = []
    if e.branch not in {b.value for b in Branch}:
        problems.append(f"unknown branch {e.branch!r}")
    if not e.queries:
        problems.append("expanded query set is empty")
    normalized = [normalize_ws(q).casefold() for q in e.queries]
    if len(set(normalized)) != len(normalized):
        problems.append("duplicate queries after normalization")
    return problems


@register_validator(JudgeScore)
def _check_score(j: JudgeScore, **_: Any) -> list[str]:
    problems = []
    if j.dimension not in {d.value for d in Dimension}:
        problems.append(f"unknown dimension {j.dimension!r}")
    elif j.dimension == Dimension.ACCURACY.value:
        if j.raw_score not in (0, 1):
            problems.append("accuracy score must be 0 or 1")
    elif j.dimension == Dimension.COMPLETENESS.value:
        if not 0.0 <= j.raw_score <= 1.0:
            problems.append("completeness score must lie in [0, 1]")
    else:
        if j.raw_score not in (1, 2, 3, 4, 5):
            problems.append("scaled score must be an integer 1-5")
    if not 0.0 <= j.probability <= 1.0 or math.isnan(j.probability):
        problems.append("probability must lie in [0, 1]")
    return problems


@register_validator(DimensionAggregate)
def _check_aggregate(d: DimensionAggregate, **_: Any) -> list[str]:
    problems = []
    if not 0.0 <= d.score <= 1.0:
        problems.append("aggregate score must lie in [0, 1]")
    if d.n < 1:
        problems.append("aggregate needs at least one item")
    return problems


def interval_of(
    event_date: Optional[date],
    question: PredictiveQuestion,
    interval_count: int = 3,
) -> int:
    """Map an event date to a time-question option index.

    The window splits into ``interval_count`` equal periods; day offsets on a
    period's right edge belong to that period. Day offset 0 (same-day outcome)
    counts as the earliest period. An absent date, or one outside the window,
    maps to option ``interval_count + 1`` ("no outcome").
    """
    window = question.window_days
    if interval_count <= 0 or window % interval_count != 0:
        raise ValueError(
            f"interval_count {interval_count} does not divide window of {window} days"
        )
    no_outcome = interval_count + 1
    if event_date is None:
        return no_outcome
    offset = (event_date - parse_date(question.created_at)).days
    if offset == 0:
        return 1
    if offset < 0 or offset > window:
        return no_outcome
    width = window // interval_count
    return -(-offset // width)
