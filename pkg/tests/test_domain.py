"""Domain record invariants, interval partition, serialization round-trips."""

from __future__ import annotations

import copy

import pytest
from hypothesis import given, strategies as st

from openep.domain import (
    CATEGORY_ORDER,
    DimensionAggregate,
    ExpandedQueries,
    HotTopic,
    JudgeScore,
    NewsArticle,
    Outcome,
    OutcomeAspect,
    Prediction,
    PredictiveQuestion,
    QuestionCategory,
    Stakeholder,
    interval_of,
    validate_record,
)

from conftest import article, question


def test_category_roundtrip_all_seven():
    assert len(QuestionCategory) == 7
    for member in QuestionCategory:
        assert QuestionCategory(member.value) is member
    assert [c.value for c in QuestionCategory] == CATEGORY_ORDER


def test_question_roundtrip_preserves_unknown_fields():
    q = question("q-1", "What happens next?", "impact")
    raw = q.to_dict()
    raw["annotator_note"] = "keep me"
    back = PredictiveQuestion.from_dict(raw)
    assert back.extra["annotator_note"] == "keep me"
    assert back.to_dict()["annotator_note"] == "keep me"
    assert back.text == q.text


def test_validate_clean_question_is_empty():
    q = question("q-1", "What next?", "impact", window_days=15)
    assert validate_record(q) == []


def test_validate_window_not_divisible():
    q = question("q-1", "What next?", "impact", window_days=7)
    assert "window not divisible by intervals" in validate_record(q)


def test_validate_rejects_unknown_category():
    q = question("q-1", "What next?", "weather")
    problems = validate_record(q)
    assert any("seven categories" in p for p in problems)


def test_validate_rejected_needs_principle():
    q = question("q-1", "What next?", "impact", status="rejected")
    assert any("principle" in p for p in validate_record(q))
    q.rejection_principle = "short-term"
    assert validate_record(q) == []


def test_validate_topic_invalid_needs_reason():
    topic = HotTopic(
        id="t-1", source="en-news", title="A topic", raw_background="bg",
        collected_on="2024-06-01", validity="invalid",
    )
    assert any("reason" in p for p in validate_record(topic))
    topic.validity_reason = "already concluded"
    assert validate_record(topic) == []


def test_validate_aspect_span_mismatch():
    art = article("a-1", "Title", "Alpha beta gamma delta.", "2024-06-02")
    aspect = OutcomeAspect(
        text="beta gamma", source_article_id="a-1", char_span={"start": 6, "end": 16}
    )
    assert validate_record(aspect, articles={"a-1": art}) == []
    bad = OutcomeAspect(
        text="wrong words", source_article_id="a-1", char_span={"start": 6, "end": 16}
    )
    assert "span mismatch" in validate_record(bad, articles={"a-1": art})


def test_validate_aspect_span_out_of_bounds():
    art = article("a-1", "Title", "Short body.", "2024-06-02")
    aspect = OutcomeAspect(
        text="x", source_article_id="a-1", char_span={"start": 2, "end": 400}
    )
    assert any("exceeds" in p for p in validate_record(aspect, articles={"a-1": art}))


def test_validate_aspect_unknown_article():
    aspect = OutcomeAspect(text="x", source_article_id="ghost", char_span={"start": 0, "end": 1})
    assert any("not in storage" in p for p in validate_record(aspect, articles={}))


def test_validate_article_unknown_date_is_explicit():
    art = article("a-1", "T", "Body.", None)
    assert validate_record(art) == []
    art.published_at = "yesterday"
    assert any("calendar date" in p for p in validate_record(art))


def test_validate_stakeholder_role_distinct():
    s = Stakeholder(name="China", role="china")
    assert any("differ" in p for p in validate_record(s))
    s.role = "country"
    assert validate_record(s) == []


def test_validate_prediction_exactly_one_output():
    p = Prediction(question_id="q", run_id="r", method="stkfep", final_answer="Poland")
    assert validate_record(p) == []
    p.interval_choice = 2
    assert any("exactly one" in p_ for p_ in validate_record(p))
    p.final_answer = None
    assert validate_record(p) == []
    p.interval_choice = 9
    assert any("interval_choice" in p_ for p_ in validate_record(p))


def test_validate_expanded_queries_dedup():
    e = ExpandedQueries(question_id="q", branch="relevant", queries=["A b", "a  B"])
    assert any("duplicate" in p for p in validate_record(e))


def test_validate_judge_score_domains():
    ok = JudgeScore(question_id="q", dimension="accuracy", raw_score=1)
    assert validate_record(ok) == []
    bad = JudgeScore(question_id="q", dimension="accuracy", raw_score=0.5)
    assert validate_record(bad)
    scaled = JudgeScore(question_id="q", dimension="relevance", raw_score=3, probability=0.7)
    assert validate_record(scaled) == []
    assert validate_record(
        JudgeScore(question_id="q", dimension="relevance", raw_score=6)
    )
    assert validate_record(
        JudgeScore(question_id="q", dimension="completeness", raw_score=0.25)
    ) == []


def test_validate_aggregate_bounds():
    assert validate_record(DimensionAggregate(dimension="accuracy", category="time", n=3, score=0.5)) == []
    assert validate_record(DimensionAggregate(dimension="accuracy", category="time", n=0, score=0.5))
    assert validate_record(DimensionAggregate(dimension="accuracy", category="time", n=1, score=1.5))


def test_validate_is_pure_and_idempotent():
    q = question("q-1", "What next?", "weather", window_days=7)
    before = copy.deepcopy(q.to_dict())
    first = validate_record(q)
    second = validate_record(q)
    assert first == second
    assert q.to_dict() == before


# -- interval_of -----------------------------------------------------------------


def _q(window: int = 15) -> PredictiveQuestion:
    return question("q-t", "When?", "time", created_at="2024-06-01", window_days=window)


def test_interval_first_period():
    from openep.util import parse_date

    assert interval_of(parse_date("2024-06-03"), _q(), 3) == 1  # d=2


def test_interval_boundary_day_closed_right():
    from openep.util import parse_date

    assert interval_of(parse_date("2024-06-11"), _q(), 3) == 2  # d=10, right edge


def test_interval_absent_is_no_outcome_option():
    assert interval_of(None, _q(), 3) == 4


def test_interval_day_zero_maps_to_first():
    from openep.util import parse_date

    assert interval_of(parse_date("2024-06-01"), _q(), 3) == 1


def test_interval_outside_window_is_no_outcome():
    from openep.util import parse_date

    assert interval_of(parse_date("2024-05-20"), _q(), 3) == 4
    assert interval_of(parse_date("2024-06-30"), _q(), 3) == 4


def test_interval_requires_divisibility():
    with pytest.raises(ValueError):
        interval_of(None, _q(window=7), 3)


def test_interval_partition_exhaustive_and_balanced():
    # Brute force: each of the 15 day offsets lands in exactly one interval,
    # five offsets per interval.
    from datetime import timedelta

    from openep.util import parse_date

    q = _q()
    start = parse_date("2024-06-01")
    counts = {1: 0, 2: 0, 3: 0}
    for d in range(1, 16):
        idx = interval_of(start + timedelta(days=d), q, 3)
        assert idx in counts
        counts[idx] += 1
    assert counts == {1: 5, 2: 5, 3: 5}


@given(
    window=st.sampled_from([3, 6, 9, 15, 30]),
    intervals=st.sampled_from([1, 3, 5]),
    offset=st.integers(min_value=-10, max_value=45),
)
def test_interval_total_over_any_offset(window, intervals, offset):
    from datetime import timedelta

    from openep.util import parse_date

    if window % intervals != 0:
        return
    q = question("q-t", "When?", "time", created_at="2024-06-01", window_days=window)
    idx = interval_of(parse_date("2024-06-01") + timedelta(days=offset), q, intervals)
    assert 1 <= idx <= intervals + 1
    if 1 <= offset <= window:
        width = window // intervals
        assert idx == -(-offset // width)
    elif offset == 0:
        assert idx == 1
    else:
        assert idx == intervals + 1


def test_outcome_roundtrip_nested_aspects():
    o = Outcome(
        question_id="q-1",
        aspects=[OutcomeAspect(text="x", source_article_id="a", char_span={"start": 0, "end": 1})],
        recorded_at="2024-06-16",
        resolved_interval=2,
    )
    back = Outcome.from_dict(o.to_dict())
    assert isinstance(back.aspects[0], OutcomeAspect)
    assert back.aspects[0].text == "x"
