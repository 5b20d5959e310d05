"""Prediction-stage contracts: candidates, aggregation, time choice."""

from __future__ import annotations

import pytest

from openep.domain import EvidenceCluster, QuestionCategory, validate_record
from openep.integration import IntegrationResult
from openep.prediction import (
    aggregate,
    interval_options,
    predict_time,
    propose_candidates,
    run_prediction,
)
from openep.providers import QuotaExhaustedError

from conftest import make_ctx, question


def cluster(cid, branch, members, description):
    return EvidenceCluster(
        id=cid,
        branch=branch,
        member_segment_ids=[f"{cid}-m{i}" for i in range(members)],
        centroid=[0.0],
        description=description,
    )


def integration_with_clusters():
    result = IntegrationResult(question_id="q-p", integrator="cluster")
    result.clusters["relevant"] = [
        cluster("r1", "relevant", 4, "Poland plans a state visit."),
        cluster("r2", "relevant", 2, "Consular talks continue."),
        cluster("r3", "relevant", 1, "Tourism statistics rise."),
    ]
    result.clusters["similar"] = [
        cluster("s1", "similar", 3, "Thailand signed an exemption deal."),
        cluster("s2", "similar", 1, "Singapore precedent from 2023."),
    ]
    return result


def q(category="outcome"):
    return question("q-p", "Which country will China grant a visa exemption to next?",
                    category)


def test_candidates_one_per_cluster_ordered(tmp_path):
    ctx = make_ctx(tmp_path / "d", "2024-06-01")
    candidates = propose_candidates(ctx, q(), integration_with_clusters())
    assert len(candidates) == 5
    assert [c.source for c in candidates] == ["r1", "r2", "r3", "s1", "s2"]
    assert all(validate_record(c) == [] for c in candidates)


def test_candidates_from_baseline_brief(tmp_path):
    ctx = make_ctx(tmp_path / "d", "2024-06-01")
    result = IntegrationResult(question_id="q-p", integrator="summ-over-summ")
    result.briefs["relevant"] = "One brief over everything."
    candidates = propose_candidates(ctx, q(), result)
    assert len(candidates) == 1
    assert candidates[0].source == "brief:relevant"


def test_candidates_empty_evidence_flagged(tmp_path):
    ctx = make_ctx(tmp_path / "d", "2024-06-01")
    result = IntegrationResult(question_id="q-p", integrator="cluster")
    candidates = propose_candidates(ctx, q(), result)
    assert len(candidates) == 1
    assert candidates[0].extra.get("low_support") is True
    assert any(f["kind"] == "no-evidence" for f in ctx.flags)


def test_aggregate_single_call_and_poland(tmp_path):
    ctx = make_ctx(tmp_path / "d", "2024-06-01")
    candidates = propose_candidates(ctx, q(), integration_with_clusters())
    before = len(ctx.transcript)
    final = aggregate(ctx, q(), candidates)
    assert len(ctx.transcript) == before + 1  # one provider call regardless of count
    assert "Poland" in final
    assert all(c.stance_note for c in candidates)


def test_aggregate_conflicting_candidates_fill_stances(tmp_path):
    scripted = "FINAL: Poland\nSTANCE 1: confident\nSTANCE 2: prefers Hungary"
    ctx = make_ctx(tmp_path / "d", "2024-06-01", script={"aggregate_answers": scripted})
    candidates = propose_candidates(ctx, q(), integration_with_clusters())[:2]
    final = aggregate(ctx, q(), candidates)
    assert final == "Poland"
    assert [c.stance_note for c in candidates] == ["confident", "prefers Hungary"]


def test_aggregate_failure_falls_back_to_largest_relevant(tmp_path):
    def boom(v):
        raise QuotaExhaustedError("quota")

    ctx = make_ctx(tmp_path / "d", "2024-06-01", script={"aggregate_answers": boom})
    candidates = propose_candidates(ctx, q(), integration_with_clusters())
    final = aggregate(ctx, q(), candidates)
    assert final == candidates[0].answer_text  # r1 = largest relevant cluster
    assert any(f["kind"] == "aggregation-fallback" for f in ctx.flags)


def test_aggregate_needs_candidates(tmp_path):
    ctx = make_ctx(tmp_path / "d", "2024-06-01")
    with pytest.raises(ValueError):
        aggregate(ctx, q(), [])


def test_interval_options_shape():
    options = interval_options(15, 3)
    assert options == [
        "Option 1: days 1-5 after creation",
        "Option 2: days 6-10 after creation",
        "Option 3: days 11-15 after creation",
        "Option 4: no outcome within the window",
    ]


def test_predict_time_argmax(tmp_path):
    ctx = make_ctx(tmp_path / "d", "2024-06-01",
                   script={"predict_time": "PROBS: 0.5 0.3 0.1 0.1"})
    choice, probs = predict_time(ctx, q("time"), [])
    assert choice == 1
    assert probs == [0.5, 0.3, 0.1, 0.1]


def test_predict_time_tie_prefers_earlier(tmp_path):
    ctx = make_ctx(tmp_path / "d", "2024-06-01",
                   script={"predict_time": "PROBS: 0.1 0.4 0.4 0.1"})
    choice, _ = predict_time(ctx, q("time"), [])
    assert choice == 2


def test_predict_time_garbage_selects_no_outcome(tmp_path):
    ctx = make_ctx(tmp_path / "d", "2024-06-01",
                   script={"predict_time": "the second half feels likely"})
    choice, probs = predict_time(ctx, q("time"), [])
    assert choice == 4
    assert probs is None
    assert any(f["kind"] == "unparseable-time" for f in ctx.flags)


def test_predict_time_rejects_non_time_question(tmp_path):
    ctx = make_ctx(tmp_path / "d", "2024-06-01")
    with pytest.raises(ValueError):
        predict_time(ctx, q("outcome"), [])


def test_run_prediction_record_shape(tmp_path):
    ctx = make_ctx(tmp_path / "d", "2024-06-01")
    prediction = run_prediction(
        ctx, q(), integration_with_clusters(), "run-x", "stkfep"
    )
    assert prediction.final_answer is not None
    assert prediction.interval_choice is None
    assert prediction.produced_at == "2024-06-01"
    assert len(prediction.candidates) == 5
    assert validate_record(prediction, question=q()) == []


def test_run_prediction_time_record(tmp_path):
    ctx = make_ctx(tmp_path / "d", "2024-06-01",
                   script={"predict_time": "PROBS: 0.1 0.2 0.6 0.1"})
    prediction = run_prediction(
        ctx, q("time"), integration_with_clusters(), "run-x", "stkfep"
    )
    assert prediction.interval_choice == 3
    assert prediction.final_answer is None
    assert prediction.extra["interval_probs"] == [0.1, 0.2, 0.6, 0.1]
    assert validate_record(prediction, question=q("time")) == []
