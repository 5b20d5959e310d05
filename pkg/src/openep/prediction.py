"""Prediction stage: per-cluster candidate answers and their aggregation.

Each described evidence group proposes one candidate answer; a single
aggregation call compares the candidates and synthesizes the final free-text
answer. Time questions instead pick the interval with the highest stated
probability over the multiple-choice options.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .domain import (
    Branch,
    Prediction,
    PredictiveQuestion,
    QuestionCategory,
    Record,
    register_validator,
)
from .integration import IntegrationResult
from .providers import ProviderError
from .providers.parsing import (
    ParseError,
    parse_final_and_stances,
    parse_prob_vector,
)
from .runtime import PipelineContext
from .util import parallel_map

logger = logging.getLogger(__name__)


@dataclass
class CandidateAnswer(Record):
    source: str  # cluster id, "summary:<article_id>", or "brief:<branch>"
    branch: str
    answer_text: str
    stance_note: str = ""
    extra: dict = field(default_factory=dict)


@register_validator(CandidateAnswer)
def _check_candidate(c: CandidateAnswer, **_) -> list[str]:
    if not c.answer_text.strip():
        return ["candidate answer text is empty"]
    return []


def _evidence_units(integration: IntegrationResult) -> list[tuple[str, str, str, int]]:
    """(source, branch, description, weight) in deterministic prompt order.

    Relevant clusters come first ordered by size descending, then similar
    clusters by size descending, then baseline summaries/briefs.
    """
    units: list[tuple[str, str, str, int]] = []
    for branch in (Branch.RELEVANT.value, Branch.SIMILAR.value):
        clusters = integration.clusters.get(branch, [])
        ordered = sorted(
            clusters, key=lambda c: (-len(c.member_segment_ids), c.id)
        )
        units.extend(
            (c.id, branch, c.description, len(c.member_segment_ids)) for c in ordered
        )
    if integration.integrator == "summ":
        units.extend(
            (f"summary:{article_id}", Branch.RELEVANT.value, text, 1)
            for article_id, text in integration.summaries
        )
    for branch in (Branch.RELEVANT.value, Branch.SIMILAR.value):
        brief = integration.briefs.get(branch)
        if brief:
            units.append((f"brief:{branch}", branch, brief, 1))
    return units


def propose_candidates(
    ctx: PipelineContext,
    question: PredictiveQuestion,
    integration: IntegrationResult,
) -> list[CandidateAnswer]:
    """One candidate per evidence unit; empty evidence yields one flagged
    low-support candidate so the run stays total."""
    units = _evidence_units(integration)
    if not units:
        ctx.flag("no-evidence", question_id=question.id)
        text = ctx.generate(
            "propose_candidate",
            question=question.text,
            branch=Branch.RELEVANT.value,
            description="(no evidence retrieved)",
        )
        return [
            CandidateAnswer(
                source="no-evidence",
                branch=Branch.RELEVANT.value,
                answer_text=text,
                extra={"low_support": True},
            )
        ]

    def propose(unit: tuple[str, str, str, int]) -> Optional[CandidateAnswer]:
        source, branch, description, weight = unit
        try:
            text = ctx.generate(
                "propose_candidate",
                question=question.text,
                branch=branch,
                description=description,
            )
        except ProviderError:
            ctx.flag("candidate-failed", question_id=question.id, source=source)
            return None
        return CandidateAnswer(
            source=source, branch=branch, answer_text=text, extra={"weight": weight}
        )

    candidates = parallel_map(propose, units, ctx.config.concurrency)
    return [c for c in candidates if c is not None]


def aggregate(
    ctx: PipelineContext,
    question: PredictiveQuestion,
    candidates: Sequence[CandidateAnswer],
) -> str:
    """Single comparison call over all candidates; fills stance notes in place.

    On failure, falls back to the candidate from the largest relevant-branch
    cluster (the first relevant candidate in prompt order) and flags the run.
    """
    if not candidates:
        raise ValueError("aggregate needs at least one candidate")
    listing = "\n".join(
        f"{i}. {c.answer_text}" for i, c in enumerate(candidates, start=1)
    )
    try:
        response = ctx.generate(
            "aggregate_answers", question=question.text, candidates=listing
        )
        final, stances = parse_final_and_stances(response)
    except (ProviderError, ParseError):
        ctx.flag("aggregation-fallback", question_id=question.id)
        fallback = next(
            (c for c in candidates if c.branch == Branch.RELEVANT.value), candidates[0]
        )
        fallback.stance_note = "fallback: aggregation failed"
        return fallback.answer_text
    for i, candidate in enumerate(candidates, start=1):
        candidate.stance_note = stances.get(i, "")
    return final


def interval_options(window_days: int, interval_count: int) -> list[str]:
    width = window_days // interval_count
    options = [
        f"Option {i}: days {(i - 1) * width + 1}-{i * width} after creation"
        for i in range(1, interval_count + 1)
    ]
    options.append(f"Option {interval_count + 1}: no outcome within the window")
    return options


def predict_time(
    ctx: PipelineContext,
    question: PredictiveQuestion,
    candidates: Sequence[CandidateAnswer],
) -> tuple[int, Optional[list[float]]]:
    """Pick the interval option with the highest stated probability.

    Ties break toward the earlier interval. Unparseable output selects the
    no-outcome option and flags the prediction.
    """
    if question.category != QuestionCategory.TIME.value:
        raise ValueError(f"question {question.id} is not a time question")
    count = ctx.config.interval_count + 1
    options = interval_options(question.window_days, ctx.config.interval_count)
    evidence = "\n".join(c.answer_text for c in candidates) or "(none)"
    response = ctx.generate(
        "predict_time",
        question=question.text,
        background=question.background,
        evidence=evidence,
        options="\n".join(options),
    )
    try:
        probs = parse_prob_vector(response, count)
    except ParseError:
        ctx.flag("unparseable-time", question_id=question.id, response=response)
        return count, None
    best = max(range(count), key=lambda i: (probs[i], -i))
    return best + 1, probs


def run_prediction(
    ctx: PipelineContext,
    question: PredictiveQuestion,
    integration: IntegrationResult,
    run_id: str,
    method: str,
    *,
    no_cluster_summ: bool = False,
    no_similar: bool = False,
    no_stakeholders: bool = False,
) -> Prediction:
    """Produce the Prediction record for one question."""
    candidates = propose_candidates(ctx, question, integration)
    final_answer: Optional[str] = None
    interval_choice: Optional[int] = None
    probs: Optional[list[float]] = None
    if question.category == QuestionCategory.TIME.value:
        interval_choice, probs = predict_time(ctx, question, candidates)
    else:
        final_answer = aggregate(ctx, question, candidates)
    prediction = Prediction(
        question_id=question.id,
        run_id=run_id,
        method=method,
        no_cluster_summ=no_cluster_summ,
        no_similar=no_similar,
        no_stakeholders=no_stakeholders,
        candidates=[c.to_dict() for c in candidates],
        final_answer=final_answer,
        interval_choice=interval_choice,
        produced_at=ctx.today_str,
    )
    if probs is not None:
        prediction.extra["interval_probs"] = probs
    return prediction
