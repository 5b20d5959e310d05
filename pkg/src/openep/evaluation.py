"""Evaluation: judge-based scoring, confidence-weighted aggregation, reports.

Non-time predictions are judged per outcome aspect (accuracy = at least one
hit, completeness = hit proportion) and on three 1-5 dimensions where the
judge also states a probability; a dimension aggregate is the mean of
normalized-score times probability. Time predictions reduce to option
equality. Reports roll cells up per category and pool categories weighted by
scored-question count.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

from scipy import stats

from .domain import (
    CATEGORY_ORDER,
    Dimension,
    DimensionAggregate,
    JudgeScore,
    Outcome,
    Prediction,
    PredictiveQuestion,
    QuestionCategory,
    QuestionStatus,
    SCALED_DIMENSIONS,
)
from .providers.parsing import ParseError, parse_probability, parse_score, parse_verdict
from .runtime import PipelineContext
from .storage import Store

logger = logging.getLogger(__name__)


def sigma(dimension: str, raw_score: float) -> float:
    """Normalize a raw score into [0, 1].

    Accuracy and completeness are already proportions; the 1-5 dimensions map
    affinely with endpoints preserved.
    """
    if dimension in SCALED_DIMENSIONS:
        return (raw_score - 1.0) / 4.0
    return float(raw_score)


def judge_accuracy(
    ctx: PipelineContext,
    question: PredictiveQuestion,
    prediction_text: str,
    outcome: Outcome,
) -> tuple[JudgeScore, list[bool]]:
    """Hit/miss per outcome aspect; score 1 iff at least one aspect is hit."""
    hits: list[bool] = []
    for aspect in outcome.aspects:
        response = ctx.generate(
            "judge_accuracy_aspect",
            question=question.text,
            prediction=prediction_text,
            aspect=aspect.text,
        )
        try:
            verdict = parse_verdict(response, ("HIT", "MISS"))
            hits.append(verdict == "HIT")
        except ParseError:
            ctx.flag("unparseable-hit", question_id=question.id)
            hits.append(False)
    score = JudgeScore(
        question_id=question.id,
        dimension=Dimension.ACCURACY.value,
        raw_score=1.0 if any(hits) else 0.0,
        probability=1.0,
    )
    return score, hits


def judge_completeness(question_id: str, hits: Sequence[bool]) -> JudgeScore:
    """Proportion of outcome aspects the prediction covered."""
    if not hits:
        raise ValueError("completeness needs the accuracy hit set")
    return JudgeScore(
        question_id=question_id,
        dimension=Dimension.COMPLETENESS.value,
        raw_score=sum(hits) / len(hits),
        probability=1.0,
    )


def judge_scaled(
    ctx: PipelineContext,
    dimension: str,
    question: PredictiveQuestion,
    prediction_text: str,
    outcome: Outcome,
) -> Optional[JudgeScore]:
    """One 1-5 judgment with stated probability; None when unscorable."""
    if dimension not in SCALED_DIMENSIONS:
        raise ValueError(f"{dimension} is not a scaled dimension")
    outcome_text = " | ".join(a.text for a in outcome.aspects)
    response = ctx.generate(
        "judge_scaled",
        dimension=dimension,
        question=question.text,
        prediction=prediction_text,
        outcome=outcome_text,
    )
    try:
        raw = parse_score(response)
        prob = parse_probability(response)
    except ParseError:
        ctx.flag("unscorable", question_id=question.id, dimension=dimension)
        return None
    if not 0.0 <= prob <= 1.0:
        ctx.flag("probability-clamped", question_id=question.id, dimension=dimension)
        prob = min(1.0, max(0.0, prob))
    return JudgeScore(
        question_id=question.id,
        dimension=dimension,
        raw_score=float(raw),
        probability=prob,
        rationale=response,
    )


def aggregate_dimension(items: Sequence[JudgeScore]) -> Optional[DimensionAggregate]:
    """Confidence-weighted mean of normalized scores for one dimension cell.

    Empty input yields None (an absent report cell, never a zero).
    """
    if not items:
        return None
    dimension = items[0].dimension
    if any(s.dimension != dimension for s in items):
        raise ValueError("items span multiple dimensions")
    total = sum(sigma(dimension, s.raw_score) * s.probability for s in items)
    return DimensionAggregate(
        dimension=dimension,
        category="",
        n=len(items),
        score=total / len(items),
    )


def evaluate_time(
    interval_choice: int, resolved_interval: Optional[int], interval_count: int = 3
) -> int:
    """1 iff the chosen option equals the resolved one; absent resolution
    means the no-outcome option."""
    resolved = resolved_interval if resolved_interval is not None else interval_count + 1
    return 1 if interval_choice == resolved else 0


def evaluate_run(ctx: PipelineContext, run_id: str) -> list[JudgeScore]:
    """Judge every scorable prediction of a run; persists scores and hit sets."""
    rows = ctx.store.read_run_jsonl(run_id, "predictions.jsonl")
    scores: list[JudgeScore] = []
    hit_rows: list[dict] = []
    excluded = 0
    for row in rows:
        prediction = Prediction.from_dict(row)
        question = ctx.store.get("questions", prediction.question_id, PredictiveQuestion)
        if question is None:
            excluded += 1
            continue
        outcome = ctx.store.get("outcomes", question.id, Outcome)
        if question.status != QuestionStatus.OUTCOME_RECORDED.value or outcome is None:
            excluded += 1
            continue
        if question.category == QuestionCategory.TIME.value:
            if prediction.interval_choice is None:
                excluded += 1
                continue
            value = evaluate_time(
                prediction.interval_choice,
                outcome.resolved_interval,
                ctx.config.interval_count,
            )
            scores.append(
                JudgeScore(
                    question_id=question.id,
                    dimension=Dimension.ACCURACY.value,
                    raw_score=float(value),
                    probability=1.0,
                )
            )
            continue
        text = prediction.final_answer or ""
        accuracy, hits = judge_accuracy(ctx, question, text, outcome)
        scores.append(accuracy)
        hit_rows.append({"question_id": question.id, "hits": hits})
        scores.append(judge_completeness(question.id, hits))
        for dimension in sorted(SCALED_DIMENSIONS):
            scaled = judge_scaled(ctx, dimension, question, text, outcome)
            if scaled is not None:
                scores.append(scaled)
    ctx.store.write_run_jsonl(run_id, "scores.jsonl", [s.to_dict() for s in scores])
    ctx.store.write_run_jsonl(run_id, "hit_sets.jsonl", hit_rows)
    meta = {"excluded": excluded, "flags": [f for f in ctx.flags if f.get("kind") == "unscorable"]}
    ctx.store.write_run_json(run_id, "evaluation_meta.json", meta)
    return scores


@dataclass
class EvaluationReport:
    run_id: str
    cells: list[DimensionAggregate] = field(default_factory=list)
    category_overall: dict = field(default_factory=dict)  # cat -> {score, n_questions}
    overall: Optional[float] = None
    counts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "cells": [c.to_dict() for c in self.cells],
            "category_overall": self.category_overall,
            "overall": self.overall,
            "counts": self.counts,
        }


def build_report(store: Store, run_id: str, interval_count: int = 3) -> EvaluationReport:
    """Fold persisted scores into per-dimension, per-category aggregates.

    Category score is the mean over that category's present dimension cells
    (time questions only ever have accuracy). The grand overall pools
    categories weighted by their scored-question counts.
    """
    score_rows = store.read_run_jsonl(run_id, "scores.jsonl")
    scores = [JudgeScore.from_dict(row) for row in score_rows]
    questions = {q.id: q for q in store.all("questions", PredictiveQuestion)}

    by_cell: dict[tuple[str, str], list[JudgeScore]] = {}
    question_ids_by_category: dict[str, set[str]] = {}
    for s in scores:
        q = questions.get(s.question_id)
        category = q.category if q is not None else "unknown"
        by_cell.setdefault((s.dimension, category), []).append(s)
        question_ids_by_category.setdefault(category, set()).add(s.question_id)

    cells: list[DimensionAggregate] = []
    for category in CATEGORY_ORDER:
        for dimension in [d.value for d in Dimension]:
            items = by_cell.get((dimension, category))
            if not items:
                continue
            aggregate = aggregate_dimension(items)
            assert aggregate is not None
            aggregate.category = category
            cells.append(aggregate)

    category_overall: dict[str, dict] = {}
    for category in CATEGORY_ORDER:
        cat_cells = [c for c in cells if c.category == category]
        if not cat_cells:
            continue
        score = sum(c.score for c in cat_cells) / len(cat_cells)
        category_overall[category] = {
            "score": score,
            "n_questions": len(question_ids_by_category.get(category, ())),
        }

    overall: Optional[float] = None
    total_questions = sum(v["n_questions"] for v in category_overall.values())
    if total_questions:
        overall = (
            sum(v["score"] * v["n_questions"] for v in category_overall.values())
            / total_questions
        )

    meta = store.read_run_json(run_id, "evaluation_meta.json") or {}
    counts = {
        "scored_questions": total_questions,
        "excluded": meta.get("excluded", 0),
        "unscorable": len(meta.get("flags", [])),
    }
    return EvaluationReport(
        run_id=run_id,
        cells=cells,
        category_overall=category_overall,
        overall=overall,
        counts=counts,
    )


def correlate(
    human_scores: Sequence[float], judge_scores: Sequence[float]
) -> tuple[Optional[float], Optional[float]]:
    """Spearman (average-rank ties) and Kendall tau-b over paired scores.

    Constant input on either side leaves the correlation undefined, reported
    as None.
    """
    if len(human_scores) != len(judge_scores):
        raise ValueError("paired score lists must have equal length")
    if len(human_scores) < 3:
        raise ValueError("need at least 3 pairs to correlate")
    if len(set(human_scores)) == 1 or len(set(judge_scores)) == 1:
        return None, None
    rho = stats.spearmanr(human_scores, judge_scores).statistic
    tau = stats.kendalltau(human_scores, judge_scores).statistic
    rho_out = None if rho != rho else float(rho)
    tau_out = None if tau != tau else float(tau)
    return rho_out, tau_out


def validity_experiment(
    ctx: PipelineContext, questions: Sequence[PredictiveQuestion]
) -> dict:
    """Classify answerable-vs-not over a balanced resolved/no-outcome pool."""
    resolved = [q for q in questions if q.status == QuestionStatus.OUTCOME_RECORDED.value]
    unresolved = [q for q in questions if q.status == QuestionStatus.NO_OUTCOME.value]
    if len(resolved) + len(unresolved) != len(questions):
        raise ValueError("pool must contain only resolved or no-outcome questions")
    if len(resolved) != len(unresolved):
        raise ValueError(
            f"pool must be balanced: {len(resolved)} resolved vs {len(unresolved)} no-outcome"
        )
    per_category: dict[str, dict[str, int]] = {}
    correct_total = 0
    for q in questions:
        response = ctx.generate(
            "validity_classify",
            question=q.text,
            background=q.background,
            created_at=q.created_at,
            window_days=str(q.window_days),
        )
        truth = q.status == QuestionStatus.OUTCOME_RECORDED.value
        try:
            verdict = parse_verdict(response, ("UNANSWERABLE", "ANSWERABLE"))
            correct = (verdict == "ANSWERABLE") == truth
        except ParseError:
            ctx.flag("unparseable-validity-verdict", question_id=q.id)
            correct = False
        slot = per_category.setdefault(q.category, {"n": 0, "correct": 0})
        slot["n"] += 1
        slot["correct"] += int(correct)
        correct_total += int(correct)
    table = {
        "n": len(questions),
        "overall": correct_total / len(questions) if questions else None,
        "per_category": {
            cat: {"n": v["n"], "accuracy": v["correct"] / v["n"]}
            for cat, v in sorted(per_category.items())
        },
    }
    return table
