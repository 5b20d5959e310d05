"""Orchestration: run manifests, the daily lifecycle, matrices, daily study.

A run is the unit of reproducibility: its manifest (written before the first
provider call, finalized after the last) pins method, ablations, seed, and
the provider config digest; its transcript makes replayed re-runs
bit-identical. Predictions always carry the run's logical date, which is how
the same-day leakage protocol is enforced and audited.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Callable, Optional, Sequence

from . import bench
from .domain import (
    HotTopic,
    Method,
    NewsArticle,
    Prediction,
    PredictiveQuestion,
    QuestionStatus,
    Record,
    TopicValidity,
    register_validator,
)
from .evaluation import build_report, evaluate_run
from .integration import run_integration
from .prediction import run_prediction
from .providers import ProviderTranscript, SnapshotMissingError
from .retrieval import run_retrieval
from .runtime import PipelineContext
from .storage import Store
from .util import digest, format_date, parse_date

logger = logging.getLogger(__name__)

ABLATION_FLAGS = ("no_cluster_summ", "no_similar", "no_stakeholders")

ReviewHandler = Callable[[PipelineContext, list[PredictiveQuestion]], None]
OutcomeHandler = Callable[[PipelineContext, PredictiveQuestion, list], None]


@dataclass
class RunManifest(Record):
    run_id: str
    date: str
    method: str
    ablations: dict = field(default_factory=dict)
    provider_config_digest: str = ""
    seed: int = 0
    interval_count: int = 3
    window_days: int = 15
    question_ids: list = field(default_factory=list)
    stage_status: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)


@register_validator(RunManifest)
def _check_manifest(m: RunManifest, **_) -> list[str]:
    problems = []
    if m.method not in {x.value for x in Method}:
        problems.append(f"unknown method {m.method!r}")
    if not set(m.ablations) <= set(ABLATION_FLAGS):
        problems.append("unknown ablation flag")
    return problems


def make_run_id(
    run_date: str, method: str, ablations: dict, seed: int, variant: str = ""
) -> str:
    """Deterministic, opaque run identifier."""
    tag = digest(
        {"date": run_date, "method": method, "ablations": ablations, "seed": seed,
         "variant": variant}
    )[:12]
    return f"run-{tag}"


def _normalize_ablations(ablations: Optional[Sequence[str] | dict]) -> dict:
    if ablations is None:
        return {}
    if isinstance(ablations, dict):
        flags = {k: bool(v) for k, v in ablations.items() if v}
    else:
        flags = {a: True for a in ablations}
    unknown = set(flags) - set(ABLATION_FLAGS)
    if unknown:
        raise ValueError(f"unknown ablation flags: {sorted(unknown)}")
    return flags


def integrator_for(method: str, ablations: dict) -> str:
    if method == Method.DR_SUMM.value:
        return "summ"
    if method in (Method.DR_SOS.value, Method.GQR_SOS.value):
        return "summ-over-summ"
    if method == Method.STKFEP.value:
        return "summ-over-summ" if ablations.get("no_cluster_summ") else "cluster"
    raise ValueError(f"unknown method {method!r}")


def predict_question(
    ctx: PipelineContext,
    question: PredictiveQuestion,
    method: str,
    ablations: dict,
    run_id: str,
) -> tuple[Prediction, dict]:
    """Run retrieval -> integration -> prediction for one question."""
    retrieval = run_retrieval(
        ctx,
        question,
        method,
        no_stakeholders=bool(ablations.get("no_stakeholders")),
        no_similar=bool(ablations.get("no_similar")),
    )
    bench.store_articles(ctx, retrieval.relevant_events, question.text)
    bench.store_articles(ctx, retrieval.similar_articles(), question.text)
    integration = run_integration(
        ctx,
        question,
        retrieval.relevant_events,
        retrieval.similar_articles(),
        integrator_for(method, ablations),
    )
    prediction = run_prediction(
        ctx,
        question,
        integration,
        run_id,
        method,
        no_cluster_summ=bool(ablations.get("no_cluster_summ")),
        no_similar=bool(ablations.get("no_similar")),
        no_stakeholders=bool(ablations.get("no_stakeholders")),
    )
    artifacts = {
        "retrieval": retrieval.to_dict(),
        "integration": integration.to_dict(),
    }
    return prediction, artifacts


def run_pipeline(
    ctx: PipelineContext,
    questions: Sequence[PredictiveQuestion],
    method: str,
    ablations: Optional[Sequence[str] | dict] = None,
    run_id: Optional[str] = None,
    variant: str = "",
) -> RunManifest:
    """Predict a question set under one manifest; never rewrites a run."""
    flags = _normalize_ablations(ablations)
    run_date = ctx.today_str
    run_id = run_id or make_run_id(run_date, method, flags, ctx.config.seed, variant)
    if ctx.store.run_exists(run_id):
        raise ValueError(f"run {run_id} already exists; runs are immutable")
    manifest = RunManifest(
        run_id=run_id,
        date=run_date,
        method=method,
        ablations=flags,
        provider_config_digest=ctx.config.config_digest(),
        seed=ctx.config.seed,
        interval_count=ctx.config.interval_count,
        window_days=ctx.config.window_days,
        question_ids=[q.id for q in questions],
        stage_status={"predict": "running"},
    )
    ctx.store.write_run_json(run_id, "manifest.json", manifest.to_dict())

    predictions = []
    artifact_rows = []
    for question in questions:
        prediction, artifacts = predict_question(ctx, question, method, flags, run_id)
        predictions.append(prediction)
        artifact_rows.append(artifacts)

    ctx.store.write_run_jsonl(
        run_id, "predictions.jsonl", [p.to_dict() for p in predictions]
    )
    ctx.store.write_run_jsonl(run_id, "retrieval.jsonl", [a["retrieval"] for a in artifact_rows])
    ctx.store.write_run_jsonl(
        run_id, "integration.jsonl", [a["integration"] for a in artifact_rows]
    )
    ctx.store.write_run_jsonl(run_id, "transcript.jsonl", ctx.transcript.to_rows())
    if ctx.flags:
        ctx.store.write_run_jsonl(run_id, "flags.jsonl", ctx.flags)
    manifest.stage_status = {"predict": "done"}
    ctx.store.write_run_json(run_id, "manifest.json", manifest.to_dict())
    return manifest


def accept_all(ctx: PipelineContext, queue: list[PredictiveQuestion]) -> None:
    """Review handler for unattended runs: accept everything in the queue."""
    for question in queue:
        bench.record_review_verdict(ctx, question.id, "accept", editor="auto")


def run_day(
    ctx: PipelineContext,
    run_date: str,
    method: str = Method.STKFEP.value,
    ablations: Optional[Sequence[str] | dict] = None,
    review_handler: Optional[ReviewHandler] = None,
) -> RunManifest:
    """One annotation day: build questions, drain the review gate, predict.

    The handler plays the annotator role; whatever it leaves in the queue at
    the cutoff is rejected-by-timeout so the day's run is never blocked.
    Predictions carry the day's date (the same-day constraint).
    """
    if ctx.today_str != run_date:
        raise ValueError(f"context is at {ctx.today_str}, cannot run day {run_date}")
    if ctx.store.linked("day_runs", run_date):
        raise ValueError(f"day {run_date} already ran; runs are immutable")
    topics = [
        t for t in ctx.store.all("topics", HotTopic) if t.collected_on == run_date
    ]
    if not topics:
        raise ValueError(f"no topics ingested for {run_date}")

    for topic in topics:
        topic = bench.enrich_background(ctx, topic)
        topic = bench.check_topic_validity(ctx, topic)
        if topic.validity != TopicValidity.VALID.value:
            continue
        for question in bench.generate_candidate_questions(ctx, topic):
            bench.run_principle_checklist(ctx, question)

    if review_handler is not None:
        review_handler(ctx, bench.review_queue(ctx, run_date))
    for question in bench.review_queue(ctx, run_date):
        bench.transition_question(
            ctx, question.id, QuestionStatus.REJECTED.value, rejection_principle="other"
        )
        ctx.flag("review-timeout", question_id=question.id)

    accepted = [
        q
        for q in ctx.store.all("questions", PredictiveQuestion)
        if q.status == QuestionStatus.ACCEPTED.value and q.created_at == run_date
    ]
    manifest = run_pipeline(ctx, accepted, method, ablations)
    ctx.store.link("day_runs", run_date, [manifest.run_id])
    return manifest


def record_top_candidate_outcome(
    ctx: PipelineContext, question: PredictiveQuestion, reranked: list
) -> None:
    """Outcome handler for unattended runs: first sentence of the best
    candidate article, or no-outcome when nothing qualifies."""
    candidates = [
        r for r in reranked if r.outcome_likelihood_score >= ctx.config.rerank_threshold
    ]
    if not candidates:
        bench.mark_no_outcome(ctx, question.id, editor="auto")
        return
    article = ctx.store.get("articles", candidates[0].article_id, NewsArticle)
    body = article.body
    end = body.find(".")
    end = len(body) if end < 0 else end + 1
    bench.record_outcome(ctx, question.id, [(article.id, (0, end))], editor="auto")


def close_window(
    ctx: PipelineContext,
    run_date: str,
    outcome_handler: Optional[OutcomeHandler] = None,
) -> list[str]:
    """After the window: collect and rerank outcome news, gate, evaluate.

    Returns the run ids that were evaluated. Questions left without a
    recorded outcome stay pending (or are closed by the handler); no-outcome
    questions are excluded from scoring and feed the validity pool.
    """
    window_end = parse_date(run_date) + timedelta(days=ctx.config.window_days)
    if ctx.today < window_end:
        raise ValueError(
            f"window for {run_date} closes {format_date(window_end)}; today is {ctx.today_str}"
        )
    questions = [
        q
        for q in ctx.store.all("questions", PredictiveQuestion)
        if q.created_at == run_date and q.status == QuestionStatus.ACCEPTED.value
    ]
    for question in questions:
        articles = bench.collect_outcome_news(ctx, question)
        reranked = bench.rerank_outcome_news(ctx, question, articles)
        if outcome_handler is not None:
            outcome_handler(ctx, question, reranked)

    evaluated = []
    for run_id in ctx.store.linked("day_runs", run_date):
        evaluate_run(ctx, run_id)
        report = build_report(ctx.store, run_id, ctx.config.interval_count)
        write_report(ctx.store, run_id, report.to_dict())
        evaluated.append(run_id)
    return evaluated


def write_report(store: Store, run_id: str, payload: dict) -> str:
    """Reports are versioned, never overwritten: re-evaluation gets a new file."""
    name = "report.json"
    version = 1
    while (store.root / "runs" / run_id / name).exists():
        version += 1
        name = f"report.v{version}.json"
    store.write_run_json(run_id, name, payload)
    return name


def run_matrix(
    store: Store,
    config,
    today: str,
    questions: Sequence[PredictiveQuestion],
    methods: Sequence[str],
    ablations: Sequence[str] = (),
) -> list[RunManifest]:
    """One run per (method, ablation) cell over a shared question set.

    Plain cells run every requested method unablated; each ablation flag adds
    a stakeholder-pipeline cell with that flag set. Every cell gets its own
    context and transcript namespace.
    """
    for q in questions:
        if q.status != QuestionStatus.ACCEPTED.value:
            raise ValueError(f"question {q.id} is not accepted")
    known = {m.value for m in Method}
    cells: list[tuple[str, dict]] = []
    for method in methods:
        if method not in known:
            raise ValueError(f"unknown method {method!r}")
        cells.append((method, {}))
    for flag in ablations:
        cells.append((Method.STKFEP.value, _normalize_ablations([flag])))

    manifests = []
    for method, flags in cells:
        ctx = PipelineContext.create(store, config, today)
        manifests.append(
            run_pipeline(ctx, questions, method, flags, variant="matrix")
        )
    return manifests


def daily_study(
    store: Store,
    config,
    questions: Sequence[PredictiveQuestion],
    days: int,
    method: str = Method.STKFEP.value,
) -> dict:
    """Predict the same questions once per day with an advancing cutoff.

    Day k's context sits at created_at + k, so retrieval may see k extra days
    of coverage. Missing corpus snapshots skip the day and record a gap.
    After outcomes exist, each day's run is scored into the series.
    """
    if days < 1:
        raise ValueError("study needs at least one day")
    if not questions:
        raise ValueError("study needs at least one question")
    created = {q.created_at for q in questions}
    if len(created) != 1:
        raise ValueError("study questions must share a creation date")
    start = parse_date(next(iter(created)))
    horizon = min(q.window_days for q in questions)
    if days > horizon:
        raise ValueError(f"study of {days} days exceeds the {horizon}-day resolution horizon")

    runs: list[Optional[str]] = []
    for k in range(days):
        study_date = format_date(start + timedelta(days=k))
        ctx = PipelineContext.create(store, config, study_date)
        try:
            manifest = run_pipeline(
                ctx, questions, method, run_id=None, variant=f"study-day-{k}"
            )
            runs.append(manifest.run_id)
        except SnapshotMissingError:
            logger.warning("corpus snapshot missing for day %d (%s)", k, study_date)
            runs.append(None)

    series = []
    for k, run_id in enumerate(runs):
        point: dict = {"day": k, "date": format_date(start + timedelta(days=k))}
        if run_id is None:
            point["gap"] = True
            point["score"] = None
        else:
            point["run_id"] = run_id
            ctx = PipelineContext.create(store, config, format_date(start + timedelta(days=k)))
            evaluate_run(ctx, run_id)
            report = build_report(store, run_id, config.interval_count)
            write_report(store, run_id, report.to_dict())
            point["score"] = report.overall
            point["n_scored"] = report.counts["scored_questions"]
        series.append(point)
    return {"days": days, "runs": runs, "series": series}


def scan_same_day_invariant(store: Store) -> list[str]:
    """Global audit: every prediction's produced_at equals its run's date."""
    problems = []
    for run_id in store.list_runs():
        manifest_raw = store.read_run_json(run_id, "manifest.json")
        if manifest_raw is None:
            continue
        run_date = manifest_raw.get("date")
        for row in store.read_run_jsonl(run_id, "predictions.jsonl"):
            if row.get("produced_at") != run_date:
                problems.append(
                    f"{run_id}:{row.get('question_id')} produced {row.get('produced_at')}"
                )
    return problems
