"""Command-line umbrella for the whole workbench."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import bench, harness, reporting
from .config import OpenEPConfig
from .domain import PredictiveQuestion, QuestionStatus
from .evaluation import build_report, correlate, evaluate_run, validity_experiment
from .harness import run_matrix as harness_run_matrix
from .integration import run_integration
from .retrieval import run_retrieval
from .runtime import PipelineContext
from .storage import Store
from .util import format_date, parse_date
from datetime import date as _date


def _load_config(config_path: str | None, data_dir: str | None) -> OpenEPConfig:
    config = OpenEPConfig.load(config_path) if config_path else OpenEPConfig()
    if data_dir:
        config.data_dir = data_dir
    return config


def _context(config: OpenEPConfig, today: str | None) -> PipelineContext:
    store = Store(config.data_dir)
    return PipelineContext.create(store, config, today or format_date(_date.today()))


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="YAML config file")
@click.option("--data-dir", default=None, help="Override the storage directory")
@click.option("--today", default=None, help="Logical date (YYYY-MM-DD); defaults to wall clock")
@click.pass_context
def main(ctx: click.Context, config_path: str | None, data_dir: str | None, today: str | None):
    """Open-ended event prediction workbench."""
    ctx.ensure_object(dict)
    ctx.obj["config"] = _load_config(config_path, data_dir)
    ctx.obj["today"] = today


@main.command("ingest-topics")
@click.option("--source", type=click.Choice(["zh-forum", "en-news"]), required=True)
@click.option("--date", "on_date", required=True)
@click.option("--file", "path", type=click.Path(exists=True), required=True,
              help="JSONL of {title, background} items")
@click.pass_context
def ingest_topics_cmd(ctx, source: str, on_date: str, path: str):
    pipeline = _context(ctx.obj["config"], ctx.obj["today"] or on_date)
    items = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                row = json.loads(line)
                items.append((row.get("title", ""), row.get("background", "")))
    topics = bench.ingest_topics(pipeline, source, on_date, items)
    click.echo(f"ingested {len(topics)} topics for {on_date}")


@main.command("build-questions")
@click.option("--date", "on_date", required=True)
@click.pass_context
def build_questions_cmd(ctx, on_date: str):
    pipeline = _context(ctx.obj["config"], ctx.obj["today"] or on_date)
    from .domain import HotTopic, TopicValidity

    topics = [t for t in pipeline.store.all("topics", HotTopic) if t.collected_on == on_date]
    if not topics:
        raise click.ClickException(f"no topics ingested for {on_date}")
    built = 0
    for topic in topics:
        topic = bench.enrich_background(pipeline, topic)
        topic = bench.check_topic_validity(pipeline, topic)
        if topic.validity != TopicValidity.VALID.value:
            continue
        for question in bench.generate_candidate_questions(pipeline, topic):
            bench.run_principle_checklist(pipeline, question)
            built += 1
    queued = len(bench.review_queue(pipeline, on_date))
    click.echo(f"built {built} candidates; {queued} queued for review")


@main.command("retrieve")
@click.option("--question-id", required=True)
@click.option("--method", type=click.Choice(["stkfep", "dr-summ", "dr-sos", "gqr-sos"]),
              default="stkfep")
@click.option("--no-stakeholders", is_flag=True)
@click.option("--no-similar", is_flag=True)
@click.pass_context
def retrieve_cmd(ctx, question_id: str, method: str, no_stakeholders: bool, no_similar: bool):
    pipeline = _context(ctx.obj["config"], ctx.obj["today"])
    question = pipeline.store.get("questions", question_id, PredictiveQuestion)
    if question is None:
        raise click.ClickException(f"unknown question {question_id}")
    if ctx.obj["today"] is None:
        # Same-day protocol: without an explicit date, retrieve as of creation.
        pipeline.today = parse_date(question.created_at)
    result = run_retrieval(
        pipeline, question, method,
        no_stakeholders=no_stakeholders, no_similar=no_similar,
    )
    outdir = Path(pipeline.config.data_dir) / "adhoc"
    outdir.mkdir(parents=True, exist_ok=True)
    out = outdir / f"retrieval-{question_id}.json"
    out.write_text(json.dumps(result.to_dict(), sort_keys=True, indent=2), encoding="utf-8")
    click.echo(f"SE={len(result.relevant_events)} RE-events={len(result.similar_events)} -> {out}")


@main.command("integrate")
@click.option("--question-id", required=True)
@click.option("--integrator", type=click.Choice(["cluster", "summ", "summ-over-summ"]),
              default="cluster")
@click.option("--method", default="stkfep")
@click.pass_context
def integrate_cmd(ctx, question_id: str, integrator: str, method: str):
    pipeline = _context(ctx.obj["config"], ctx.obj["today"])
    question = pipeline.store.get("questions", question_id, PredictiveQuestion)
    if question is None:
        raise click.ClickException(f"unknown question {question_id}")
    retrieval = run_retrieval(pipeline, question, method)
    result = run_integration(
        pipeline, question, retrieval.relevant_events, retrieval.similar_articles(), integrator
    )
    outdir = Path(pipeline.config.data_dir) / "adhoc"
    outdir.mkdir(parents=True, exist_ok=True)
    out = outdir / f"integration-{question_id}.json"
    out.write_text(json.dumps(result.to_dict(), sort_keys=True, indent=2), encoding="utf-8")
    clusters = {b: len(c) for b, c in result.clusters.items()}
    click.echo(f"integrator={integrator} clusters={clusters} -> {out}")


@main.command("predict")
@click.option("--question-id", required=True)
@click.option("--method", type=click.Choice(["stkfep", "dr-summ", "dr-sos", "gqr-sos"]),
              default="stkfep")
@click.option("--no-cluster-summ", is_flag=True)
@click.option("--no-similar", is_flag=True)
@click.option("--no-stakeholders", is_flag=True)
@click.pass_context
def predict_cmd(ctx, question_id, method, no_cluster_summ, no_similar, no_stakeholders):
    pipeline = _context(ctx.obj["config"], ctx.obj["today"])
    question = pipeline.store.get("questions", question_id, PredictiveQuestion)
    if question is None:
        raise click.ClickException(f"unknown question {question_id}")
    ablations = [
        flag
        for flag, on in (
            ("no_cluster_summ", no_cluster_summ),
            ("no_similar", no_similar),
            ("no_stakeholders", no_stakeholders),
        )
        if on
    ]
    manifest = harness.run_pipeline(pipeline, [question], method, ablations)
    click.echo(f"run {manifest.run_id}: 1 prediction recorded")


@main.command("collect-outcomes")
@click.option("--date", "on_date", required=True)
@click.option("--auto", is_flag=True, help="Record top-candidate outcomes unattended")
@click.pass_context
def collect_outcomes_cmd(ctx, on_date: str, auto: bool):
    pipeline = _context(ctx.obj["config"], ctx.obj["today"])
    questions = [
        q for q in pipeline.store.all("questions", PredictiveQuestion)
        if q.created_at == on_date and q.status == QuestionStatus.ACCEPTED.value
    ]
    for question in questions:
        articles = bench.collect_outcome_news(pipeline, question)
        reranked = bench.rerank_outcome_news(pipeline, question, articles)
        if auto:
            harness.record_top_candidate_outcome(pipeline, question, reranked)
    click.echo(f"collected outcome news for {len(questions)} questions")


@main.command("mark-no-outcome")
@click.option("--question-id", required=True)
@click.option("--editor", default="cli")
@click.pass_context
def mark_no_outcome_cmd(ctx, question_id: str, editor: str):
    pipeline = _context(ctx.obj["config"], ctx.obj["today"])
    bench.mark_no_outcome(pipeline, question_id, editor)
    click.echo(f"{question_id} marked no-outcome")


@main.command("evaluate")
@click.option("--run-id", required=True)
@click.pass_context
def evaluate_cmd(ctx, run_id: str):
    pipeline = _context(ctx.obj["config"], ctx.obj["today"])
    scores = evaluate_run(pipeline, run_id)
    report = build_report(pipeline.store, run_id, pipeline.config.interval_count)
    name = harness.write_report(pipeline.store, run_id, report.to_dict())
    click.echo(f"{len(scores)} scores; report written as {name}")


@main.command("report")
@click.option("--run-id", required=True)
@click.option("--format", "fmt", type=click.Choice(["table", "csv"]), default="table")
@click.option("--outdir", type=click.Path(), default=None,
              help="Also write report.json/csv/txt/png here")
@click.pass_context
def report_cmd(ctx, run_id: str, fmt: str, outdir: str | None):
    config = ctx.obj["config"]
    store = Store(config.data_dir)
    report = store.read_run_json(run_id, "report.json")
    if report is None:
        raise click.ClickException(f"no report for run {run_id}; run `openep evaluate` first")
    if fmt == "table":
        click.echo(reporting.report_to_text(report), nl=False)
    else:
        click.echo(reporting.report_to_csv(report), nl=False)
    if outdir:
        paths = reporting.write_report_files(report, outdir, stem=f"report-{run_id}")
        click.echo(f"wrote {', '.join(p.name for p in paths)} to {outdir}", err=True)


@main.command("correlate")
@click.option("--human", "human_path", type=click.Path(exists=True), required=True,
              help="JSONL of {question_id, dimension, score}")
@click.option("--run-id", required=True)
@click.pass_context
def correlate_cmd(ctx, human_path: str, run_id: str):
    config = ctx.obj["config"]
    store = Store(config.data_dir)
    judge_rows = store.read_run_jsonl(run_id, "scores.jsonl")
    judge = {(r["question_id"], r["dimension"]): r["raw_score"] for r in judge_rows}
    human_scores, judge_scores = [], []
    with open(human_path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            key = (row["question_id"], row["dimension"])
            if key in judge:
                human_scores.append(float(row["score"]))
                judge_scores.append(float(judge[key]))
    spearman, tau = correlate(human_scores, judge_scores)
    click.echo(json.dumps({"n": len(human_scores), "spearman": spearman, "kendall_tau_b": tau}))


@main.command("validity-experiment")
@click.option("--pool", "pool_path", type=click.Path(exists=True), required=True,
              help="JSONL of question records (balanced resolved / no-outcome)")
@click.option("--outdir", type=click.Path(), default=None)
@click.pass_context
def validity_experiment_cmd(ctx, pool_path: str, outdir: str | None):
    pipeline = _context(ctx.obj["config"], ctx.obj["today"])
    questions = []
    with open(pool_path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                questions.append(PredictiveQuestion.from_dict(json.loads(line)))
    table = validity_experiment(pipeline, questions)
    click.echo(json.dumps(table, sort_keys=True, indent=2))
    if outdir:
        paths = reporting.write_validity_files(table, outdir)
        click.echo(f"wrote {', '.join(p.name for p in paths)}", err=True)


@main.command("run-day")
@click.option("--date", "on_date", required=True)
@click.option("--method", default="stkfep")
@click.option("--ablate", multiple=True,
              type=click.Choice(["no_cluster_summ", "no_similar", "no_stakeholders"]))
@click.option("--auto-accept", is_flag=True, help="Accept the whole review queue unattended")
@click.pass_context
def run_day_cmd(ctx, on_date: str, method: str, ablate: tuple[str, ...], auto_accept: bool):
    pipeline = _context(ctx.obj["config"], on_date)
    handler = harness.accept_all if auto_accept else None
    manifest = harness.run_day(pipeline, on_date, method, list(ablate), handler)
    click.echo(f"run {manifest.run_id}: {len(manifest.question_ids)} questions predicted")


@main.command("close-window")
@click.option("--date", "on_date", required=True)
@click.option("--auto-outcomes", is_flag=True,
              help="Record top-candidate outcomes unattended")
@click.pass_context
def close_window_cmd(ctx, on_date: str, auto_outcomes: bool):
    pipeline = _context(ctx.obj["config"], ctx.obj["today"])
    handler = harness.record_top_candidate_outcome if auto_outcomes else None
    evaluated = harness.close_window(pipeline, on_date, handler)
    click.echo(f"evaluated runs: {', '.join(evaluated) or '(none)'}")


@main.command("run-matrix")
@click.option("--date", "on_date", required=True,
              help="Use accepted questions created on this date")
@click.option("--methods", default="stkfep", help="Comma-separated method list")
@click.option("--ablations", default="", help="Comma-separated ablation flags")
@click.option("--outdir", type=click.Path(), default=None)
@click.pass_context
def run_matrix_cmd(ctx, on_date: str, methods: str, ablations: str, outdir: str | None):
    config = ctx.obj["config"]
    store = Store(config.data_dir)
    questions = [
        q for q in store.all("questions", PredictiveQuestion)
        if q.created_at == on_date and q.status == QuestionStatus.ACCEPTED.value
    ]
    if not questions:
        raise click.ClickException(f"no accepted questions created on {on_date}")
    method_list = [m.strip() for m in methods.split(",") if m.strip()]
    ablation_list = [a.strip() for a in ablations.split(",") if a.strip()]
    manifests = harness_run_matrix(store, config, on_date, questions, method_list, ablation_list)
    rows = []
    for manifest in manifests:
        row: dict = {
            "run_id": manifest.run_id,
            "method": manifest.method,
            "ablations": manifest.ablations,
        }
        pipeline = PipelineContext.create(store, config, on_date)
        try:
            evaluate_run(pipeline, manifest.run_id)
            report = build_report(store, manifest.run_id, config.interval_count)
            harness.write_report(store, manifest.run_id, report.to_dict())
            row.update(report.to_dict())
        except Exception:
            row["overall"] = None
        rows.append(row)
        click.echo(f"{manifest.run_id}  {manifest.method}  {manifest.ablations or '-'}")
    if outdir:
        paths = reporting.write_matrix_files(rows, outdir)
        click.echo(f"wrote {paths[0]}", err=True)


@main.command("daily-study")
@click.option("--date", "on_date", required=True,
              help="Use accepted questions created on this date")
@click.option("--days", type=int, required=True)
@click.option("--method", default="stkfep")
@click.option("--outdir", type=click.Path(), default=None)
@click.pass_context
def daily_study_cmd(ctx, on_date: str, days: int, method: str, outdir: str | None):
    config = ctx.obj["config"]
    store = Store(config.data_dir)
    questions = [
        q for q in store.all("questions", PredictiveQuestion)
        if q.created_at == on_date and q.status == QuestionStatus.ACCEPTED.value
    ]
    if not questions:
        raise click.ClickException(f"no accepted questions created on {on_date}")
    study = harness.daily_study(store, config, questions, days, method)
    click.echo(json.dumps(study["series"], indent=2))
    if outdir:
        paths = reporting.write_series_files(study["series"], outdir)
        click.echo(f"wrote {', '.join(p.name for p in paths)}", err=True)


@main.command("serve")
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8080)
@click.option("--static-dir", type=click.Path(), default=None,
              help="Serve the annotation UI build from this directory")
@click.pass_context
def serve_cmd(ctx, host: str, port: int, static_dir: str | None):
    import uvicorn

    from .service import create_app

    config = ctx.obj["config"]
    store = Store(config.data_dir)
    app = create_app(store, config, today=ctx.obj["today"], static_dir=static_dir)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
