"""HTTP API for the annotation companion and run inspection.

Every mutation goes through the same operations as the CLI (single code
path). Span submissions are cross-checked against the stored article body:
offsets and selected text must both match, which defends against client-side
encoding drift. Optional shared-token auth via the configured env var.
"""

from __future__ import annotations

import os
from datetime import date as date_type
from pathlib import Path
from typing import Any, Optional

from fastapi import Depends, FastAPI, Header, HTTPException, Query
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from . import bench
from .config import OpenEPConfig
from .domain import NewsArticle, Outcome, PredictiveQuestion, QuestionStatus
from .runtime import PipelineContext
from .storage import ConflictError, Store
from .util import format_date, normalize_ws


class VerdictBody(BaseModel):
    verdict: str
    principle: Optional[str] = None
    editor: str = ""


class AspectBody(BaseModel):
    article_id: str
    start: int
    end: int
    text: Optional[str] = None


class SegmentsBody(BaseModel):
    aspects: list[AspectBody] = Field(default_factory=list)
    editor: str = ""


class NoOutcomeBody(BaseModel):
    editor: str = ""


def create_app(
    store: Store,
    config: OpenEPConfig,
    today: Optional[str] = None,
    static_dir: Optional[str | Path] = None,
) -> FastAPI:
    app = FastAPI(title="openep annotation service")

    def current_ctx() -> PipelineContext:
        logical = today or format_date(date_type.today())
        return PipelineContext.create(store, config, logical)

    def check_token(authorization: Optional[str] = Header(default=None)) -> None:
        expected = os.environ.get(config.auth_token_env, "")
        if not expected:
            return
        if authorization != f"Bearer {expected}":
            raise HTTPException(status_code=401, detail="bad or missing token")

    guarded = [Depends(check_token)]

    @app.exception_handler(ConflictError)
    async def conflict_handler(_, exc: ConflictError):
        return JSONResponse(status_code=409, content={"error": "conflict", "detail": str(exc)})

    @app.get("/api/review/questions", dependencies=guarded)
    def review_questions(date: Optional[str] = Query(default=None)) -> list[dict]:
        ctx = current_ctx()
        out = []
        for question in bench.review_queue(ctx, date):
            checklist = ctx.store.get("checklists", question.id, bench.PrincipleChecklist)
            out.append(
                {
                    "question": question.to_dict(),
                    "checklist": checklist.to_dict() if checklist else None,
                }
            )
        return out

    @app.post("/api/review/questions/{question_id}/verdict", dependencies=guarded)
    def post_verdict(question_id: str, body: VerdictBody) -> dict:
        ctx = current_ctx()
        if body.verdict not in ("accept", "reject"):
            raise HTTPException(status_code=422, detail="verdict must be accept or reject")
        try:
            updated = bench.record_review_verdict(
                ctx, question_id, body.verdict, body.principle, body.editor
            )
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown question {question_id}")
        return updated.to_dict()

    @app.get("/api/review/outcomes", dependencies=guarded)
    def review_outcomes(date: Optional[str] = Query(default=None)) -> list[dict]:
        ctx = current_ctx()
        out = []
        for question in ctx.store.all("questions", PredictiveQuestion):
            if question.status != QuestionStatus.ACCEPTED.value:
                continue
            if date is not None and question.created_at != date:
                continue
            if ctx.today < question.window_end():
                continue
            reranked = sorted(
                (
                    r
                    for r in ctx.store.all("reranked", bench.RerankedArticle)
                    if r.question_id == question.id
                ),
                key=lambda r: (-r.outcome_likelihood_score, r.article_id),
            )
            out.append(
                {
                    "question": question.to_dict(),
                    "candidates": [r.to_dict() for r in reranked],
                }
            )
        return out

    @app.get("/api/articles/{article_id}", dependencies=guarded)
    def get_article(article_id: str) -> dict:
        article = store.get("articles", article_id, NewsArticle)
        if article is None:
            raise HTTPException(status_code=404, detail=f"unknown article {article_id}")
        return article.to_dict()

    @app.post("/api/outcomes/{question_id}/segments", dependencies=guarded)
    def post_segments(question_id: str, body: SegmentsBody) -> dict:
        ctx = current_ctx()
        if not body.aspects:
            raise HTTPException(status_code=422, detail="at least one aspect is required")
        for aspect in body.aspects:
            article = store.get("articles", aspect.article_id, NewsArticle)
            if article is None:
                raise HTTPException(
                    status_code=422, detail=f"unknown article {aspect.article_id}"
                )
            if not (0 <= aspect.start < aspect.end <= len(article.body)):
                raise HTTPException(
                    status_code=422,
                    detail=f"span [{aspect.start}, {aspect.end}) outside article body",
                )
            if aspect.text is not None:
                if normalize_ws(aspect.text) != normalize_ws(
                    article.body[aspect.start : aspect.end]
                ):
                    raise HTTPException(
                        status_code=422,
                        detail="selected text does not match the stored article span",
                    )
        try:
            outcome = bench.record_outcome(
                ctx,
                question_id,
                [(a.article_id, (a.start, a.end)) for a in body.aspects],
                editor=body.editor,
            )
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return outcome.to_dict()

    @app.post("/api/outcomes/{question_id}/no-outcome", dependencies=guarded)
    def post_no_outcome(question_id: str, body: NoOutcomeBody) -> dict:
        ctx = current_ctx()
        try:
            updated = bench.mark_no_outcome(ctx, question_id, editor=body.editor)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown question {question_id}")
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return updated.to_dict()

    @app.get("/api/runs", dependencies=guarded)
    def list_runs() -> list[dict]:
        out = []
        for run_id in store.list_runs():
            manifest = store.read_run_json(run_id, "manifest.json")
            if manifest is not None:
                out.append(manifest)
        return out

    @app.get("/api/runs/{run_id}/report", dependencies=guarded)
    def get_report(run_id: str) -> Any:
        report = store.read_run_json(run_id, "report.json")
        if report is None:
            raise HTTPException(status_code=404, detail=f"no report for run {run_id}")
        return report

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
