"""HTTP API: review queue, verdicts, outcome spans, conflicts, auth."""

from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

from openep import bench, harness
from openep.domain import PredictiveQuestion, QuestionStatus
from openep.service import create_app

from conftest import article, make_ctx

DAY = "2024-06-01"


@pytest.fixture
def world(tmp_path):
    scripted = (
        "outcome: What will the summit decide?\n"
        "impact: What impact will the summit have?"
    )
    articles = [
        article("sv1", "Summit preparations", "Delegates arrived for the summit. Talks begin.",
                "2024-05-30"),
        article("sv2", "Summit outcome report",
                "The summit produced a joint statement. Implementation starts in July.",
                "2024-06-05"),
    ]
    index = {
        "Global summit": ["sv1"],
        "What will the summit decide?": ["sv2"],
        "What impact will the summit have?": ["sv2"],
    }
    ctx = make_ctx(
        tmp_path / "d", DAY,
        articles=articles, index=index,
        script={"candidate_questions": scripted},
    )
    bench.ingest_topics(ctx, "en-news", DAY, [("Global summit", "Leaders meet")])
    from openep.domain import HotTopic

    topic = ctx.store.all("topics", HotTopic)[0]
    topic = bench.enrich_background(ctx, topic)
    topic = bench.check_topic_validity(ctx, topic)
    for q in bench.generate_candidate_questions(ctx, topic):
        bench.run_principle_checklist(ctx, q)
    return ctx


def client_for(ctx, today=DAY):
    app = create_app(ctx.store, ctx.config, today=today)
    return TestClient(app)


def test_review_queue_lists_candidates(world):
    client = client_for(world)
    got = client.get("/api/review/questions", params={"date": DAY})
    assert got.status_code == 200
    items = got.json()
    assert len(items) == 2
    assert all(item["question"]["status"] == "candidate" for item in items)
    assert all(len(item["checklist"]["verdicts"]) == 6 for item in items)


def test_verdict_accept_then_conflict(world):
    client = client_for(world)
    queue = client.get("/api/review/questions").json()
    qid = queue[0]["question"]["id"]
    first = client.post(
        f"/api/review/questions/{qid}/verdict",
        json={"verdict": "accept", "editor": "annotator-1"},
    )
    assert first.status_code == 200
    assert first.json()["status"] == "accepted"
    second = client.post(
        f"/api/review/questions/{qid}/verdict",
        json={"verdict": "reject", "principle": "specificity", "editor": "annotator-2"},
    )
    assert second.status_code == 409
    assert second.json()["error"] == "conflict"
    assert world.store.get("questions", qid, PredictiveQuestion).status == "accepted"


def test_verdict_reject_requires_known_question(world):
    client = client_for(world)
    got = client.post("/api/review/questions/ghost/verdict", json={"verdict": "reject"})
    assert got.status_code == 404


def test_verdict_validates_body(world):
    client = client_for(world)
    queue = client.get("/api/review/questions").json()
    qid = queue[0]["question"]["id"]
    got = client.post(f"/api/review/questions/{qid}/verdict", json={"verdict": "maybe"})
    assert got.status_code == 422


def accepted_closed_world(world):
    client = client_for(world)
    queue = client.get("/api/review/questions").json()
    for item in queue:
        client.post(
            f"/api/review/questions/{item['question']['id']}/verdict",
            json={"verdict": "accept", "editor": "a"},
        )
    # window closes; collect + rerank so candidates exist
    close_ctx = make_ctx(
        world.store.root, "2024-06-16",
        articles=list(world.searcher.inner.articles.values()),
        index=world.searcher.inner.index,
        store=world.store,
    )
    for q in world.store.all("questions", PredictiveQuestion):
        if q.status == QuestionStatus.ACCEPTED.value:
            arts = bench.collect_outcome_news(close_ctx, q)
            bench.rerank_outcome_news(close_ctx, q, arts)
    return client_for(world, today="2024-06-16")


def test_outcome_review_shows_reranked_candidates(world):
    client = accepted_closed_world(world)
    got = client.get("/api/review/outcomes", params={"date": DAY})
    assert got.status_code == 200
    items = got.json()
    assert len(items) == 2
    assert all(item["candidates"] for item in items)


def test_article_fetch_and_span_submission(world):
    client = accepted_closed_world(world)
    items = client.get("/api/review/outcomes").json()
    qid = items[0]["question"]["id"]
    article_id = items[0]["candidates"][0]["article_id"]
    body = client.get(f"/api/articles/{article_id}").json()["body"]
    start, end = 0, body.find(".") + 1
    selected = body[start:end]
    got = client.post(
        f"/api/outcomes/{qid}/segments",
        json={
            "aspects": [
                {"article_id": article_id, "start": start, "end": end, "text": selected}
            ],
            "editor": "annotator-1",
        },
    )
    assert got.status_code == 200
    outcome = got.json()
    assert outcome["aspects"][0]["text"] == selected
    assert world.store.get("questions", qid, PredictiveQuestion).status == "outcome-recorded"


def test_two_span_submission_round_trip(world):
    client = accepted_closed_world(world)
    items = client.get("/api/review/outcomes").json()
    qid = items[0]["question"]["id"]
    article_id = items[0]["candidates"][0]["article_id"]
    body = client.get(f"/api/articles/{article_id}").json()["body"]
    first_end = body.find(".") + 1
    second_start = first_end + 1
    spans = [(0, first_end), (second_start, len(body))]
    got = client.post(
        f"/api/outcomes/{qid}/segments",
        json={
            "aspects": [
                {"article_id": article_id, "start": s, "end": e, "text": body[s:e]}
                for s, e in spans
            ],
            "editor": "annotator-1",
        },
    )
    assert got.status_code == 200
    texts = [a["text"] for a in got.json()["aspects"]]
    assert texts == [body[s:e] for s, e in spans]


def test_bad_span_is_422(world):
    client = accepted_closed_world(world)
    items = client.get("/api/review/outcomes").json()
    qid = items[0]["question"]["id"]
    article_id = items[0]["candidates"][0]["article_id"]
    got = client.post(
        f"/api/outcomes/{qid}/segments",
        json={"aspects": [{"article_id": article_id, "start": 5, "end": 99999}]},
    )
    assert got.status_code == 422


def test_mismatched_text_is_422(world):
    client = accepted_closed_world(world)
    items = client.get("/api/review/outcomes").json()
    qid = items[0]["question"]["id"]
    article_id = items[0]["candidates"][0]["article_id"]
    got = client.post(
        f"/api/outcomes/{qid}/segments",
        json={
            "aspects": [
                {"article_id": article_id, "start": 0, "end": 10, "text": "not the article"}
            ]
        },
    )
    assert got.status_code == 422


def test_no_outcome_flow_and_conflict(world):
    client = accepted_closed_world(world)
    items = client.get("/api/review/outcomes").json()
    qid = items[0]["question"]["id"]
    got = client.post(f"/api/outcomes/{qid}/no-outcome", json={"editor": "a"})
    assert got.status_code == 200
    assert got.json()["status"] == "no-outcome"
    # recording an outcome afterwards conflicts (no legal transition)
    article_id = items[0]["candidates"][0]["article_id"]
    body = world.store.get("articles", article_id, type(article("x", "t", "b", None))).body
    second = client.post(
        f"/api/outcomes/{qid}/segments",
        json={"aspects": [{"article_id": article_id, "start": 0, "end": 5,
                           "text": body[0:5]}]},
    )
    assert second.status_code == 409


def test_runs_listing_and_report(world):
    queue = bench.review_queue(world)
    for q in queue:
        bench.record_review_verdict(world, q.id, "accept")
    manifest = harness.run_pipeline(
        world,
        [q for q in world.store.all("questions", PredictiveQuestion)
         if q.status == "accepted"],
        "stkfep",
    )
    client = client_for(world)
    runs = client.get("/api/runs").json()
    assert [r["run_id"] for r in runs] == [manifest.run_id]
    missing = client.get(f"/api/runs/{manifest.run_id}/report")
    assert missing.status_code == 404


def test_shared_token_auth(world, monkeypatch):
    monkeypatch.setenv(world.config.auth_token_env, "sekrit")
    client = client_for(world)
    denied = client.get("/api/runs")
    assert denied.status_code == 401
    allowed = client.get("/api/runs", headers={"Authorization": "Bearer sekrit"})
    assert allowed.status_code == 200
