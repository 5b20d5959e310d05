"""Shared fixtures: mock worlds, context builders, and the visa scenario."""

from __future__ import annotations

from pathlib import Path

import pytest

from openep.config import OpenEPConfig
from openep.domain import NewsArticle, PredictiveQuestion, QuestionStatus
from openep.providers import (
    MockEmbeddingProvider,
    MockGenerationProvider,
    MockSearchProvider,
    PromptLibrary,
    ProviderTranscript,
    RecordedEmbedding,
    RecordedGeneration,
    RecordedSearch,
)
from openep.runtime import PipelineContext
from openep.storage import Store
from openep.util import parse_date


def make_config(data_dir: Path, **overrides) -> OpenEPConfig:
    config = OpenEPConfig(data_dir=str(data_dir), concurrency=1)
    for key, value in overrides.items():
        setattr(config, key, value)
    return config


def make_ctx(
    data_dir: Path,
    today: str,
    articles: list[NewsArticle] | None = None,
    index: dict[str, list[str]] | None = None,
    script: dict | None = None,
    missing_cutoffs: set[str] | None = None,
    store: Store | None = None,
    **config_overrides,
) -> PipelineContext:
    """Context wired to in-process mocks, one shared transcript."""
    config = make_config(data_dir, **config_overrides)
    store = store or Store(data_dir)
    transcript = ProviderTranscript()
    library = PromptLibrary()
    gen = RecordedGeneration(
        MockGenerationProvider(seed=config.seed, script=script, library=library),
        transcript,
    )
    search = RecordedSearch(
        MockSearchProvider(articles or [], index, missing_cutoffs), transcript
    )
    embed = RecordedEmbedding(MockEmbeddingProvider(seed=config.seed), transcript)
    return PipelineContext(
        store=store,
        config=config,
        gen=gen,
        searcher=search,
        embedder=embed,
        transcript=transcript,
        library=library,
        today=parse_date(today),
    )


def article(
    article_id: str,
    title: str,
    body: str,
    published_at: str | None,
    url: str | None = None,
) -> NewsArticle:
    return NewsArticle(
        id=article_id,
        url=url or f"https://news.example/{article_id}",
        title=title,
        body=body,
        published_at=published_at,
        retrieved_at="",
        retrieval_query="",
    )


def question(
    question_id: str,
    text: str,
    category: str,
    created_at: str = "2024-06-01",
    status: str = QuestionStatus.ACCEPTED.value,
    background: str = "Background on the visa policy developments.",
    window_days: int = 15,
) -> PredictiveQuestion:
    return PredictiveQuestion(
        id=question_id,
        topic_id="topic-000001",
        text=text,
        created_at=created_at,
        background=background,
        category=category,
        window_days=window_days,
        status=status,
    )


# -- the visa scenario: five questions, scripted expansion, layered corpus ------

VISA_CREATED = "2024-06-01"

VISA_QUESTIONS = [
    ("q-vis-1", "Which country will China grant a visa exemption to next?", "outcome"),
    ("q-vis-2", "When will the next visa exemption agreement be signed?", "time"),
    ("q-vis-3", "Where will the signing ceremony take place?", "location"),
    ("q-vis-4", "What impact will a new visa exemption have on tourism?", "impact"),
    ("q-vis-5", "How will the visa policy develop over the coming days?", "development"),
]


def visa_articles() -> list[NewsArticle]:
    return [
        article(
            "art-poland",
            "Poland president announces visit to China",
            "The President of Poland announced an upcoming visit to China. "
            "Officials in Warsaw said visa policy is on the agenda.",
            "2024-05-28",
        ),
        article(
            "art-talks",
            "China and Poland begin consular talks",
            "China opened consular talks with Poland last week. "
            "Diplomats discussed travel rules and trade.",
            "2024-05-30",
        ),
        article(
            "art-thailand",
            "China visits Thailand and signs a mutual exemption agreement",
            "China visited Thailand and signed a mutual visa exemption agreement. "
            "The deal followed months of talks about tourism.",
            "2024-03-10",
        ),
        article(
            "art-outcome",
            "China grants Poland visa-free entry",
            "China granted Poland a visa exemption agreement on June 8. "
            "The announcement followed the presidential visit.",
            "2024-06-08",
        ),
        article(
            "art-leak",
            "Poland exemption takes effect",
            "The Poland visa exemption took effect two weeks after signing. "
            "Tour operators reported a booking surge.",
            "2024-06-20",
        ),
        article(
            "art-late",
            "Quarterly travel statistics released",
            "Travel statistics for the quarter were released, long after the window. "
            "Numbers covered the whole summer.",
            "2024-07-10",
        ),
    ]


def visa_index() -> dict[str, list[str]]:
    index: dict[str, list[str]] = {}
    for qid, text, _ in VISA_QUESTIONS:
        index[text] = ["art-poland", "art-outcome", "art-leak"]
        index[f"{text} China"] = ["art-talks", "art-poland"]
    index["general visa exemption coverage"] = ["art-poland"]
    index["country grants visa exemption precedent"] = ["art-thailand"]
    index["China visits Thailand and signs a mutual exemption agreement outcome"] = [
        "art-thailand"
    ]
    index["China visits Thailand and signs a mutual exemption agreement aftermath"] = []
    return index


def visa_script() -> dict:
    """Pin the query-producing templates so the corpus index stays exact.

    Expansion is stakeholder-sensitive on purpose: without stakeholders the
    query reaches a strictly smaller slice of the corpus, so ablations change
    retrieval content, not just record flags.
    """
    return {
        "expand_relevant_queries": lambda v: (
            f"{v['question']} China" if v["stakeholders"] else "general visa exemption coverage"
        ),
        "abstract_role": "country",
        "expand_similar_queries": "country grants visa exemption precedent",
    }


def seed_visa_store(data_dir: Path) -> Store:
    store = Store(data_dir)
    for qid, text, category in VISA_QUESTIONS:
        store.add("questions", question(qid, text, category))
    return store


def visa_ctx(data_dir: Path, today: str = VISA_CREATED, store: Store | None = None, **overrides):
    store = store or seed_visa_store(data_dir)
    return make_ctx(
        data_dir,
        today,
        articles=visa_articles(),
        index=visa_index(),
        script=visa_script(),
        store=store,
        **overrides,
    )


@pytest.fixture
def tmp_store(tmp_path) -> Store:
    return Store(tmp_path / "data")


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(name): acceptance criterion with a printed verdict line"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call":
        return
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    status = "PASS" if report.passed else "FAIL"
    terminal = item.config.pluginmanager.get_plugin("terminalreporter")
    if terminal is not None:
        terminal.write_line(f"[{status}] {marker.args[0]}")
