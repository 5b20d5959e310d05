"""Provider contracts: mocks, transcript recording, replay, leakage guard."""

from __future__ import annotations

import random

import pytest

from openep.domain import NewsArticle
from openep.providers import (
    GenerationRequest,
    MockEmbeddingProvider,
    MockGenerationProvider,
    MockSearchProvider,
    ProviderTranscript,
    RecordedGeneration,
    RecordedSearch,
    ReplayGenerationProvider,
    ReplayMissError,
    ReplaySearchProvider,
    SearchRequest,
    TransportError,
    with_retry,
)
from openep.providers.templates import PromptLibrary, TemplateError

from conftest import article


def test_mock_echo_contract():
    gen = MockGenerationProvider()
    assert gen.generate(GenerationRequest("echo", {"x": "abc"})) == "abc"


def test_mock_generate_deterministic():
    gen = MockGenerationProvider(seed=5)
    req = GenerationRequest("judge_scaled", {
        "dimension": "relevance", "question": "Q", "prediction": "P", "outcome": "O",
    })
    assert gen.generate(req) == gen.generate(req)
    fresh = MockGenerationProvider(seed=5)
    assert fresh.generate(req) == gen.generate(req)


def test_mock_sampled_mode_varies():
    gen = MockGenerationProvider(seed=5)
    req = GenerationRequest("unregistered_template", {"x": "1"}, mode="sampled")
    assert gen.generate(req) != gen.generate(req)


def test_template_placeholder_must_be_bound():
    gen = MockGenerationProvider()
    with pytest.raises(TemplateError):
        gen.generate(GenerationRequest("echo", {}))


def test_transcript_grows_one_entry_per_call():
    transcript = ProviderTranscript()
    gen = RecordedGeneration(MockGenerationProvider(), transcript)
    for i in range(5):
        gen.generate(GenerationRequest("echo", {"x": str(i)}))
        assert len(transcript) == i + 1


def test_scripted_overrides_and_callables():
    gen = MockGenerationProvider(script={
        "topic_validity": "INVALID: resurfaced old event",
        "echo": lambda v: v["x"].upper(),
    })
    out = gen.generate(GenerationRequest("topic_validity", {"title": "t", "background": "b"}))
    assert out.startswith("INVALID")
    assert gen.generate(GenerationRequest("echo", {"x": "abc"})) == "ABC"


# -- search -----------------------------------------------------------------------


def corpus_ten():
    return [
        article(f"a{i}", f"Event {i} report", f"Body of report {i} about the event.",
                f"2024-06-{i + 1:02d}")
        for i in range(10)
    ]


def test_search_leakage_cutoff():
    provider = MockSearchProvider(corpus_ten(), {"event": [f"a{i}" for i in range(10)]})
    got = provider.search(SearchRequest("event", not_after="2024-06-05", max_results=20))
    assert got
    assert all(a.published_at <= "2024-06-05" for a in got)


def test_search_max_results():
    provider = MockSearchProvider(corpus_ten(), {"event": [f"a{i}" for i in range(10)]})
    got = provider.search(SearchRequest("event", max_results=3))
    assert len(got) == 3


def test_search_dedups_by_url():
    twin_a = article("x1", "Same story", "Body one.", "2024-06-01", url="https://dup")
    twin_b = article("x2", "Same story again", "Body two.", "2024-06-02", url="https://dup")
    provider = MockSearchProvider([twin_a, twin_b], {"same": ["x1", "x2"]})
    got = provider.search(SearchRequest("same", max_results=10))
    assert len(got) == 1
    assert got[0].id == "x1"


def test_search_unknown_date_excluded_under_cutoff():
    undated = article("u1", "Undated story", "No date given.", None)
    dated = article("d1", "Dated story", "Has a date.", "2024-06-01")
    provider = MockSearchProvider([undated, dated], {"story": ["u1", "d1"]})
    got = provider.search(SearchRequest("story", not_after="2024-06-10"))
    assert [a.id for a in got] == ["d1"]
    got_all = provider.search(SearchRequest("story"))
    assert {a.id for a in got_all} == {"u1", "d1"}


def test_search_window_bounds():
    provider = MockSearchProvider(corpus_ten(), {"event": [f"a{i}" for i in range(10)]})
    got = provider.search(
        SearchRequest("event", not_before="2024-06-03", not_after="2024-06-05", max_results=20)
    )
    assert [a.published_at for a in got] == ["2024-06-03", "2024-06-04", "2024-06-05"]


def test_search_request_validates_bounds():
    with pytest.raises(ValueError):
        SearchRequest("q", not_before="2024-06-10", not_after="2024-06-01")
    with pytest.raises(ValueError):
        SearchRequest("")


# -- embedding ---------------------------------------------------------------------


def test_embed_equal_texts_equal_vectors():
    embed = MockEmbeddingProvider()
    a, b = embed.embed(["a", "a"])
    assert a == b


def test_embed_distinct_texts_differ():
    embed = MockEmbeddingProvider()
    a, b = embed.embed(["a", "b"])
    assert a != b


def test_embed_dimension_uniform_over_many_strings():
    embed = MockEmbeddingProvider(dim=24)
    rng = random.Random(0)
    texts = ["".join(rng.choices("abcdefg ", k=12)).strip() or "x" for _ in range(100)]
    vectors = embed.embed(texts)
    assert {len(v) for v in vectors} == {24}


def test_embed_rejects_empty_string():
    embed = MockEmbeddingProvider()
    with pytest.raises(ValueError):
        embed.embed(["ok", ""])


# -- replay -----------------------------------------------------------------------


def test_replay_returns_recorded_responses():
    transcript = ProviderTranscript()
    gen = RecordedGeneration(MockGenerationProvider(), transcript)
    reqs = [GenerationRequest("echo", {"x": str(i)}) for i in range(3)]
    originals = [gen.generate(r) for r in reqs]
    replay = ReplayGenerationProvider(transcript)
    assert [replay.generate(r) for r in reqs] == originals


def test_replay_miss_is_an_error():
    transcript = ProviderTranscript()
    gen = RecordedGeneration(MockGenerationProvider(), transcript)
    gen.generate(GenerationRequest("echo", {"x": "recorded"}))
    replay = ReplayGenerationProvider(transcript)
    with pytest.raises(ReplayMissError):
        replay.generate(GenerationRequest("echo", {"x": "altered"}))


def test_replay_search_roundtrips_articles():
    transcript = ProviderTranscript()
    searcher = RecordedSearch(
        MockSearchProvider(corpus_ten(), {"event": ["a0", "a1"]}), transcript
    )
    req = SearchRequest("event", max_results=5)
    original = searcher.search(req)
    replayed = ReplaySearchProvider(transcript).search(req)
    assert [a.to_dict() for a in replayed] == [a.to_dict() for a in original]


def test_transcript_rows_roundtrip():
    transcript = ProviderTranscript()
    gen = RecordedGeneration(MockGenerationProvider(), transcript)
    gen.generate(GenerationRequest("echo", {"x": "42"}))
    rows = transcript.to_rows()
    back = ProviderTranscript.from_rows(rows)
    assert ReplayGenerationProvider(back).generate(
        GenerationRequest("echo", {"x": "42"})
    ) == "42"


def test_with_retry_retries_transport_errors():
    calls = {"n": 0}

    def flaky():
        calls["n"] += 1
        if calls["n"] < 3:
            raise TransportError("oops")
        return "done"

    assert with_retry(flaky, attempts=3, sleep=lambda _: None) == "done"
    assert calls["n"] == 3

    def hopeless():
        raise TransportError("always")

    with pytest.raises(TransportError):
        with_retry(hopeless, attempts=2, sleep=lambda _: None)


# -- leakage property over randomized corpora -------------------------------------


def test_leakage_guard_randomized_corpora():
    rng = random.Random(1234)
    for _ in range(100):
        n = rng.randint(3, 12)
        cutoff_day = rng.randint(5, 20)
        cutoff = f"2024-06-{cutoff_day:02d}"
        articles = []
        for i in range(n):
            day = rng.randint(1, 28)
            has_date = rng.random() > 0.2
            articles.append(
                article(
                    f"r{i}", f"Story {i} about topic", f"Topic body {i}.",
                    f"2024-06-{day:02d}" if has_date else None,
                )
            )
        provider = MockSearchProvider(articles, {"topic": [a.id for a in articles]})
        got = provider.search(SearchRequest("topic", not_after=cutoff, max_results=50))
        for a in got:
            assert a.published_at is not None
            assert a.published_at <= cutoff
