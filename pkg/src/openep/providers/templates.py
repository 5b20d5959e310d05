"""Prompt template registry.

Templates are plain ``str.format`` strings keyed by id. The built-in set is
English; per-language overrides load from a YAML resource mapping template id
to text. Rendering fails fast when a placeholder has no bound variable.
"""

from __future__ import annotations

import string
from pathlib import Path
from typing import Optional

import yaml

DEFAULT_TEMPLATES: dict[str, str] = {
    "echo": "{x}",
    "enrich_background": (
        "Rewrite a fuller background for the topic below using the retrieved "
        "coverage.\nTopic: {title}\nCurrent background: {raw_background}\n"
        "Related coverage:\n{articles}"
    ),
    "topic_validity": (
        "Decide whether this topic describes a real, still-unfolding event "
        "suitable for forward-looking questions. Answer VALID or INVALID with "
        "a reason.\nTopic: {title}\nBackground: {background}"
    ),
    "candidate_questions": (
        "Write forward-looking questions about this topic, one per line as "
        "'category: question', using categories {categories}.\n"
        "Topic: {title}\nBackground: {background}"
    ),
    "principle_check": (
        "Check the question against the {principle} principle. Answer PASS, "
        "FAIL, or UNSURE with a rationale.\nQuestion: {question}\n"
        "Background: {background}"
    ),
    "rerank_outcome": (
        "Score 1-5 how likely this article reports the actual outcome of the "
        "question. Answer 'SCORE: n'.\nQuestion: {question}\n"
        "Article: {title}\n{body}"
    ),
    "relevance": (
        "Score 1-5 how relevant this article is to the question. Answer "
        "'SCORE: n'.\nQuestion: {question}\nArticle: {title}\n{body}"
    ),
    "relevance_similar": (
        "Score 1-5 how useful this article is as a historical analogue for "
        "the question, given the stakeholder roles {roles}. Answer "
        "'SCORE: n'.\nQuestion: {question}\nArticle: {title}\n{body}"
    ),
    "extract_stakeholders_article": (
        "List the salient entities driving this event, one per line.\n"
        "Question: {question}\nArticle: {title}\n{body}"
    ),
    "extract_stakeholders_question": (
        "List the salient entities driving this event, one per line.\n"
        "Question: {question}\nBackground: {background}"
    ),
    "expand_relevant_queries": (
        "Generate up to {limit} search queries that gather more information "
        "about the question, one per line, using the stakeholders.\n"
        "Question: {question}\nBackground: {background}\n"
        "Stakeholders: {stakeholders}"
    ),
    "abstract_role": (
        "Give the abstract role (such as country, government officials, "
        "company) for this entity. Answer with the role only.\n"
        "Entity: {name}"
    ),
    "expand_similar_queries": (
        "Generate up to {limit} search queries for historical events "
        "analogous to the question, using the stakeholder roles instead of "
        "the concrete entities, one per line.\nQuestion: {question}\n"
        "Background: {background}\nRoles: {roles}"
    ),
    "similar_followup_queries": (
        "Generate follow-up search queries, one per line, that expand what "
        "is known about this past event.\nEvent: {title}\n{body}"
    ),
    "extract_segments_relevant": (
        "Extract verbatim text segments from the article that carry "
        "information useful for answering the question, one per line.\n"
        "Question: {question}\nArticle: {title}\n{body}"
    ),
    "extract_segments_similar": (
        "Extract verbatim text segments describing the outcome and causes of "
        "this past event, one per line.\nQuestion: {question}\n"
        "Article: {title}\n{body}"
    ),
    "describe_cluster_relevant": (
        "Describe in one passage the information these related segments "
        "contribute to the question.\nQuestion: {question}\n"
        "Segments:\n{members}"
    ),
    "describe_cluster_similar": (
        "Describe in one passage the outcome and causes these related "
        "segments report.\nQuestion: {question}\nSegments:\n{members}"
    ),
    "summ": "Summarize the article.\nTitle: {title}\n{body}",
    "summ_reduce": "Write one brief description of all these summaries.\n{summaries}",
    "propose_candidate": (
        "Propose an answer to the question supported by this evidence.\n"
        "Question: {question}\nEvidence ({branch}): {description}"
    ),
    "aggregate_answers": (
        "Compare the candidate answers, note how each differs, and give the "
        "final answer. Reply with 'FINAL: ...' then one 'STANCE i: ...' line "
        "per candidate.\nQuestion: {question}\nCandidates:\n{candidates}"
    ),
    "predict_time": (
        "Pick the period in which the event will resolve. Give a probability "
        "for every option as 'PROBS: p1 p2 ...' in option order.\n"
        "Question: {question}\nBackground: {background}\nEvidence: {evidence}\n"
        "Options:\n{options}"
    ),
    "judge_accuracy_aspect": (
        "Does the prediction hit this aspect of the actual outcome? Answer "
        "HIT or MISS.\nQuestion: {question}\nPrediction: {prediction}\n"
        "Outcome aspect: {aspect}"
    ),
    "judge_scaled": (
        "Rate the prediction's {dimension} against the actual outcome on a "
        "1-5 scale and state your confidence. Answer 'SCORE: n' and "
        "'PROB: p'.\nQuestion: {question}\nPrediction: {prediction}\n"
        "Outcome: {outcome}"
    ),
    "validity_classify": (
        "As of {created_at}, will this question have a discoverable answer "
        "within {window_days} days? Answer ANSWERABLE or UNANSWERABLE.\n"
        "Question: {question}\nBackground: {background}"
    ),
}


class TemplateError(KeyError):
    pass


class PromptLibrary:
    def __init__(self, overrides: Optional[dict[str, str]] = None):
        self._templates = dict(DEFAULT_TEMPLATES)
        if overrides:
            self._templates.update(overrides)

    @classmethod
    def load(cls, path: Optional[str | Path]) -> "PromptLibrary":
        if path is None:
            return cls()
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        return cls({str(k): str(v) for k, v in raw.items()})

    def __contains__(self, template_id: str) -> bool:
        return template_id in self._templates

    def placeholders(self, template_id: str) -> set[str]:
        template = self._templates.get(template_id)
        if template is None:
            raise TemplateError(template_id)
        return {
            name
            for _, name, _, _ in string.Formatter().parse(template)
            if name is not None
        }

    def render(self, template_id: str, variables: dict[str, str]) -> str:
        template = self._templates.get(template_id)
        if template is None:
            raise TemplateError(template_id)
        missing = self.placeholders(template_id) - set(variables)
        if missing:
            raise TemplateError(
                f"template {template_id!r} missing variables: {sorted(missing)}"
            )
        return template.format(**variables)
