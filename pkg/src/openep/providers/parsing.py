"""Parsers for model responses. Lenient where the pipeline has a documented
fallback, strict nowhere: unparseable content is reported, never guessed."""

from __future__ import annotations

import re
from typing import Optional

_SCORE_RE = re.compile(r"SCORE\s*[:=]\s*([0-9]+(?:\.[0-9]+)?)", re.IGNORECASE)
_PROB_RE = re.compile(r"PROB(?:ABILITY)?\s*[:=]\s*([0-9]*\.?[0-9]+)", re.IGNORECASE)
_PROBS_RE = re.compile(r"PROBS\s*[:=]\s*([0-9. \t]+)", re.IGNORECASE)
_FINAL_RE = re.compile(r"FINAL\s*[:=]\s*(.+)", re.IGNORECASE)
_STANCE_RE = re.compile(r"STANCE\s*(\d+)\s*[:=]\s*(.+)", re.IGNORECASE)
_BULLET_RE = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s*")


class ParseError(ValueError):
    pass


def parse_score(text: str, low: int = 1, high: int = 5) -> int:
    """Extract an integer score in [low, high]; raises ParseError otherwise."""
    m = _SCORE_RE.search(text)
    if m is None:
        m = re.search(r"\b([0-9]+)\b", text)
    if m is None:
        raise ParseError(f"no score in {text!r}")
    value = float(m.group(1))
    if value != int(value) or not low <= int(value) <= high:
        raise ParseError(f"score {value} outside [{low}, {high}]")
    return int(value)


def parse_probability(text: str) -> float:
    m = _PROB_RE.search(text)
    if m is None:
        raise ParseError(f"no probability in {text!r}")
    return float(m.group(1))


def parse_prob_vector(text: str, count: int) -> list[float]:
    m = _PROBS_RE.search(text)
    if m is None:
        raise ParseError(f"no probability vector in {text!r}")
    values = [float(tok) for tok in m.group(1).split()]
    if len(values) != count:
        raise ParseError(f"expected {count} probabilities, got {len(values)}")
    return values


def parse_lines(text: str) -> list[str]:
    """Non-empty lines with bullets/numbering stripped."""
    out = []
    for line in text.splitlines():
        cleaned = _BULLET_RE.sub("", line).strip()
        if cleaned:
            out.append(cleaned)
    return out


def parse_verdict(text: str, options: tuple[str, ...]) -> str:
    """First matching option token (word-boundary, case-insensitive)."""
    upper = text.upper()
    hits = []
    for opt in options:
        m = re.search(rf"\b{re.escape(opt.upper())}\b", upper)
        if m:
            hits.append((m.start(), opt))
    if not hits:
        raise ParseError(f"none of {options} in {text!r}")
    return min(hits)[1]


def parse_categorized_lines(text: str, categories: set[str]) -> list[tuple[str, str]]:
    """Parse 'category: text' lines, keeping only known category tokens."""
    pairs = []
    for line in parse_lines(text):
        if ":" not in line:
            continue
        head, _, rest = line.partition(":")
        token = head.strip().lower()
        body = rest.strip()
        if token and body:
            pairs.append((token, body))
    return [(c, t) for c, t in pairs if c in categories]


def parse_final_and_stances(text: str) -> tuple[str, dict[int, str]]:
    final: Optional[str] = None
    stances: dict[int, str] = {}
    for line in text.splitlines():
        m = _FINAL_RE.match(line.strip())
        if m and final is None:
            final = m.group(1).strip()
            continue
        m = _STANCE_RE.match(line.strip())
        if m:
            stances[int(m.group(1))] = m.group(2).strip()
    if final is None:
        raise ParseError(f"no FINAL line in {text!r}")
    return final, stances
