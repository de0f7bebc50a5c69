"""Loaders for the shipped benchmark fixtures (package data).

The fixtures encode published aggregate tables as per-hypothesis records so
the metric, table, and statistics code paths can be checked against frozen
expected values. Regenerate with tools/build_fixtures.py.
"""

from __future__ import annotations

import json
from importlib import resources

from .analysis.tables import HypothesisOutcome
from .evaluation import EvaluationRecord


def _read(name: str) -> str:
    return resources.files("ckm.data.fixtures").joinpath(name).read_text("utf-8")


def _jsonl(name: str) -> list[dict]:
    return [json.loads(line) for line in _read(name).splitlines() if line.strip()]


def headline_records() -> list[EvaluationRecord]:
    """863 evaluation records across 50 topics encoding headline metrics."""
    return [EvaluationRecord.from_dict(d) for d in _jsonl("headline_records.jsonl")]


def crosstab_records() -> list[HypothesisOutcome]:
    """Trigger x drift outcomes incl. one below-reporting-floor trigger."""
    return [HypothesisOutcome.from_dict(d) for d in _jsonl("crosstab_records.jsonl")]


def window_records() -> list[HypothesisOutcome]:
    """892 outcomes across six evolution windows."""
    return [HypothesisOutcome.from_dict(d) for d in _jsonl("window_records.jsonl")]


def quadrant_records() -> list[HypothesisOutcome]:
    """892 outcomes with engineered novelty/best-match medians."""
    return [HypothesisOutcome.from_dict(d) for d in _jsonl("quadrant_records.jsonl")]


def drift_hit_rate() -> dict:
    """50 per-topic (drift, hit rate) pairs with a frozen Spearman target."""
    return json.loads(_read("drift_hit_rate.json"))


def novelty_pairs() -> dict:
    """50 paired per-topic novelty means (lite vs full), strongly shifted."""
    return json.loads(_read("novelty_pairs.json"))


def embedding_space() -> dict:
    """Embedding cloud calibrated to frozen diversity/correlation targets."""
    return json.loads(_read("embedding_space.json"))


def token_ledger() -> dict:
    """One variant's token totals with hypothesis and unique-hit counts."""
    return json.loads(_read("token_ledger.json"))
