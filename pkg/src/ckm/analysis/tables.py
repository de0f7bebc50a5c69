"""Crosstab, quadrant, and per-window tables over evaluated hypotheses.

All tables are pure functions of their record sets: results are independent
of record order, and median splits send elements equal to the median to the
"low" side.
"""

from __future__ import annotations

import csv
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

MIN_TRIGGER_N = 9


@dataclass(frozen=True)
class HypothesisOutcome:
    """The analysis-facing view of one evaluated hypothesis."""

    topic: str
    is_hit: bool
    trigger: Optional[str] = None
    drift: Optional[float] = None
    novelty: Optional[float] = None
    best_match: Optional[float] = None
    window_label: Optional[str] = None

    @classmethod
    def from_dict(cls, d: dict) -> "HypothesisOutcome":
        return cls(
            topic=d["topic"], is_hit=bool(d["is_hit"]),
            trigger=d.get("trigger"), drift=d.get("drift"),
            novelty=d.get("novelty"), best_match=d.get("best_match"),
            window_label=d.get("window_label"),
        )


def _hit_rate(records) -> float:
    records = list(records)
    return 100.0 * sum(1 for r in records if r.is_hit) / len(records) if records else 0.0


@dataclass(frozen=True)
class CrosstabRow:
    trigger: str
    low_n: int
    low_hit_rate: float
    high_n: int
    high_hit_rate: float


@dataclass(frozen=True)
class CrosstabResult:
    median_drift: float
    rows: tuple
    reported_n: int
    low_hits: int
    high_hits: int


def crosstab_trigger_drift(records, min_n: int = MIN_TRIGGER_N) -> CrosstabResult:
    """Trigger x drift-side table, split at the median of per-topic drifts.

    Only trigger labels with total n >= min_n are reported. Topics whose
    drift equals the median land on the low side.
    """
    records = [r for r in records if r.trigger and r.drift is not None]
    if not records:
        return CrosstabResult(0.0, (), 0, 0, 0)
    topic_drift = {}
    for r in records:
        prev = topic_drift.setdefault(r.topic, r.drift)
        if prev != r.drift:
            raise ValueError(f"inconsistent drift for topic {r.topic!r}")
    median = statistics.median(topic_drift.values())

    by_trigger: dict[str, list] = {}
    for r in records:
        by_trigger.setdefault(r.trigger, []).append(r)

    rows = []
    reported = 0
    low_hits = high_hits = 0
    for trigger in sorted(by_trigger):
        group = by_trigger[trigger]
        if len(group) < min_n:
            continue
        low = [r for r in group if r.drift <= median]
        high = [r for r in group if r.drift > median]
        rows.append(CrosstabRow(
            trigger=trigger,
            low_n=len(low), low_hit_rate=_hit_rate(low),
            high_n=len(high), high_hit_rate=_hit_rate(high),
        ))
        reported += len(group)
        low_hits += sum(1 for r in low if r.is_hit)
        high_hits += sum(1 for r in high if r.is_hit)
    return CrosstabResult(median_drift=median, rows=tuple(rows),
                          reported_n=reported, low_hits=low_hits,
                          high_hits=high_hits)


QUADRANT_KEYS = (
    "low_novelty_low_alignment",
    "low_novelty_high_alignment",
    "high_novelty_low_alignment",
    "high_novelty_high_alignment",
)


def quadrant_analysis(records) -> dict:
    """Median-split cells over (novelty, best match) with per-cell hit rates.

    Returns {"median_novelty", "median_best_match", "cells": {key: {n,
    hit_rate, drift_mean}}}.
    """
    records = [r for r in records
               if r.novelty is not None and r.best_match is not None]
    if not records:
        raise ValueError("quadrant analysis requires novelty and best match")
    med_nov = statistics.median(r.novelty for r in records)
    med_align = statistics.median(r.best_match for r in records)
    cells = {key: [] for key in QUADRANT_KEYS}
    for r in records:
        nov = "low" if r.novelty <= med_nov else "high"
        align = "low" if r.best_match <= med_align else "high"
        cells[f"{nov}_novelty_{align}_alignment"].append(r)
    out = {}
    for key, group in cells.items():
        drifts = [r.drift for r in group if r.drift is not None]
        out[key] = {
            "n": len(group),
            "hit_rate": _hit_rate(group),
            "drift_mean": sum(drifts) / len(drifts) if drifts else None,
        }
    return {"median_novelty": med_nov, "median_best_match": med_align,
            "cells": out}


def window_dynamics(records) -> list[dict]:
    """Per-window (n, mean novelty, hits, hit rate), keyed by window label."""
    groups: dict[str, list] = {}
    for r in records:
        if r.window_label:
            groups.setdefault(r.window_label, []).append(r)
    rows = []
    for label in sorted(groups):
        group = groups[label]
        novelty = [r.novelty for r in group if r.novelty is not None]
        rows.append({
            "window": label,
            "n": len(group),
            "novelty_mean": sum(novelty) / len(novelty) if novelty else None,
            "hits": sum(1 for r in group if r.is_hit),
            "hit_rate": _hit_rate(group),
        })
    return rows


def _write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_crosstab_csv(results: dict, path) -> Path:
    """results: variant name -> CrosstabResult."""
    rows = []
    for variant in sorted(results):
        res = results[variant]
        for row in res.rows:
            rows.append([
                variant, row.trigger, round(res.median_drift, 6),
                row.low_n, round(row.low_hit_rate, 1),
                row.high_n, round(row.high_hit_rate, 1),
            ])
    return _write_csv(path, ["variant", "trigger", "median_drift",
                             "low_n", "low_hit_pct", "high_n", "high_hit_pct"],
                      rows)


def write_quadrants_csv(results: dict, path) -> Path:
    rows = []
    for variant in sorted(results):
        res = results[variant]
        for key in QUADRANT_KEYS:
            cell = res["cells"][key]
            rows.append([
                variant, key, cell["n"], round(cell["hit_rate"], 1),
                "" if cell["drift_mean"] is None else round(cell["drift_mean"], 3),
            ])
    return _write_csv(path, ["variant", "quadrant", "n", "hit_pct", "drift_mean"],
                      rows)


def write_windows_csv(results: dict, path) -> Path:
    rows = []
    for variant in sorted(results):
        for row in results[variant]:
            rows.append([
                variant, row["window"], row["n"],
                "" if row["novelty_mean"] is None else round(row["novelty_mean"], 2),
                row["hits"], round(row["hit_rate"], 1),
            ])
    return _write_csv(path, ["variant", "window", "n", "novelty_mean",
                             "hits", "hit_pct"], rows)


def write_trajectories_csv(rows, path) -> Path:
    """rows: (variant, topic, window label, x, y, drift)."""
    return _write_csv(
        path, ["variant", "topic", "window", "x", "y", "drift"],
        [[v, t, w, round(x, 6), round(y, 6), round(d, 6)]
         for v, t, w, x, y, d in rows])
