"""Paper stream primitives: papers, topic phase bounds, calendar windows.

Window boundaries are half-open ``[start, end)`` in UTC days. Window width is
measured in whole calendar months (a "2-month" window starting 2024-01-01
ends 2024-03-01, not 60 days later), so window labels line up with month
names. Papers with identical dates tie-break by id ascending.
"""

from __future__ import annotations

import calendar
import random
from dataclasses import dataclass, field, replace
from datetime import date
from typing import Optional

from .errors import ConfigError, LeakageError


@dataclass(frozen=True)
class Paper:
    """One time-stamped literature item.

    ``categories`` is ordered; the first entry is the primary category.
    ``full_text`` is absent when only the abstract was ingested.
    """

    id: str
    title: str
    abstract: str
    published_at: date
    categories: tuple[str, ...]
    full_text: Optional[str] = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("paper id must be non-empty")
        if not self.categories:
            raise ValueError(f"paper {self.id}: categories must be non-empty")
        if not isinstance(self.published_at, date):
            raise ValueError(f"paper {self.id}: published_at must be a date")

    @property
    def primary_category(self) -> str:
        return self.categories[0]

    def without_full_text(self) -> "Paper":
        return replace(self, full_text=None)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "abstract": self.abstract,
            "full_text": self.full_text,
            "published_at": self.published_at.isoformat(),
            "categories": list(self.categories),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Paper":
        return cls(
            id=d["id"],
            title=d["title"],
            abstract=d["abstract"],
            full_text=d.get("full_text"),
            published_at=date.fromisoformat(d["published_at"]),
            categories=tuple(d["categories"]),
        )


@dataclass(frozen=True)
class PhaseCaps:
    init: int = 48
    evolution: int = 96
    validation: int = 180

    def __post_init__(self):
        if min(self.init, self.evolution, self.validation) <= 0:
            raise ConfigError("phase caps must be positive")


@dataclass(frozen=True)
class TopicConfig:
    """Per-topic query string and the three temporal phase bounds.

    Initialization covers [t_init, t0), evolution [t0, tT) split into
    whole windows of ``window_months``, validation [tT, t_val_end).
    """

    topic: str
    t_init: date
    t0: date
    t_end: date
    t_val_end: date
    window_months: int = 2
    caps: PhaseCaps = field(default_factory=PhaseCaps)

    def __post_init__(self):
        if not self.topic:
            raise ConfigError("topic query must be non-empty")
        if not (self.t_init < self.t0 < self.t_end <= self.t_val_end):
            raise ConfigError(
                f"{self.topic}: phase bounds must satisfy "
                "t_init < t0 < t_end <= t_val_end"
            )
        if self.window_months <= 0:
            raise ConfigError(f"{self.topic}: window width must be positive")
        # Raises ConfigError when the width does not tile [t0, t_end).
        count_windows(self.t0, self.t_end, self.window_months)

    @property
    def window_count(self) -> int:
        return count_windows(self.t0, self.t_end, self.window_months)


@dataclass(frozen=True)
class Window:
    """One contiguous evolution slice. Papers satisfy start <= date < end."""

    index: int
    start: date
    end: date
    papers: tuple[Paper, ...] = ()

    @property
    def label(self) -> str:
        return f"{self.start.year:04d}-{self.start.month:02d}"


def add_months(d: date, months: int) -> date:
    """Advance a date by whole calendar months, clamping to month end."""
    m0 = d.year * 12 + (d.month - 1) + months
    year, month = divmod(m0, 12)
    month += 1
    day = min(d.day, calendar.monthrange(year, month)[1])
    return date(year, month, day)


def count_windows(t0: date, t_end: date, width_months: int) -> int:
    """Number of whole windows tiling [t0, t_end); ConfigError if uneven."""
    if width_months <= 0:
        raise ConfigError("window width must be positive")
    n = 0
    cursor = t0
    while cursor < t_end:
        n += 1
        cursor = add_months(t0, n * width_months)
    if cursor != t_end or n == 0:
        raise ConfigError(
            f"window width {width_months}mo does not evenly tile "
            f"[{t0}, {t_end}); partial windows are not allowed"
        )
    return n


def sort_papers(papers) -> list[Paper]:
    """Chronological order with id tie-break; the canonical corpus order."""
    return sorted(papers, key=lambda p: (p.published_at, p.id))


def partition_windows(papers, t0: date, t_end: date, width_months: int) -> list[Window]:
    """Split papers into calendar windows covering [t0, t_end) exactly.

    Every paper must fall inside the evolution period; each lands in exactly
    one window (index 1..T).
    """
    n = count_windows(t0, t_end, width_months)
    bounds = [add_months(t0, i * width_months) for i in range(n + 1)]
    buckets: list[list[Paper]] = [[] for _ in range(n)]
    for p in sort_papers(papers):
        if p.published_at >= t_end:
            raise LeakageError(
                f"paper {p.id} dated {p.published_at} is future-dated for "
                f"evolution period [{t0}, {t_end})"
            )
        if p.published_at < t0:
            raise ConfigError(
                f"paper {p.id} dated {p.published_at} predates "
                f"evolution period [{t0}, {t_end})"
            )
        # Windows are month-multiples of t0, so the index is direct month math.
        offset = (p.published_at.year * 12 + p.published_at.month) - (
            t0.year * 12 + t0.month
        )
        idx = min(offset // width_months, n - 1)
        if not (bounds[idx] <= p.published_at < bounds[idx + 1]):
            # Day-of-month offsets (t0 not on the 1st) can shift by one.
            idx = next(
                i for i in range(n) if bounds[i] <= p.published_at < bounds[i + 1]
            )
        buckets[idx].append(p)
    return [
        Window(index=i + 1, start=bounds[i], end=bounds[i + 1], papers=tuple(buckets[i]))
        for i in range(n)
    ]


def window_label_for(t0: date, width_months: int, index: int) -> str:
    """Label (YYYY-MM) of the window at 1-based ``index``."""
    start = add_months(t0, (index - 1) * width_months)
    return f"{start.year:04d}-{start.month:02d}"


def shuffle_timestamps(papers, seed: int) -> list[Paper]:
    """Permute publication dates across papers (multiset preserved).

    Deterministic per seed; every other field is untouched. Used by the
    temporal-ordering ablation.
    """
    papers = list(papers)
    if not papers:
        raise ValueError("shuffle_timestamps requires a non-empty corpus")
    dates = [p.published_at for p in papers]
    rng = random.Random(seed)
    rng.shuffle(dates)
    return [replace(p, published_at=d) for p, d in zip(papers, dates)]


def assert_no_future_papers(window: Window) -> None:
    """Leakage guard: no member may be dated at or past the window end."""
    for p in window.papers:
        if p.published_at >= window.end:
            raise LeakageError(
                f"paper {p.id} dated {p.published_at} leaked into window "
                f"{window.index} ending {window.end}"
            )
        if p.published_at < window.start:
            raise LeakageError(
                f"paper {p.id} dated {p.published_at} predates window "
                f"{window.index} starting {window.start}"
            )


def assert_visible(papers, cutoff: date) -> None:
    """Leakage guard for generation contexts: all papers strictly before cutoff."""
    for p in papers:
        if p.published_at >= cutoff:
            raise LeakageError(
                f"paper {p.id} dated {p.published_at} is not visible before {cutoff}"
            )
