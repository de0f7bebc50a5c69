"""Temporal validation of hypotheses against strictly-future papers.

Protocol: embedding pre-filter to the top-30 candidates, a cheap prefilter
judgment gating a stronger final judgment at threshold 5.0, hits at final
score >= 6.0. A candidate that never reaches the final stage keeps its
prefilter score (necessarily < 5.0) and can never produce a hit; hits are
only discoverable within the pre-filter set, a protocol property rather
than a bug.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from datetime import date
from typing import Optional

from . import prompts

log = logging.getLogger(__name__)

NOVELTY_DIMS = ("d1", "d2", "d3", "d4")


@dataclass(frozen=True)
class Thresholds:
    prefilter: float = 5.0
    hit: float = 6.0
    candidates: int = 30

    def __post_init__(self):
        if self.prefilter <= 0 or self.hit <= 0 or self.candidates <= 0:
            raise ValueError("thresholds must be positive")
        if self.prefilter >= self.hit:
            raise ValueError("prefilter threshold must be below hit threshold")


@dataclass(frozen=True)
class AlignmentJudgment:
    """Best-stage outcome for one (hypothesis, candidate paper) pair."""

    paper_id: str
    paper_date: str
    prefilter: float
    final: Optional[float]
    rationale: str = ""

    @property
    def stage(self) -> str:
        return "final" if self.final is not None else "prefilter"

    @property
    def score(self) -> float:
        """Authoritative score: the final stage wins when it ran."""
        return self.final if self.final is not None else self.prefilter

    def to_dict(self) -> dict:
        return {"paper_id": self.paper_id, "paper_date": self.paper_date,
                "prefilter": self.prefilter, "final": self.final,
                "rationale": self.rationale}

    @classmethod
    def from_dict(cls, d: dict) -> "AlignmentJudgment":
        return cls(d["paper_id"], d.get("paper_date", ""), d["prefilter"],
                   d.get("final"), d.get("rationale", ""))


@dataclass
class EvaluationRecord:
    hypothesis_id: str
    topic: str
    variant: str
    window_index: int
    window_label: str
    generated_at: str
    candidates: list = field(default_factory=list)   # [paper_id, similarity]
    judged: list = field(default_factory=list)       # AlignmentJudgment
    best_match: Optional[float] = None
    matched_paper: Optional[str] = None
    is_hit: bool = False
    hit_papers: list = field(default_factory=list)
    temporal_lead_days: Optional[int] = None
    novelty: dict = field(default_factory=dict)
    cross_domain: int = 0
    trigger: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "hypothesis_id": self.hypothesis_id,
            "topic": self.topic,
            "variant": self.variant,
            "window_index": self.window_index,
            "window_label": self.window_label,
            "generated_at": self.generated_at,
            "candidates": [[p, s] for p, s in self.candidates],
            "judged": [j.to_dict() for j in self.judged],
            "best_match": self.best_match,
            "matched_paper": self.matched_paper,
            "is_hit": self.is_hit,
            "hit_papers": list(self.hit_papers),
            "temporal_lead_days": self.temporal_lead_days,
            "novelty": self.novelty,
            "cross_domain": self.cross_domain,
            "trigger": self.trigger,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvaluationRecord":
        return cls(
            hypothesis_id=d["hypothesis_id"],
            topic=d["topic"],
            variant=d.get("variant", ""),
            window_index=d.get("window_index", 0),
            window_label=d.get("window_label", ""),
            generated_at=d.get("generated_at", ""),
            candidates=[tuple(c) for c in d.get("candidates", ())],
            judged=[AlignmentJudgment.from_dict(j) for j in d.get("judged", ())],
            best_match=d.get("best_match"),
            matched_paper=d.get("matched_paper"),
            is_hit=d.get("is_hit", False),
            hit_papers=list(d.get("hit_papers", ())),
            temporal_lead_days=d.get("temporal_lead_days"),
            novelty=dict(d.get("novelty", {})),
            cross_domain=d.get("cross_domain", 0),
            trigger=d.get("trigger"),
        )


def hypothesis_embed_text(h) -> str:
    """Richer text used for candidate pre-filtering."""
    return " ".join([
        h.statement, h.claim["method_delta"], h.claim["expected_observable"],
    ])


def paper_embed_text(p) -> str:
    return f"{p.title} {p.abstract}".strip()


def prefilter_candidates(gateway, h, validation_papers, k: int = 30,
                         phase: str = "evaluate"):
    """Top-k validation papers by cosine similarity to the hypothesis.

    Papers dated before the hypothesis's generation are excluded; ties break
    by paper id ascending. Returns [(Paper, similarity)] sorted descending.
    """
    eligible = [p for p in validation_papers if p.published_at >= h.generated_at]
    if not eligible:
        return []
    texts = [hypothesis_embed_text(h)] + [paper_embed_text(p) for p in eligible]
    vectors = gateway.embed(texts, phase=phase)
    hv = vectors[0].unit()
    scored = []
    for p, v in zip(eligible, vectors[1:]):
        sim = float(hv @ v.unit())
        scored.append((p, sim))
    scored.sort(key=lambda t: (-t[1], t[0].id))
    return scored[:k]


_SCORE_RE = re.compile(r"SCORE:\s*([0-9]+(?:\.[0-9]+)?)", re.IGNORECASE)
_RATIONALE_RE = re.compile(r"RATIONALE:\s*(.+)", re.IGNORECASE)
_DIM_RE = re.compile(r"^D([1-4]):\s*([0-9]+(?:\.[0-9]+)?)", re.MULTILINE)


def _parse_score(text: str) -> Optional[float]:
    m = _SCORE_RE.search(text)
    if not m:
        return None
    score = float(m.group(1))
    if not 0.0 <= score <= 10.0:
        log.warning("judge score %.2f outside [0, 10]; clamped", score)
        score = min(10.0, max(0.0, score))
    return score


def _judge_once(gateway, role: str, user: str, phase: str) -> tuple[float, str]:
    text, _, _ = gateway.complete(
        role=role, system=prompts.ALIGNMENT_JUDGE_SYSTEM, user=user, phase=phase)
    score = _parse_score(text)
    if score is None:
        text, _, _ = gateway.complete(
            role=role, system=prompts.ALIGNMENT_JUDGE_SYSTEM,
            user=user + "\n\nRespond with exactly the two required lines.",
            phase=phase)
        score = _parse_score(text)
    if score is None:
        log.warning("unparseable %s output after retry; scoring 0", role)
        return 0.0, "unparseable judge output"
    m = _RATIONALE_RE.search(text)
    return score, (m.group(1).strip() if m else "")


def judge_alignment(gateway, h, paper, thresholds: Thresholds = Thresholds(),
                    phase: str = "evaluate") -> AlignmentJudgment:
    """Two-stage judgment: prefilter score gates the final re-judgment."""
    user = prompts.alignment_prompt(h, paper)
    pre, rationale = _judge_once(gateway, "prefilter_judge", user, phase)
    final = None
    if pre >= thresholds.prefilter:
        final, rationale = _judge_once(gateway, "final_judge", user, phase)
    return AlignmentJudgment(
        paper_id=paper.id, paper_date=paper.published_at.isoformat(),
        prefilter=pre, final=final, rationale=rationale)


def judge_novelty(gateway, h, phase: str = "evaluate") -> dict:
    """Blind four-dimension novelty judgment plus the arithmetic mean."""
    user = prompts.novelty_prompt(h)
    text, _, _ = gateway.complete(
        role="novelty_judge", system=prompts.NOVELTY_JUDGE_SYSTEM, user=user,
        phase=phase)
    dims = {f"d{i}": float(v) for i, v in _DIM_RE.findall(text)}
    if len(dims) < 4:
        text, _, _ = gateway.complete(
            role="novelty_judge", system=prompts.NOVELTY_JUDGE_SYSTEM,
            user=user + "\n\nRespond with exactly the four D lines.", phase=phase)
        dims = {f"d{i}": float(v) for i, v in _DIM_RE.findall(text)}
    out = {}
    for key in NOVELTY_DIMS:
        v = dims.get(key)
        if v is None:
            log.warning("novelty judge missing %s after retry; defaulting to 1", key)
            v = 1.0
        if not 1.0 <= v <= 10.0:
            log.warning("novelty %s=%.2f outside [1, 10]; clamped", key, v)
            v = min(10.0, max(1.0, v))
        out[key] = v
    out["mean"] = sum(out[k] for k in NOVELTY_DIMS) / 4.0
    return out


def cross_domain_score(h, papers_by_id: dict) -> int:
    """Count of distinct primary arXiv categories among cited papers."""
    cats = set()
    for pid in h.source_papers:
        paper = papers_by_id.get(pid)
        if paper is None:
            log.warning("cross-domain: citation %s unresolvable; ignored", pid)
            continue
        cats.add(paper.primary_category)
    return len(cats)


def evaluate_hypothesis(gateway, h, validation_papers, papers_by_id,
                        thresholds: Thresholds = Thresholds(),
                        phase: str = "evaluate") -> EvaluationRecord:
    """Full per-hypothesis evaluation: candidates, two-stage judging, novelty."""
    record = EvaluationRecord(
        hypothesis_id=h.id,
        topic=h.topic,
        variant=h.variant,
        window_index=h.window_index,
        window_label="",
        generated_at=h.generated_at.isoformat(),
        trigger=h.trigger,
    )
    pairs = prefilter_candidates(gateway, h, validation_papers,
                                 k=thresholds.candidates, phase=phase)
    record.candidates = [(p.id, round(sim, 6)) for p, sim in pairs]
    judged = [judge_alignment(gateway, h, p, thresholds, phase) for p, _ in pairs]
    record.judged = judged
    finalize_record(record, h.generated_at, thresholds)
    record.novelty = judge_novelty(gateway, h, phase)
    record.cross_domain = cross_domain_score(h, papers_by_id)
    return record


def finalize_record(record: EvaluationRecord, generated_at: date,
                    thresholds: Thresholds) -> None:
    """Derive best match, matched paper, hit flag, and temporal lead."""
    if not record.judged:
        record.best_match = None
        record.matched_paper = None
        record.is_hit = False
        record.hit_papers = []
        record.temporal_lead_days = None
        return
    best = min(record.judged, key=lambda j: (-j.score, j.paper_id))
    record.best_match = best.score
    record.matched_paper = best.paper_id
    record.hit_papers = sorted(
        j.paper_id for j in record.judged
        if j.final is not None and j.final >= thresholds.hit)
    # A hit requires a final-stage judgment; with the prefilter gate in
    # place, best_match >= hit already implies one exists.
    record.is_hit = record.best_match >= thresholds.hit and bool(record.hit_papers)
    matched_date = date.fromisoformat(best.paper_date)
    lead = (matched_date - generated_at).days
    record.temporal_lead_days = lead
    if record.is_hit and lead < 0:
        # Candidates are date-filtered, so this only trips on corrupt inputs.
        log.warning("hit with negative temporal lead for %s; demoted",
                    record.hypothesis_id)
        record.is_hit = False
        record.hit_papers = []


def best_final_score(record: EvaluationRecord) -> Optional[float]:
    finals = [j.final for j in record.judged if j.final is not None]
    return max(finals) if finals else None


def hits_at_threshold(records, threshold: float) -> int:
    """Recount hits at an alternative hit threshold (final stage only)."""
    count = 0
    for r in records:
        best = best_final_score(r)
        if best is not None and best >= threshold:
            count += 1
    return count


@dataclass
class TopicMetrics:
    topic: str
    yield_count: int
    hits: int
    hit_rate: float
    unique_hits: int
    best_match_mean: Optional[float]
    novelty_mean: Optional[float]
    cross_domain: Optional[float]
    temporal_lead_mean: Optional[float]
    hyps_per_hit: Optional[float]

    def to_dict(self) -> dict:
        return {
            "topic": self.topic,
            "yield": self.yield_count,
            "hits": self.hits,
            "hit_rate": self.hit_rate,
            "unique_hits": self.unique_hits,
            "best_match_mean": self.best_match_mean,
            "novelty_mean": self.novelty_mean,
            "cross_domain": self.cross_domain,
            "temporal_lead_mean": self.temporal_lead_mean,
            "hyps_per_hit": self.hyps_per_hit,
        }


def _mean(values) -> Optional[float]:
    values = [v for v in values if v is not None]
    return sum(values) / len(values) if values else None


def compute_topic_metrics(topic: str, records) -> TopicMetrics:
    records = list(records)
    n = len(records)
    hits = sum(1 for r in records if r.is_hit)
    unique = set()
    for r in records:
        if r.is_hit:
            unique.update(r.hit_papers or ([r.matched_paper] if r.matched_paper else []))
    return TopicMetrics(
        topic=topic,
        yield_count=n,
        hits=hits,
        hit_rate=(100.0 * hits / n) if n else 0.0,
        unique_hits=len(unique),
        best_match_mean=_mean(r.best_match for r in records),
        novelty_mean=_mean(r.novelty.get("mean") for r in records if r.novelty),
        cross_domain=_mean(float(r.cross_domain) for r in records),
        temporal_lead_mean=_mean(
            r.temporal_lead_days for r in records if r.is_hit),
        hyps_per_hit=(n / hits) if hits else None,
    )


def aggregate_metrics(per_topic: dict) -> dict:
    """Cross-topic aggregation with per-topic-mean semantics.

    Hit rate / novelty / best match are means of per-topic values; unique
    hits sum; the headline hyps-per-hit is total yield over total unique
    hits. Accepts TopicMetrics values or their dict form.
    """
    metrics = [per_topic[t] for t in sorted(per_topic)]
    metrics = [m.to_dict() if isinstance(m, TopicMetrics) else m for m in metrics]
    n_topics = len(metrics)
    total_yield = sum(m["yield"] for m in metrics)
    total_unique = sum(m["unique_hits"] for m in metrics)
    covered = sum(1 for m in metrics if m["hits"] > 0)
    return {
        "topics": n_topics,
        "yield_mean": _mean(m["yield"] for m in metrics),
        "hit_rate_mean": _mean(m["hit_rate"] for m in metrics),
        "coverage": f"{covered}/{n_topics}",
        "coverage_count": covered,
        "unique_hits": total_unique,
        "total_yield": total_yield,
        "total_hits": sum(m["hits"] for m in metrics),
        "hyps_per_hit": (total_yield / total_unique) if total_unique else None,
        "best_match_mean": _mean(m["best_match_mean"] for m in metrics),
        "novelty_mean": _mean(m["novelty_mean"] for m in metrics),
        "cross_domain_mean": _mean(m["cross_domain"] for m in metrics),
        "temporal_lead_mean": _mean(m["temporal_lead_mean"] for m in metrics),
    }
