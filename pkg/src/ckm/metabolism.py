"""Per-window generation machinery: change signals, trajectory, hypotheses.

Change-type labels are open-set: five canonical values are normalized, and
anything else the model emits (GAP_EXPLOITATION, NON_OBVIOUS_BRIDGE, ...)
is kept verbatim after normalization rather than rejected.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from datetime import date
from typing import Optional

from . import prompts
from .corpus import Window
from .errors import ConfigError
from .kbdiff import KnowledgeDiff, summarize_diff
from .knowledge import KnowledgeBase, slugify

log = logging.getLogger(__name__)

CANONICAL_CHANGE_TYPES = (
    "INCREMENTAL", "CONTRADICTION", "CONVERGENCE", "BRIDGE", "TREND_CONFIRMED",
)


def normalize_label(label: str) -> str:
    """Upper-snake normalization for change/trigger labels."""
    return re.sub(r"[^A-Z0-9]+", "_", label.strip().upper()).strip("_")


@dataclass(frozen=True)
class ChangeSignal:
    change_type: str
    reason: str = ""
    key_changes: tuple = ()

    def __post_init__(self):
        if not self.change_type:
            raise ValueError("change_type must be non-empty")

    @property
    def is_canonical(self) -> bool:
        return self.change_type in CANONICAL_CHANGE_TYPES

    def to_dict(self) -> dict:
        return {"change_type": self.change_type, "reason": self.reason,
                "key_changes": list(self.key_changes)}

    @classmethod
    def from_dict(cls, d: dict) -> "ChangeSignal":
        return cls(d["change_type"], d.get("reason", ""),
                   tuple(d.get("key_changes", ())))


@dataclass(frozen=True)
class TrajectoryEntry:
    window_index: int
    label: str
    summary: str
    change_type: Optional[str] = None


@dataclass(frozen=True)
class TrajectorySummary:
    """Ordered per-window change summaries (S_{1:t})."""

    entries: tuple = ()
    max_lines: int = 120

    def append(self, entry: TrajectoryEntry) -> "TrajectorySummary":
        if self.entries and entry.window_index <= self.entries[-1].window_index:
            raise ValueError("trajectory entries must be appended in window order")
        return TrajectorySummary(entries=self.entries + (entry,),
                                 max_lines=self.max_lines)

    def render(self) -> str:
        """Markdown rendering, condensing oldest windows past the line cap."""
        def lines_for(entries, condensed_through):
            out = []
            if condensed_through:
                out.append(
                    f"- Windows 1-{condensed_through}: earlier changes "
                    "condensed (older detail summarized away).")
            for e in entries:
                head = f"- Window {e.window_index} ({e.label})"
                if e.change_type:
                    head += f" [{e.change_type}]"
                out.append(f"{head}: {e.summary}")
            return out

        keep = list(self.entries)
        condensed_through = 0
        lines = lines_for(keep, condensed_through)
        while len(lines) > self.max_lines and len(keep) > 1:
            condensed_through = keep[0].window_index
            keep = keep[1:]
            lines = lines_for(keep, condensed_through)
        return "\n".join(lines)

    def __len__(self) -> int:
        return len(self.entries)


def summarize_trajectory(prior: TrajectorySummary, window: Window,
                         diff: KnowledgeDiff,
                         signal: Optional[ChangeSignal] = None) -> TrajectorySummary:
    """Append one completed window's change summary to the trajectory."""
    summary = summarize_diff(diff)
    if signal is not None and signal.reason:
        summary = f"{summary} {signal.reason}"
    return prior.append(TrajectoryEntry(
        window_index=window.index,
        label=window.label,
        summary=summary,
        change_type=signal.change_type if signal else None,
    ))


CLAIM_FIELDS = ("problem", "method_delta", "baseline", "expected_observable",
                "evaluation_plan", "failure_mode")


@dataclass(frozen=True)
class Hypothesis:
    """Structured hypothesis artifact with provenance."""

    id: str
    statement: str
    claim: dict
    source_papers: tuple
    self_assessment: dict
    topic: str
    variant: str
    window_index: int
    generated_at: date
    trigger: Optional[str] = None

    def __post_init__(self):
        if not self.statement.strip():
            raise ValueError("statement must be non-empty")
        missing = [k for k in CLAIM_FIELDS if not str(self.claim.get(k, "")).strip()]
        if missing:
            raise ValueError(f"claim missing fields: {missing}")
        for k in ("novelty", "feasibility", "impact"):
            v = self.self_assessment.get(k)
            if v is None or not (1.0 <= float(v) <= 10.0):
                raise ValueError(f"self-assessment {k} outside [1, 10]: {v!r}")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "statement": self.statement,
            "claim": {k: self.claim[k] for k in CLAIM_FIELDS},
            "source_papers": list(self.source_papers),
            "trigger": self.trigger,
            "self_assessment": dict(sorted(self.self_assessment.items())),
            "topic": self.topic,
            "variant": self.variant,
            "window_index": self.window_index,
            "generated_at": self.generated_at.isoformat(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Hypothesis":
        return cls(
            id=d["id"], statement=d["statement"], claim=dict(d["claim"]),
            source_papers=tuple(d["source_papers"]), trigger=d.get("trigger"),
            self_assessment=dict(d["self_assessment"]), topic=d["topic"],
            variant=d["variant"], window_index=d["window_index"],
            generated_at=date.fromisoformat(d["generated_at"]),
        )


@dataclass(frozen=True)
class VariantSpec:
    """Experimental-group flags (one row of the ablation matrix)."""

    name: str
    incremental: bool
    diff_updates: bool
    change_detection: bool
    trajectory_conditioning: bool
    full_text: bool
    shuffle_dates: bool = False


VARIANTS = {
    "full": VariantSpec("full", True, True, True, True, True),
    "lite": VariantSpec("lite", True, False, False, False, True),
    "batch": VariantSpec("batch", False, False, False, False, True),
    "abstract": VariantSpec("abstract", True, True, True, True, False),
    "shuffled": VariantSpec("shuffled", True, True, True, True, True,
                            shuffle_dates=True),
}


def get_variant(name: str) -> VariantSpec:
    try:
        return VARIANTS[name.lower()]
    except KeyError:
        raise ConfigError(
            f"unknown variant {name!r}; expected one of {sorted(VARIANTS)}")


@dataclass
class GenerationContext:
    """Everything the hypothesis engine conditions on for one window."""

    topic: str
    variant: VariantSpec
    window: Window
    knowledge: KnowledgeBase
    trajectory: TrajectorySummary
    prior_hypotheses: list
    visible_dates: dict            # paper id -> published date (all seen so far)
    change_signal: Optional[ChangeSignal] = None

    def __post_init__(self):
        if self.change_signal is not None and not self.variant.change_detection:
            raise ConfigError(
                f"variant {self.variant.name!r} must not carry a change signal")


def detect_change(gateway, diff: KnowledgeDiff, window: Window,
                  prev: KnowledgeBase, next_kb: KnowledgeBase,
                  phase: str = "evolve") -> ChangeSignal:
    """Classify how the knowledge state changed in this window."""
    if diff.is_empty:
        return ChangeSignal(
            change_type="INCREMENTAL",
            reason="no substantive change: the update left the knowledge "
                   "state untouched",
        )
    user = prompts.change_prompt(
        before=prev.render(max_chars_per_file=2500),
        after=next_kb.render(max_chars_per_file=2500),
        period=window.label,
        papers=window.papers,
    )
    text, _, _ = gateway.complete(
        role="generation", system=prompts.CHANGE_SYSTEM, user=user, phase=phase)
    signal = _parse_change(text)
    if signal is None:
        text, _, _ = gateway.complete(
            role="generation", system=prompts.CHANGE_SYSTEM,
            user=user + "\n\nReturn only the JSON object, nothing else.",
            phase=phase)
        signal = _parse_change(text)
    if signal is None:
        log.warning("change detection unparseable twice for %s %s; "
                    "falling back to INCREMENTAL", prev.topic, window.label)
        return ChangeSignal(change_type="INCREMENTAL", reason="parse fallback")
    return signal


def _parse_change(text: str) -> Optional[ChangeSignal]:
    raw = text.strip()
    if raw.startswith("```"):
        raw = re.sub(r"^```[a-z]*\n|\n```$", "", raw)
    start, end = raw.find("{"), raw.rfind("}")
    if start < 0 or end <= start:
        return None
    try:
        data = json.loads(raw[start:end + 1])
        label = normalize_label(str(data["change_type"]))
        if not label:
            return None
        key_changes = tuple(str(k) for k in data.get("key_changes", ()))
        return ChangeSignal(change_type=label,
                            reason=str(data.get("reason", "")),
                            key_changes=key_changes)
    except (json.JSONDecodeError, KeyError, ValueError, TypeError):
        return None


_FIELD_RE = re.compile(r"^(?P<key>[A-Z_]+):\s*(?P<value>.*)$")
_ID_RE = re.compile(r"\d{4}\.\d{4,5}")


def _parse_hypothesis_blocks(text: str):
    blocks = []
    current = None
    for line in text.split("\n"):
        stripped = line.strip()
        if stripped == "BEGIN HYPOTHESIS":
            current = {}
            continue
        if stripped == "END HYPOTHESIS":
            if current is not None:
                blocks.append(current)
            current = None
            continue
        if current is None:
            continue
        m = _FIELD_RE.match(stripped)
        if m:
            current["_last"] = m.group("key")
            current[m.group("key")] = m.group("value").strip()
        elif stripped and current.get("_last"):
            current[current["_last"]] += " " + stripped
    for b in blocks:
        b.pop("_last", None)
    return blocks


def render_prior_hypotheses(prior, limit: int = 60) -> str:
    recent = prior[-limit:]
    lines = [f"- [{h.id}] {h.statement}" for h in recent]
    if len(prior) > limit:
        lines.insert(0, f"- ({len(prior) - limit} earlier hypotheses omitted)")
    return "\n".join(lines)


def generate_hypotheses(gateway, ctx: GenerationContext, target_count: int = 3,
                        phase: str = "evolve") -> list:
    """Run one window's generation step and parse the structured artifacts.

    Structurally invalid blocks are dropped with a warning, never repaired.
    A hypothesis citing a paper that is not visible before the window end is
    rejected (leakage guard).
    """
    window = ctx.window
    for pid, d in ctx.visible_dates.items():
        if d >= window.end:
            raise ConfigError(
                f"visible-paper index contains future paper {pid} ({d}) "
                f"for window ending {window.end}")
    change_line = ""
    if ctx.change_signal is not None:
        change_line = f"{ctx.change_signal.change_type} --- {ctx.change_signal.reason}"
    user = prompts.generation_prompt(
        topic=ctx.topic,
        n_windows=window.index,
        trajectory=ctx.trajectory.render(),
        knowledge=ctx.knowledge.render(max_chars_per_file=4000),
        period=window.label,
        papers=window.papers,
        change_line=change_line,
        prior_hypotheses=render_prior_hypotheses(ctx.prior_hypotheses),
        target_count=target_count,
        include_text=ctx.variant.full_text,
    )
    text, _, _ = gateway.complete(
        role="generation", system=prompts.GENERATOR_SYSTEM, user=user, phase=phase)

    out = []
    for block in _parse_hypothesis_blocks(text):
        hyp = _build_hypothesis(block, ctx, len(out))
        if hyp is not None:
            out.append(hyp)
    if not out:
        log.warning("window %s of %s yielded no valid hypotheses",
                    window.label, ctx.topic)
    return out


def _build_hypothesis(block: dict, ctx: GenerationContext, ordinal: int):
    window = ctx.window
    statement = block.get("STATEMENT", "").strip()
    claim = {k: block.get(k.upper(), "").strip() for k in CLAIM_FIELDS}
    ids = tuple(_ID_RE.findall(block.get("SOURCE_PAPERS", "")))
    for pid in ids:
        if pid not in ctx.visible_dates:
            log.warning("hypothesis cites unseen paper %s; rejected", pid)
            return None
        if ctx.visible_dates[pid] >= window.end:
            log.warning("hypothesis cites future paper %s; rejected", pid)
            return None
    trigger = block.get("TRIGGER", "").strip()
    if trigger:
        trigger = normalize_label(trigger)
    elif ctx.change_signal is not None:
        trigger = ctx.change_signal.change_type
    else:
        trigger = None
    try:
        scores = {
            "novelty": float(block.get("NOVELTY", "")),
            "feasibility": float(block.get("FEASIBILITY", "")),
            "impact": float(block.get("IMPACT", "")),
        }
    except ValueError:
        log.warning("hypothesis block has unparseable self-assessment; dropped")
        return None
    try:
        return Hypothesis(
            id=f"{ctx.variant.name}:{slugify(ctx.topic)}:w{window.index}:{ordinal}",
            statement=statement,
            claim=claim,
            source_papers=ids,
            trigger=trigger,
            self_assessment=scores,
            topic=ctx.topic,
            variant=ctx.variant.name,
            window_index=window.index,
            generated_at=window.end,
        )
    except ValueError as err:
        log.warning("invalid hypothesis block dropped: %s", err)
        return None
