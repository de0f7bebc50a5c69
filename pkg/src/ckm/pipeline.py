"""Per-topic orchestration of one variant's evolution phase.

Each window runs update -> (change detection, full family only) ->
generation, carrying the knowledge state, trajectory, and prior hypotheses
forward. Every snapshot and diff is persisted so the evolution is
recomputable after the fact; a hard window failure aborts the topic with
partial artifacts retained.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

from .corpus import TopicConfig, Window, partition_windows, shuffle_timestamps, sort_papers
from .errors import ConfigError, ProviderError
from .kbupdate import update_knowledge
from .knowledge import KnowledgeBase, save_snapshot
from .metabolism import (
    GenerationContext,
    TrajectorySummary,
    VariantSpec,
    detect_change,
    generate_hypotheses,
    summarize_trajectory,
)

log = logging.getLogger(__name__)


@dataclass
class TopicRunResult:
    topic: str
    variant: str
    windows: int = 0
    hypotheses: int = 0
    signals: int = 0
    artifacts: list = field(default_factory=list)
    failed_window: int | None = None


def build_windows(variant: VariantSpec, cfg: TopicConfig, papers, seed: int):
    """Window plan for a variant: T calendar windows, or one batch span."""
    if not variant.full_text:
        papers = [p.without_full_text() for p in papers]
    if variant.shuffle_dates and papers:
        papers = shuffle_timestamps(papers, seed)
    if variant.incremental:
        return partition_windows(papers, cfg.t0, cfg.t_end, cfg.window_months)
    return [Window(index=1, start=cfg.t0, end=cfg.t_end,
                   papers=tuple(sort_papers(papers)))]


def run_topic(gateway, variant: VariantSpec, cfg: TopicConfig, baseline: KnowledgeBase,
              papers, init_papers, variant_dir, per_window: int = 3,
              seed: int = 0, phase: str = "evolve") -> TopicRunResult:
    """Evolve one topic under one variant, persisting artifacts as it goes."""
    if baseline.window_index != 0:
        raise ConfigError("evolution must start from the w0 baseline snapshot")
    result = TopicRunResult(topic=cfg.topic, variant=variant.name)
    windows = build_windows(variant, cfg, papers, seed)

    variant_dir.mkdir(parents=True, exist_ok=True)
    hyp_path = variant_dir / "hypotheses.jsonl"
    sig_path = variant_dir / "signals.jsonl"
    traj_path = variant_dir / "trajectory.md"
    hyp_path.write_text("", encoding="utf-8")
    sig_path.write_text("", encoding="utf-8")
    result.artifacts += [hyp_path, sig_path, traj_path]

    kb = baseline
    trajectory = TrajectorySummary()
    prior: list = []
    visible_dates = {p.id: p.published_at for p in init_papers}
    mode = "full" if variant.diff_updates else "lite"

    for window in windows:
        try:
            kb_next, diff = update_knowledge(
                gateway, kb, window, mode,
                include_text=variant.full_text, phase=phase)
            snap_dir = variant_dir / "kb" / f"w{window.index}"
            result.artifacts += save_snapshot(kb_next, snap_dir)
            diff_path = variant_dir / "kb" / f"w{window.index}.diff.json"
            diff_path.write_text(
                json.dumps(diff.to_dict(), indent=2, sort_keys=True) + "\n",
                encoding="utf-8")
            result.artifacts.append(diff_path)

            signal = None
            if variant.change_detection:
                signal = detect_change(gateway, diff, window, kb, kb_next,
                                       phase=phase)
                with sig_path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps({
                        "window_index": window.index,
                        "window": window.label,
                        **signal.to_dict(),
                    }, sort_keys=True) + "\n")
                result.signals += 1

            visible_dates.update({p.id: p.published_at for p in window.papers})
            ctx = GenerationContext(
                topic=cfg.topic,
                variant=variant,
                window=window,
                knowledge=kb_next,
                trajectory=trajectory,
                prior_hypotheses=prior,
                visible_dates=visible_dates,
                change_signal=signal,
            )
            hyps = generate_hypotheses(gateway, ctx, target_count=per_window,
                                       phase=phase)
            with hyp_path.open("a", encoding="utf-8") as fh:
                for h in hyps:
                    fh.write(json.dumps(h.to_dict(), sort_keys=True) + "\n")

            trajectory = summarize_trajectory(trajectory, window, diff, signal)
            traj_path.write_text(
                f"# Evolution trajectory: {cfg.topic} ({variant.name})\n\n"
                + trajectory.render() + "\n",
                encoding="utf-8")

            prior = prior + hyps
            kb = kb_next
            result.windows += 1
            result.hypotheses += len(hyps)
        except ProviderError as err:
            result.failed_window = window.index
            failures = variant_dir / "failures.json"
            failures.write_text(json.dumps({
                "window_index": window.index,
                "window": window.label,
                "error": str(err),
            }, indent=2, sort_keys=True) + "\n", encoding="utf-8")
            log.error("window %s of %s/%s failed hard; topic aborted: %s",
                      window.label, cfg.topic, variant.name, err)
            raise
    return result
