"""Line-level diffs between knowledge snapshots.

A diff is sufficient to reproduce the post-state from the pre-state
(``apply_diff(prev, diff) == next`` body-for-body), and carries the
per-paper categorized entries when the contrastive update produced them.
"""

from __future__ import annotations

import difflib
from dataclasses import dataclass, field

from .knowledge import KnowledgeBase, TopicFile

CATEGORIES = ("NEW", "CONFIRM", "CONTRADICT", "CROSS_DOMAIN")


@dataclass(frozen=True)
class CategorizedEntry:
    paper_id: str
    category: str
    target_file: str

    def to_dict(self) -> dict:
        return {"paper_id": self.paper_id, "category": self.category,
                "target_file": self.target_file}

    @classmethod
    def from_dict(cls, d: dict) -> "CategorizedEntry":
        return cls(d["paper_id"], d["category"], d["target_file"])


@dataclass(frozen=True)
class FileDiff:
    """Opcode edit script for one file, plus human-oriented span summaries."""

    ops: tuple  # (tag, i1, i2, new_lines) with new_lines only for insert/replace

    @property
    def added_spans(self):
        return [(i1, i2, len(new)) for tag, i1, i2, new in self.ops if tag == "insert"]

    @property
    def removed_spans(self):
        return [(i1, i2) for tag, i1, i2, new in self.ops if tag == "delete"]

    @property
    def revised_spans(self):
        return [(i1, i2, len(new)) for tag, i1, i2, new in self.ops if tag == "replace"]

    @property
    def is_empty(self) -> bool:
        return not self.ops


def _diff_lines(old: list[str], new: list[str]) -> FileDiff:
    ops = []
    matcher = difflib.SequenceMatcher(a=old, b=new, autojunk=False)
    for tag, i1, i2, j1, j2 in matcher.get_opcodes():
        if tag == "equal":
            continue
        new_lines = tuple(new[j1:j2]) if tag in ("insert", "replace") else ()
        ops.append((tag, i1, i2, new_lines))
    return FileDiff(ops=tuple(ops))


def _apply_lines(old: list[str], fd: FileDiff) -> list[str]:
    out = []
    cursor = 0
    for tag, i1, i2, new_lines in fd.ops:
        out.extend(old[cursor:i1])
        if tag in ("insert", "replace"):
            out.extend(new_lines)
        cursor = i2
    out.extend(old[cursor:])
    return out


@dataclass(frozen=True)
class KnowledgeDiff:
    topic: str
    prev_index: int
    next_index: int
    added_files: dict = field(default_factory=dict)      # name -> body
    removed_files: tuple = ()
    changed_files: dict = field(default_factory=dict)    # name -> FileDiff
    categorized_entries: tuple = ()                      # CategorizedEntry

    @property
    def is_empty(self) -> bool:
        return (not self.added_files and not self.removed_files
                and all(fd.is_empty for fd in self.changed_files.values()))

    def to_dict(self) -> dict:
        return {
            "topic": self.topic,
            "prev_index": self.prev_index,
            "next_index": self.next_index,
            "added_files": dict(sorted(self.added_files.items())),
            "removed_files": sorted(self.removed_files),
            "changed_files": {
                name: [[tag, i1, i2, list(new)] for tag, i1, i2, new in fd.ops]
                for name, fd in sorted(self.changed_files.items())
            },
            "categorized_entries": [e.to_dict() for e in self.categorized_entries],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KnowledgeDiff":
        return cls(
            topic=d["topic"],
            prev_index=d["prev_index"],
            next_index=d["next_index"],
            added_files=dict(d.get("added_files", {})),
            removed_files=tuple(d.get("removed_files", ())),
            changed_files={
                name: FileDiff(ops=tuple(
                    (tag, i1, i2, tuple(new)) for tag, i1, i2, new in ops))
                for name, ops in d.get("changed_files", {}).items()
            },
            categorized_entries=tuple(
                CategorizedEntry.from_dict(e)
                for e in d.get("categorized_entries", ())),
        )


def diff_knowledge(prev: KnowledgeBase, next_kb: KnowledgeBase,
                   categorized_entries=()) -> KnowledgeDiff:
    """Deterministic line-level diff between consecutive snapshots."""
    if prev.topic != next_kb.topic:
        raise ValueError(f"topic mismatch: {prev.topic!r} vs {next_kb.topic!r}")
    if next_kb.window_index != prev.window_index + 1:
        raise ValueError(
            f"snapshot indices must be consecutive: "
            f"{prev.window_index} -> {next_kb.window_index}")
    prev_names = set(prev.file_names)
    next_names = set(next_kb.file_names)
    added = {name: next_kb.get(name).body for name in sorted(next_names - prev_names)}
    removed = tuple(sorted(prev_names - next_names))
    changed = {}
    for name in sorted(prev_names & next_names):
        fd = _diff_lines(prev.get(name).body.split("\n"),
                         next_kb.get(name).body.split("\n"))
        if not fd.is_empty:
            changed[name] = fd
    return KnowledgeDiff(
        topic=prev.topic,
        prev_index=prev.window_index,
        next_index=next_kb.window_index,
        added_files=added,
        removed_files=removed,
        changed_files=changed,
        categorized_entries=tuple(categorized_entries),
    )


def apply_diff(prev: KnowledgeBase, diff: KnowledgeDiff) -> KnowledgeBase:
    """Reconstruct the post-state snapshot from the pre-state and a diff."""
    if prev.topic != diff.topic or prev.window_index != diff.prev_index:
        raise ValueError("diff does not correspond to this snapshot")
    files = []
    for f in prev.files:
        if f.name in diff.removed_files:
            continue
        fd = diff.changed_files.get(f.name)
        if fd is None:
            files.append(f)
        else:
            files.append(TopicFile(
                name=f.name,
                body="\n".join(_apply_lines(f.body.split("\n"), fd))))
    for name, body in diff.added_files.items():
        files.append(TopicFile(name=name, body=body))
    return KnowledgeBase(topic=prev.topic, window_index=diff.next_index,
                         files=tuple(files))


def summarize_diff(diff: KnowledgeDiff) -> str:
    """One-paragraph plain-text summary of what a window changed."""
    if diff.is_empty:
        return "No substantive change: no files were touched this window."
    added_lines = sum(
        n for fd in diff.changed_files.values() for _, _, n in fd.added_spans)
    revised = sum(len(fd.revised_spans) for fd in diff.changed_files.values())
    removed = sum(len(fd.removed_spans) for fd in diff.changed_files.values())
    bits = [f"{len(diff.changed_files)} file(s) updated"]
    if added_lines:
        bits.append(f"{added_lines} line(s) added")
    if revised:
        bits.append(f"{revised} span(s) revised")
    if removed:
        bits.append(f"{removed} span(s) removed")
    if diff.added_files:
        bits.append("new file(s): " + ", ".join(sorted(diff.added_files)))
    if diff.removed_files:
        bits.append("removed file(s): " + ", ".join(diff.removed_files))
    cited = sorted({e.paper_id for e in diff.categorized_entries})
    if cited:
        bits.append(f"{len(cited)} paper(s) categorized")
    return "; ".join(bits) + "."
