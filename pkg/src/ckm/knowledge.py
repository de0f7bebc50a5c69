"""Evolving knowledge base: size-capped markdown topic files, snapshots.

Each topic file holds four sections (known methods, established findings,
open questions, cross-references). Claim bullets in the first two sections
must cite at least one paper id; files are capped at 200 lines with oldest
entries compressed first, their citations preserved in a single condensed
evidence line. Snapshots are immutable: updates build a new KnowledgeBase.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from pathlib import Path

MAX_FILE_LINES = 200

SECTION_HEADINGS = (
    "## Known methods",
    "## Established findings",
    "## Open questions",
    "## Cross-references",
)
CLAIM_HEADINGS = ("## known methods", "## established findings")

EVIDENCE_PREFIX = "- Compressed evidence:"

CITATION_RE = re.compile(r"\[(\d{4}\.\d{4,5})\]")


def slugify(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", name.lower()).strip("-") or "topic"


def citations_in(text: str) -> list[str]:
    return CITATION_RE.findall(text)


@dataclass(frozen=True)
class TopicFile:
    name: str
    body: str

    @property
    def line_count(self) -> int:
        return len(self.body.split("\n")) if self.body else 0

    @property
    def citations(self) -> set[str]:
        return set(citations_in(self.body))


def new_topic_file(name: str, status_note: str = "") -> TopicFile:
    name = slugify(name)
    lines = [f"# {name}", ""]
    if status_note:
        lines += [f"*{status_note}*", ""]
    for heading in SECTION_HEADINGS:
        lines += [heading, ""]
    return TopicFile(name=name, body="\n".join(lines).rstrip("\n"))


def _section_of(lines: list[str], idx: int) -> str:
    current = ""
    for i in range(idx + 1):
        stripped = lines[i].strip().lower()
        if stripped.startswith("## "):
            current = stripped
    return current


def clean_body(body: str, known_ids: set[str]) -> tuple[str, int]:
    """Drop claim bullets lacking citations or citing unknown papers.

    Citation soundness: every id cited in methods/findings must exist in the
    corpus seen so far. Returns (cleaned body, dropped line count).
    """
    lines = body.split("\n")
    kept, dropped = [], 0
    for idx, line in enumerate(lines):
        if line.lstrip().startswith("- ") and _section_of(lines, idx) in CLAIM_HEADINGS:
            cites = citations_in(line)
            if not cites or any(c not in known_ids for c in cites):
                dropped += 1
                continue
        kept.append(line)
    return "\n".join(kept), dropped


def compress_topic_file(file: TopicFile, max_lines: int = MAX_FILE_LINES) -> TopicFile:
    """Enforce the line cap by summarizing oldest entries first.

    Bullets are removed top-down; every citation from a removed line survives
    in one condensed evidence line. Idempotent: a file within the cap is
    returned unchanged.
    """
    if file.line_count <= max_lines:
        return file
    lines = file.body.split("\n")
    evidence_idx = next(
        (i for i, l in enumerate(lines) if l.startswith(EVIDENCE_PREFIX)), None)
    retained = citations_in(lines[evidence_idx]) if evidence_idx is not None else []

    removable = [
        i for i, l in enumerate(lines)
        if l.lstrip().startswith("- ") and i != evidence_idx
    ]
    keep = [True] * len(lines)
    collected = list(retained)
    needs_new_line = evidence_idx is None

    def projected() -> int:
        base = sum(keep)
        return base + (1 if (needs_new_line and collected) else 0)

    for i in removable:
        if projected() <= max_lines:
            break
        keep[i] = False
        collected.extend(citations_in(lines[i]))
    if projected() > max_lines:
        # Degenerate prose-heavy file: drop oldest non-structural lines too.
        for i, line in enumerate(lines):
            if projected() <= max_lines:
                break
            if line.startswith("#") or i == evidence_idx:
                continue
            if keep[i]:
                keep[i] = False
                collected.extend(citations_in(line))

    evidence_line = None
    if collected:
        uniq = sorted(set(collected))
        evidence_line = f"{EVIDENCE_PREFIX} " + " ".join(f"[{c}]" for c in uniq)

    out = []
    inserted = False
    for i, line in enumerate(lines):
        if i == evidence_idx:
            if evidence_line is not None:
                out.append(evidence_line)
                inserted = True
            continue
        if keep[i]:
            out.append(line)
            if (evidence_line is not None and not inserted and evidence_idx is None
                    and line.strip().lower() == "## established findings"):
                out.append(evidence_line)
                inserted = True
    if evidence_line is not None and not inserted:
        out.append(evidence_line)
    return replace(file, body="\n".join(out))


@dataclass(frozen=True)
class KnowledgeBase:
    """One immutable snapshot of a topic's knowledge state (K_t)."""

    topic: str
    window_index: int
    files: tuple[TopicFile, ...]

    def __post_init__(self):
        names = [f.name for f in self.files]
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate topic file names: {sorted(names)}")
        if self.window_index < 0:
            raise ValueError("window_index must be >= 0")
        object.__setattr__(
            self, "files", tuple(sorted(self.files, key=lambda f: f.name)))

    @property
    def file_names(self) -> list[str]:
        return [f.name for f in self.files]

    def get(self, name: str) -> TopicFile:
        for f in self.files:
            if f.name == name:
                return f
        raise KeyError(name)

    def all_citations(self) -> set[str]:
        out: set[str] = set()
        for f in self.files:
            out |= f.citations
        return out

    def render(self, max_chars_per_file: int = 6000) -> str:
        parts = []
        for f in self.files:
            body = f.body
            if len(body) > max_chars_per_file:
                body = body[:max_chars_per_file] + "\n... (truncated)"
            parts.append(body)
        return "\n\n".join(parts)

    def with_files(self, files, window_index: int) -> "KnowledgeBase":
        return KnowledgeBase(topic=self.topic, window_index=window_index,
                             files=tuple(files))


def stub_knowledge_base(topic: str) -> KnowledgeBase:
    """K_0 for a topic with zero initialization papers."""
    f = new_topic_file("baseline", status_note="Status: empty baseline (no initialization papers)")
    return KnowledgeBase(topic=topic, window_index=0, files=(f,))


def save_snapshot(kb: KnowledgeBase, directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for f in kb.files:
        path = directory / f"{f.name}.md"
        path.write_text(f.body + "\n", encoding="utf-8")
        written.append(path)
    return written


def load_snapshot(topic: str, window_index: int, directory) -> KnowledgeBase:
    directory = Path(directory)
    files = []
    for path in sorted(directory.glob("*.md")):
        body = path.read_text(encoding="utf-8").rstrip("\n")
        files.append(TopicFile(name=path.stem, body=body))
    return KnowledgeBase(topic=topic, window_index=window_index, files=tuple(files))
