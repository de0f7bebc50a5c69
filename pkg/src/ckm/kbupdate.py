"""Knowledge-state construction and per-window updates via the gateway.

Initialization reads each historical paper once (generation role), groups
extractions by subtopic, and organizes them into capped topic files. The
per-window update merges new papers file-by-file; in contrastive (full)
mode every paper must come back categorized as NEW / CONFIRM / CONTRADICT /
CROSS_DOMAIN, with one retry before uncovered papers default to NEW.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Optional

from . import prompts
from .corpus import TopicConfig, Window, assert_no_future_papers
from .errors import ConfigError, LeakageError
from .kbdiff import CATEGORIES, CategorizedEntry, KnowledgeDiff, diff_knowledge
from .knowledge import (
    KnowledgeBase,
    TopicFile,
    citations_in,
    clean_body,
    compress_topic_file,
    slugify,
    stub_knowledge_base,
)

log = logging.getLogger(__name__)

RETRY_SUFFIX = (
    "\n\nYour previous response was missing the required markers. Return the "
    "complete updated file between BEGIN UPDATED FILE and END UPDATED FILE"
    " (and, when requested, the BEGIN ENTRIES block)."
)


def render_topic_file(name: str, methods, findings, open_questions, cross_refs) -> TopicFile:
    name = slugify(name)
    lines = [f"# {name}", ""]
    for heading, bullets in (
        ("## Known methods", methods),
        ("## Established findings", findings),
        ("## Open questions", open_questions),
        ("## Cross-references", cross_refs),
    ):
        lines.append(heading)
        lines.extend(bullets)
        lines.append("")
    return TopicFile(name=name, body="\n".join(lines).rstrip("\n"))


@dataclass
class Extraction:
    subtopic: str
    methods: list
    findings: list
    open_questions: list
    cross_refs: list


_SECTION_KEYS = {
    "METHODS:": "methods",
    "FINDINGS:": "findings",
    "OPEN_QUESTIONS:": "open_questions",
    "CROSS_REFS:": "cross_refs",
}


def parse_extraction(text: str) -> Optional[Extraction]:
    sub = None
    buckets = {v: [] for v in _SECTION_KEYS.values()}
    current = None
    for line in text.split("\n"):
        stripped = line.strip()
        if stripped.upper().startswith("SUBTOPIC:"):
            sub = stripped.split(":", 1)[1].strip()
            continue
        if stripped.upper() in _SECTION_KEYS:
            current = _SECTION_KEYS[stripped.upper()]
            continue
        if current and stripped.startswith("- "):
            buckets[current].append(stripped)
    if not sub:
        return None
    return Extraction(subtopic=slugify(sub), **buckets)


def init_knowledge(gateway, cfg: TopicConfig, papers, include_text: bool = True,
                   phase: str = "init") -> KnowledgeBase:
    """Build the baseline snapshot K_0 from initialization-period papers."""
    for p in papers:
        if p.published_at >= cfg.t0:
            raise LeakageError(
                f"paper {p.id} dated {p.published_at} is not historical "
                f"(initialization ends {cfg.t0})")
        if p.published_at < cfg.t_init:
            raise ConfigError(
                f"paper {p.id} dated {p.published_at} predates t_init {cfg.t_init}")
    if not papers:
        return stub_knowledge_base(cfg.topic)

    known_ids = {p.id for p in papers}
    groups: dict[str, list[Extraction]] = {}
    skipped = 0
    for p in papers:
        text, _, _ = gateway.complete(
            role="generation",
            system=prompts.READER_SYSTEM,
            user=prompts.reader_prompt(cfg.topic, p, include_text),
            phase=phase,
        )
        extraction = parse_extraction(text)
        if extraction is None:
            skipped += 1
            log.warning("init: unparseable extraction for paper %s; skipped", p.id)
            continue
        groups.setdefault(extraction.subtopic, []).append(extraction)
    if skipped:
        log.warning("init: %d/%d extractions skipped", skipped, len(papers))
    if not groups:
        return stub_knowledge_base(cfg.topic)

    files = []
    for sub in sorted(groups):
        exts = groups[sub]
        tf = render_topic_file(
            sub,
            [b for e in exts for b in e.methods],
            [b for e in exts for b in e.findings],
            [b for e in exts for b in e.open_questions],
            [b for e in exts for b in e.cross_refs],
        )
        body, dropped = clean_body(tf.body, known_ids)
        if dropped:
            log.warning("init: dropped %d uncited/unknown claim lines in %s",
                        dropped, sub)
        files.append(compress_topic_file(TopicFile(name=tf.name, body=body)))
    return KnowledgeBase(topic=cfg.topic, window_index=0, files=tuple(files))


@dataclass
class ParsedUpdate:
    body: Optional[str]
    entries: list
    new_files: dict


_NEW_FILE_RE = re.compile(
    r"^BEGIN NEW FILE:\s*(?P<name>[^\n]+)\n(?P<body>.*?)\nEND NEW FILE",
    re.MULTILINE | re.DOTALL,
)


def parse_update_response(text: str) -> ParsedUpdate:
    body = _block(text, "BEGIN UPDATED FILE", "END UPDATED FILE")
    entries = []
    entries_block = _block(text, "BEGIN ENTRIES", "END ENTRIES")
    if entries_block is not None:
        for line in entries_block.split("\n"):
            parts = [p.strip() for p in line.split("|")]
            if len(parts) >= 2 and parts[0]:
                entries.append((parts[0], parts[1].upper(),
                                parts[2] if len(parts) > 2 else "CURRENT"))
    new_files = {
        slugify(m.group("name")): m.group("body").strip("\n")
        for m in _NEW_FILE_RE.finditer(text)
    }
    return ParsedUpdate(body=body, entries=entries, new_files=new_files)


def _block(text: str, start: str, end: str) -> Optional[str]:
    i = text.find(start)
    if i < 0:
        return None
    j = text.find(end, i + len(start))
    if j < 0:
        return None
    return text[i + len(start):j].strip("\n")


def update_knowledge(gateway, kb: KnowledgeBase, window: Window, mode: str,
                     include_text: bool = True, phase: str = "evolve",
                     ) -> tuple[KnowledgeBase, KnowledgeDiff]:
    """Advance K_{t-1} to K_t by absorbing one window of papers.

    ``mode`` is "lite" (plain merge) or "full" (contrastive categorization).
    The leakage guard runs before any provider call and is always a hard
    error.
    """
    if mode not in ("lite", "full"):
        raise ConfigError(f"unknown update mode {mode!r}")
    if kb.window_index != window.index - 1:
        raise ConfigError(
            f"snapshot at window {kb.window_index} cannot absorb window "
            f"{window.index}")
    assert_no_future_papers(window)

    if not window.papers:
        next_kb = kb.with_files(kb.files, window.index)
        return next_kb, diff_knowledge(kb, next_kb)

    contrastive = mode == "full"
    visible_ids = kb.all_citations() | {p.id for p in window.papers}
    period = f"{window.label} ({window.start} to {window.end})"
    next_files: dict[str, TopicFile] = {}
    new_files: dict[str, str] = {}
    entries: list[CategorizedEntry] = []
    window_ids = {p.id for p in window.papers}

    for f in kb.files:
        user = prompts.update_prompt(
            f.name, period, f.body, window.papers, contrastive, include_text)
        text, _, _ = gateway.complete(
            role="generation", system=prompts.UPDATER_SYSTEM, user=user,
            phase=phase)
        parsed = parse_update_response(text)
        if parsed.body is None or (contrastive and not parsed.entries):
            text, _, _ = gateway.complete(
                role="generation", system=prompts.UPDATER_SYSTEM,
                user=user + RETRY_SUFFIX, phase=phase)
            retried = parse_update_response(text)
            if retried.body is not None or parsed.body is None:
                parsed = retried

        if parsed.body is None:
            log.warning("update %s/%s: response had no file block; file kept "
                        "unchanged", kb.topic, f.name)
            body = f.body
        else:
            body, dropped = clean_body(parsed.body, visible_ids)
            if dropped:
                log.warning("update %s/%s: dropped %d uncited/unknown claim "
                            "lines", kb.topic, f.name, dropped)
        next_files[f.name] = compress_topic_file(TopicFile(name=f.name, body=body))

        for pid, category, target in parsed.entries:
            if pid not in window_ids:
                log.warning("update %s/%s: entry cites %s outside the window; "
                            "ignored", kb.topic, f.name, pid)
                continue
            if category not in CATEGORIES:
                log.warning("update %s/%s: unknown category %r defaulted to NEW",
                            kb.topic, f.name, category)
                category = "NEW"
            name = f.name if target in ("CURRENT", "") else slugify(target)
            entries.append(CategorizedEntry(pid, category, name))

        for name, raw in parsed.new_files.items():
            if name in {x.name for x in kb.files} or name in new_files or name in next_files:
                log.warning("update %s: new file %r already exists; block ignored",
                            kb.topic, name)
                continue
            cleaned, _ = clean_body(raw, visible_ids)
            new_files[name] = cleaned
            if contrastive:
                for pid in sorted(set(citations_in(cleaned)) & window_ids):
                    entries.append(CategorizedEntry(pid, "NEW", name))

    if contrastive:
        covered = {e.paper_id for e in entries}
        uncovered = [p for p in window.papers if p.id not in covered]
        if uncovered:
            primary = sorted(next_files)[0]
            tf = next_files[primary]
            lines = tf.body.split("\n")
            for p in uncovered:
                log.warning("update %s: paper %s uncategorized after retry; "
                            "defaulting to NEW", kb.topic, p.id)
                frag = " ".join(re.findall(r"[A-Za-z]{4,}", p.title)[:5]).lower()
                lines.append(f"- {frag.capitalize()} (added without category) [{p.id}]")
                entries.append(CategorizedEntry(p.id, "NEW", primary))
            next_files[primary] = compress_topic_file(
                TopicFile(name=primary, body="\n".join(lines)))

    files = list(next_files.values()) + [
        compress_topic_file(TopicFile(name=n, body=b)) for n, b in new_files.items()
    ]
    next_kb = KnowledgeBase(topic=kb.topic, window_index=window.index,
                            files=tuple(files))
    diff = diff_knowledge(kb, next_kb, tuple(entries) if contrastive else ())
    return next_kb, diff
