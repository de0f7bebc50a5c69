"""Versioned prompt assets for every LLM-facing step.

All wire formats are marker-delimited plain text (or strict JSON for change
detection) so responses parse without heuristics. The judge rubrics are part
of the evaluation contract; bump PROMPT_VERSION on any wording change.
"""

from __future__ import annotations

PROMPT_VERSION = "1"

READER_SYSTEM = (
    "You are a research paper reader building a structured knowledge base. "
    "Extract core methods, key findings, and open questions strictly from the "
    "provided paper content. No hallucination. Cite the paper id in square "
    "brackets for every claim."
)

UPDATER_SYSTEM = (
    "You are a research knowledge base updater. Update a single topic file "
    "based on new papers. Work strictly from the provided content, no "
    "hallucination. Cite the paper id in square brackets for every claim."
)

CHANGE_SYSTEM = (
    "You are a research intelligence analyst monitoring a knowledge base for "
    "changes. Characterize what changed in the latest update: what type of "
    "change occurred and what is notable. Be factual and precise. Return "
    "valid JSON only."
)

GENERATOR_SYSTEM = (
    "You are a forward-looking research strategist. Generate structured, "
    "testable research hypotheses grounded only in the provided material."
)

ALIGNMENT_JUDGE_SYSTEM = (
    "You are a strict scientific alignment judge. Given a research hypothesis "
    "and a candidate paper, score from 0 to 10 how well the paper realizes "
    "the hypothesis: the problem addressed, the method change proposed, and "
    "the expected outcome. 0-2 unrelated; 3-5 same area but different claim; "
    "6-8 the paper substantially validates the hypothesis; 9-10 the paper is "
    "the hypothesis, executed. Respond with exactly two lines:\n"
    "SCORE: <number>\nRATIONALE: <one sentence>"
)

NOVELTY_JUDGE_SYSTEM = (
    "You are an independent novelty judge. You see only the hypothesis "
    "content; you are not told which system produced it. Score four "
    "dimensions from 1 to 10:\n"
    "D1 conceptual originality (new idea vs predictable combination);\n"
    "D2 cross-field synthesis (bridges distinct research areas);\n"
    "D3 gap identification precision (names what prior work cannot do);\n"
    "D4 specificity and falsifiability (concrete task, baseline, expected "
    "outcome, failure condition).\n"
    "Respond with exactly four lines:\nD1: <n>\nD2: <n>\nD3: <n>\nD4: <n>"
)


def paper_line(paper) -> str:
    cats = " ".join(paper.categories)
    return f"- [{paper.id}] {paper.title} | {cats} | {paper.published_at.isoformat()}"


def papers_block(papers, include_text: bool = True, text_chars: int = 1200) -> str:
    """Render papers for a prompt; one header line plus indented content."""
    lines = []
    for p in papers:
        lines.append(paper_line(p))
        content = p.full_text if (include_text and p.full_text) else p.abstract
        if content:
            lines.append("  " + content[:text_chars])
    return "\n".join(lines) if lines else "(none)"


def reader_prompt(topic: str, paper, include_text: bool) -> str:
    return (
        f"Topic: {topic}\n"
        "Paper:\n"
        f"{papers_block([paper], include_text=include_text, text_chars=4000)}\n\n"
        "Return exactly this structure (claims cite the paper id):\n"
        "SUBTOPIC: <short-kebab-case subtopic this paper belongs to>\n"
        "METHODS:\n"
        f"- <method claim> [{paper.id}]\n"
        "FINDINGS:\n"
        f"- <finding claim> [{paper.id}]\n"
        "OPEN_QUESTIONS:\n"
        "- <question>\n"
        "CROSS_REFS:\n"
        f"- <related area note> [{paper.id}]\n"
    )


_LITE_RULES = (
    "Merge each paper's findings into the relevant sections: append new\n"
    "findings with citations, add evidence notes where a paper confirms an\n"
    "existing conclusion, and flag contradictions in place."
)

_CONTRASTIVE_RULES = (
    "Update this topic file by applying these principles to EACH new paper:\n"
    "- New finding/method absent from current content: append with citation\n"
    "- Confirms an existing conclusion: add new evidence, note increased "
    "confidence\n"
    "- Contradicts or refines: rewrite, preserve both positions, mark "
    "[Revised]\n"
    "- Cross-domain connection: note the link"
)

_ENTRIES_FORMAT = (
    "After the file, return one categorization line per paper:\n"
    "BEGIN ENTRIES\n"
    "<paper id> | NEW|CONFIRM|CONTRADICT|CROSS_DOMAIN | <target file name or "
    "CURRENT>\n"
    "END ENTRIES\n"
    "If the new papers introduce a clearly distinct subtopic not covered by "
    "any existing file, add:\n"
    "BEGIN NEW FILE: <kebab-case-name>\n"
    "<full markdown body with the standard four sections>\n"
    "END NEW FILE"
)


def update_prompt(file_name: str, period: str, body: str, papers,
                  contrastive: bool, include_text: bool) -> str:
    parts = [
        f"Topic file: {file_name}",
        f"Period: {period}",
        "",
        "Current content:",
        "BEGIN FILE",
        body,
        "END FILE",
        "",
        "New papers this period:",
        papers_block(papers, include_text=include_text),
        "",
        _CONTRASTIVE_RULES if contrastive else _LITE_RULES,
        "",
        "Size control: keep the file under 200 lines. When approaching the "
        "limit, compress older entries.",
        "",
        "Return the full updated file between markers:",
        "BEGIN UPDATED FILE",
        "<updated markdown>",
        "END UPDATED FILE",
    ]
    if contrastive:
        parts += ["", _ENTRIES_FORMAT]
    return "\n".join(parts)


def change_prompt(before: str, after: str, period: str, papers) -> str:
    return (
        "Knowledge State BEFORE:\n"
        f"{before}\n\n"
        "Knowledge State AFTER:\n"
        f"{after}\n\n"
        f"New Papers ({period}):\n"
        f"{papers_block(papers, include_text=False)}\n\n"
        "Classify the change type:\n"
        "1. INCREMENTAL: routine extension\n"
        "2. CONTRADICTION: revises established finding\n"
        "3. CONVERGENCE: independent papers point to same conclusion\n"
        "4. BRIDGE: connection between previously unrelated topics\n"
        "5. TREND_CONFIRMED: earlier pattern validated\n\n"
        'Return JSON: {"change_type": "...", "reason": "...", '
        '"key_changes": ["..."]}'
    )


HYPOTHESIS_FIELDS = (
    "STATEMENT", "PROBLEM", "METHOD_DELTA", "BASELINE", "EXPECTED_OBSERVABLE",
    "EVALUATION_PLAN", "FAILURE_MODE", "SOURCE_PAPERS", "TRIGGER",
    "NOVELTY", "FEASIBILITY", "IMPACT",
)


def generation_prompt(topic: str, n_windows: int, trajectory: str,
                      knowledge: str, period: str, papers,
                      change_line: str, prior_hypotheses: str,
                      target_count: int, include_text: bool) -> str:
    parts = [
        f'You have been tracking "{topic}" for {n_windows} periods.',
        "",
        "Knowledge Evolution Trajectory:",
        trajectory or "(first window; no trajectory yet)",
        "",
        "Current Knowledge State:",
        knowledge,
        "",
        f"New Papers ({period}):",
        papers_block(papers, include_text=include_text),
    ]
    if change_line:
        parts += ["", f"What Changed: {change_line}"]
    parts += [
        "",
        "Previously Generated Hypotheses:",
        prior_hypotheses or "(none yet)",
        "",
        f"Generate up to {target_count} hypotheses that are conceptually "
        "novel. Consider:",
        "1. Contradictions & tensions",
        "2. Non-obvious bridges",
        "3. Trend extrapolation",
        "4. Gap exploitation",
        "5. Cross-paper synthesis (must yield insight beyond sum of parts)",
        "",
        "Avoid hypotheses that merely integrate existing methods.",
        "",
        "Cite only paper ids shown above. Return each hypothesis between "
        "markers in exactly this field layout:",
        "BEGIN HYPOTHESIS",
        "STATEMENT: <one sentence>",
        "PROBLEM: <what is unsolved>",
        "METHOD_DELTA: <what changes relative to existing methods>",
        "BASELINE: <what it is compared against>",
        "EXPECTED_OBSERVABLE: <measurable predicted outcome>",
        "EVALUATION_PLAN: <how to test it>",
        "FAILURE_MODE: <what would falsify it>",
        "SOURCE_PAPERS: <comma-separated paper ids>",
        "TRIGGER: <label for what motivated it>",
        "NOVELTY: <1-10>",
        "FEASIBILITY: <1-10>",
        "IMPACT: <1-10>",
        "END HYPOTHESIS",
    ]
    return "\n".join(parts)


def alignment_prompt(hypothesis, paper) -> str:
    return (
        "Hypothesis:\n"
        f"STATEMENT: {hypothesis.statement}\n"
        f"PROBLEM: {hypothesis.claim['problem']}\n"
        f"METHOD_DELTA: {hypothesis.claim['method_delta']}\n"
        f"EXPECTED_OBSERVABLE: {hypothesis.claim['expected_observable']}\n\n"
        "Candidate paper:\n"
        f"TITLE: {paper.title}\n"
        f"ABSTRACT: {paper.abstract}"
    )


def novelty_prompt(hypothesis) -> str:
    claim = hypothesis.claim
    return (
        f"STATEMENT: {hypothesis.statement}\n"
        f"PROBLEM: {claim['problem']}\n"
        f"METHOD_DELTA: {claim['method_delta']}\n"
        f"BASELINE: {claim['baseline']}\n"
        f"EXPECTED_OBSERVABLE: {claim['expected_observable']}\n"
        f"EVALUATION_PLAN: {claim['evaluation_plan']}\n"
        f"FAILURE_MODE: {claim['failure_mode']}"
    )
