"""Provider backends: a deterministic offline mock and an OpenAI-compatible
HTTP client.

The mock's completions are a pure function of (role, system, user,
temperature, seed), so a full pipeline run with a fixed seed is
bit-reproducible. Judge roles return parseable score payloads; the
generation role returns structured extraction/update/hypothesis payloads in
the same wire formats the real providers are prompted for.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from typing import Optional

import numpy as np

from .errors import ProviderError

PAPER_LINE_RE = re.compile(
    r"^- \[(?P<id>\d{4}\.\d{4,5})\] (?P<title>.*?) \| (?P<cats>[^|]*) \| (?P<date>\d{4}-\d{2}-\d{2})\s*$",
    re.MULTILINE,
)

_SUBTOPIC_POOL = ("foundations", "evaluation-methods", "emerging-applications")
_TRIGGER_POOL = (
    "GAP", "BRIDGE", "CONTRADICTION", "CROSS_PAPER",
    "GAP_EXPLOITATION", "NON_OBVIOUS_BRIDGE", "TREND_EXTRAPOLATION",
)
_CHANGE_POOL = (
    "INCREMENTAL", "INCREMENTAL", "CONVERGENCE", "BRIDGE",
    "CONTRADICTION", "TREND_CONFIRMED", "Gap_Exploitation",
)


def _digest(*parts) -> bytes:
    return hashlib.sha256("\x1f".join(str(p) for p in parts).encode("utf-8")).digest()


class _HashStream:
    """Deterministic stream of uniforms/ints derived from one digest."""

    def __init__(self, *parts):
        self._seed = _digest(*parts)
        self._counter = 0

    def _next(self) -> int:
        h = hashlib.sha256(self._seed + self._counter.to_bytes(4, "big")).digest()
        self._counter += 1
        return int.from_bytes(h[:8], "big")

    def uniform(self) -> float:
        return self._next() / 2**64

    def randint(self, n: int) -> int:
        return self._next() % n

    def choice(self, seq):
        return seq[self.randint(len(seq))]


class MockProvider:
    """Offline provider with deterministic, structurally valid outputs."""

    family = "mock"

    def __init__(self, seed: int = 0):
        self.seed = seed

    # -- completions ------------------------------------------------------

    def complete(self, role, model, system, user, temperature, max_output):
        hs = _HashStream(self.seed, role, system, user, temperature)
        if role in ("prefilter_judge", "final_judge"):
            text = self._judge_payload(role, hs)
        elif role == "novelty_judge":
            text = self._novelty_payload(hs)
        elif role == "generation":
            if "BEGIN HYPOTHESIS" in user:
                text = self._hypotheses_payload(user, hs)
            elif "BEGIN UPDATED FILE" in user:
                text = self._update_payload(user, hs)
            elif "SUBTOPIC:" in user:
                text = self._extraction_payload(user, hs)
            elif "Return JSON" in user or "change_type" in user:
                text = self._change_payload(user, hs)
            else:
                text = f"[mock:{model}] acknowledged."
        else:  # keyword / profile roles
            words = sorted({w for w in re.findall(r"[a-z]{6,}", user.lower())})[:8]
            text = ", ".join(words) if words else "none"
        return text, None, None

    def _judge_payload(self, role, hs):
        u1, u2, u3 = hs.uniform(), hs.uniform(), hs.uniform()
        if role == "prefilter_judge":
            score = round(1.0 + 4.2 * u1 + 0.8 * u1 * u1, 1)
        elif u3 > 0.94:
            score = round(6.0 + 2.5 * u2, 1)
        else:
            score = min(5.9, round(1.0 + 4.9 * u1, 1))
        return (
            f"SCORE: {score}\n"
            f"RATIONALE: Alignment judged on problem overlap, method overlap, "
            f"and outcome specificity (confidence {round(0.4 + 0.5 * u2, 2)})."
        )

    def _novelty_payload(self, hs):
        dims = [round(3.0 + 6.0 * hs.uniform(), 1) for _ in range(4)]
        lines = [f"D{i + 1}: {v}" for i, v in enumerate(dims)]
        lines.append("NOTES: Scored blind from the hypothesis content alone.")
        return "\n".join(lines)

    def _change_payload(self, user, hs):
        papers = PAPER_LINE_RE.findall(user)
        label = hs.choice(_CHANGE_POOL)
        key_changes = [
            f"{title.split(' for ')[0]} evidence from {pid}"
            for pid, title, _, _ in papers[:3]
        ] or ["no notable movement"]
        payload = {
            "change_type": label,
            "reason": f"The latest window shifts emphasis toward "
                      f"{key_changes[0].split(' evidence')[0].lower()}.",
            "key_changes": key_changes,
        }
        return json.dumps(payload)

    def _extraction_payload(self, user, hs):
        papers = PAPER_LINE_RE.findall(user)
        if not papers:
            return "SUBTOPIC: foundations\nMETHODS:\nFINDINGS:\nOPEN_QUESTIONS:\n"
        pid, title, _, _ = papers[0]
        words = [w.lower() for w in re.findall(r"[A-Za-z]{4,}", title)]
        words = (words + ["general", "modeling"])[:4]
        sub = _SUBTOPIC_POOL[hs.randint(len(_SUBTOPIC_POOL))]
        return (
            f"SUBTOPIC: {sub}\n"
            "METHODS:\n"
            f"- {words[0].capitalize()} {words[1]} "
            f"pipeline with staged training [{pid}]\n"
            "FINDINGS:\n"
            f"- Reported gains from {words[-1]} supervision on standard "
            f"benchmarks [{pid}]\n"
            "OPEN_QUESTIONS:\n"
            f"- Whether {words[0]} effects persist at larger scales\n"
            "CROSS_REFS:\n"
            f"- Related to adjacent work on {words[-1]} [{pid}]\n"
        )

    def _update_payload(self, user, hs):
        papers = PAPER_LINE_RE.findall(user)
        body = _between(user, "BEGIN FILE\n", "\nEND FILE")
        lines = body.split("\n") if body else []
        additions, revised = [], []
        entry_lines = []
        contrastive = "BEGIN ENTRIES" in user
        for pid, title, _, _ in papers:
            phs = _HashStream(self.seed, "entry", pid, body[:120])
            words = [w.lower() for w in re.findall(r"[A-Za-z]{4,}", title)]
            words = (words + ["reported", "finding"])[:3]
            claim = f"- {' '.join(words).capitalize()} shows measurable effect [{pid}]"
            category = ("NEW", "NEW", "NEW", "CONFIRM", "CONTRADICT", "CROSS_DOMAIN")[
                phs.randint(6)
            ]
            if not contrastive:
                additions.append(claim)
                continue
            if category == "CONFIRM":
                additions.append(claim.replace("shows", "adds confirming evidence of"))
            elif category == "CONTRADICT":
                revised.append(
                    f"- [Revised] Earlier entries favored the prior consensus; "
                    f"{' '.join(words)} now points the other way; both positions "
                    f"retained pending replication [{pid}]"
                )
            elif category == "CROSS_DOMAIN":
                additions.append(
                    f"- Cross-domain link: {' '.join(words)} connects to adjacent "
                    f"literature [{pid}]"
                )
            else:
                additions.append(claim)
            entry_lines.append(f"{pid} | {category} | CURRENT")
        updated = _insert_findings(lines, additions + revised)
        out = ["BEGIN UPDATED FILE", *updated, "END UPDATED FILE"]
        if contrastive and entry_lines:
            out += ["BEGIN ENTRIES", *entry_lines, "END ENTRIES"]
        if contrastive and papers and hs.randint(4) == 0:
            pid, title, _, _ = papers[hs.randint(len(papers))]
            word = (re.findall(r"[A-Za-z]{5,}", title) or ["directions"])[0].lower()
            out += [
                f"BEGIN NEW FILE: emerging-{word}",
                f"# Emerging {word}",
                "",
                "## Known methods",
                f"- Initial {word} formulation under active study [{pid}]",
                "",
                "## Established findings",
                f"- Early evidence that {word} behaves distinctly [{pid}]",
                "",
                "## Open questions",
                f"- Scope of {word} beyond the first reports",
                "",
                "## Cross-references",
                f"- Seeded from this period's papers [{pid}]",
                "END NEW FILE",
            ]
        return "\n".join(out)

    def _hypotheses_payload(self, user, hs):
        papers = PAPER_LINE_RE.findall(user)
        topic = _between(user, 'tracking "', '"') or "the field"
        count = 2 if hs.randint(6) == 0 else 3
        blocks = []
        for k in range(count):
            bhs = _HashStream(self.seed, "hyp", user[:160], len(user), k)
            picks = papers[bhs.randint(len(papers)):][:2] if papers else []
            ids = ", ".join(pid for pid, *_ in picks)
            words = []
            for _, title, _, _ in picks:
                words += [w.lower() for w in re.findall(r"[A-Za-z]{5,}", title)][:2]
            words = (words + ["latent", "transfer", "caching", "routing"])[:4]
            n, f, i = (round(1.0 + 9.0 * bhs.uniform(), 1) for _ in range(3))
            blocks.append("\n".join([
                "BEGIN HYPOTHESIS",
                f"STATEMENT: Combining {words[0]} objectives with {words[1]} "
                f"signals will improve {topic} beyond current {words[2]} baselines.",
                f"PROBLEM: Current {topic} systems underuse {words[0]} structure.",
                f"METHOD_DELTA: Add a {words[1]}-aware module on top of the "
                f"strongest published {words[2]} pipeline.",
                f"BASELINE: The {words[2]} approach reported in recent work.",
                f"EXPECTED_OBSERVABLE: At least moderate gains on held-out "
                f"{words[3]} benchmarks.",
                "EVALUATION_PLAN: Reproduce the baseline, ablate the new module, "
                "report mean and variance over three seeds.",
                f"FAILURE_MODE: Gains vanish when {words[0]} supervision is noisy.",
                f"SOURCE_PAPERS: {ids}",
                f"TRIGGER: {bhs.choice(_TRIGGER_POOL)}",
                f"NOVELTY: {n}",
                f"FEASIBILITY: {f}",
                f"IMPACT: {i}",
                "END HYPOTHESIS",
            ]))
        if hs.randint(13) == 0:
            blocks.append(
                "BEGIN HYPOTHESIS\nPROBLEM: malformed block without a statement\n"
                "END HYPOTHESIS"
            )
        return "\n\n".join(blocks)

    # -- embeddings -------------------------------------------------------

    def embed(self, model, texts, dim):
        out = []
        for text in texts:
            seed = int.from_bytes(_digest("embed", dim, text)[:8], "big")
            rng = np.random.default_rng(seed)
            vec = rng.standard_normal(dim)
            out.append(vec / np.linalg.norm(vec))
        return out


def _between(text: str, start: str, end: str) -> Optional[str]:
    i = text.find(start)
    if i < 0:
        return None
    j = text.find(end, i + len(start))
    if j < 0:
        return None
    return text[i + len(start):j]


def _insert_findings(lines: list[str], additions: list[str]) -> list[str]:
    """Place new bullets at the end of the findings section when present."""
    if not additions:
        return list(lines)
    out = list(lines)
    anchor = None
    for idx, line in enumerate(out):
        if line.strip().lower().startswith("## open questions"):
            anchor = idx
            break
    if anchor is None:
        return out + additions
    while anchor > 0 and not out[anchor - 1].strip():
        anchor -= 1
    return out[:anchor] + additions + out[anchor:]


class OpenAICompatProvider:
    """Chat-completions + embeddings client for OpenAI-style HTTP APIs.

    Credentials come from ``CKM_<FAMILY>_KEY``. Transport failures and 5xx
    responses raise retryable errors; the gateway owns the retry loop.
    """

    def __init__(self, family: str, base_url: str, timeout: float = 60.0):
        self.family = family
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    @property
    def api_key_env(self) -> str:
        return f"CKM_{self.family.upper()}_KEY"

    def _headers(self):
        key = os.environ.get(self.api_key_env)
        if not key:
            raise ProviderError(
                f"missing credential: set {self.api_key_env}", retryable=False)
        return {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}

    def _post(self, path: str, payload: dict) -> dict:
        import httpx

        try:
            resp = httpx.post(
                f"{self.base_url}{path}", json=payload,
                headers=self._headers(), timeout=self.timeout,
            )
        except httpx.HTTPError as err:
            raise ProviderError(f"transport failure: {err}", retryable=True)
        if resp.status_code == 429 or resp.status_code >= 500:
            raise ProviderError(f"HTTP {resp.status_code}", retryable=True)
        if resp.status_code >= 400:
            raise ProviderError(f"HTTP {resp.status_code}: {resp.text[:200]}",
                                retryable=False)
        return resp.json()

    def complete(self, role, model, system, user, temperature, max_output):
        data = self._post("/chat/completions", {
            "model": model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": temperature,
            "max_tokens": max_output,
        })
        try:
            text = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise ProviderError("malformed completion response", retryable=True)
        usage = data.get("usage") or {}
        return text, usage.get("prompt_tokens"), usage.get("completion_tokens")

    def embed(self, model, texts, dim):
        data = self._post("/embeddings", {"model": model, "input": list(texts)})
        try:
            rows = sorted(data["data"], key=lambda r: r["index"])
            return [row["embedding"] for row in rows]
        except (KeyError, TypeError):
            raise ProviderError("malformed embedding response", retryable=True)
