"""Uniform access to completion and embedding providers.

One configured provider/model per role. Generation runs hot (0.7 by
default), judge roles run cold (0.1). A deterministic mock provider backs
offline runs; the token ledger and call log make every run's cost auditable
and replayable.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError, ProviderError

log = logging.getLogger(__name__)

GENERATION_ROLE = "generation"
JUDGE_ROLES = ("prefilter_judge", "final_judge", "novelty_judge")
ROLES = (GENERATION_ROLE, *JUDGE_ROLES, "keyword", "profile")
EMBED_ROLE = "embedding"

DEFAULT_EMBED_DIM = 1536


def estimate_tokens(text: str) -> int:
    """Whitespace-token estimate x1.3, used when a provider reports no usage."""
    if not text:
        return 0
    return max(1, round(len(text.split()) * 1.3))


@dataclass(frozen=True)
class CompletionRequest:
    role: str
    system: str
    user: str
    temperature: float
    max_output: int = 2048

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ConfigError(f"temperature {self.temperature} outside [0, 2]")
        if self.role not in ROLES:
            raise ConfigError(f"unknown role {self.role!r}")


@dataclass(frozen=True)
class RoleConfig:
    provider: str
    model: str
    temperature: float


@dataclass(frozen=True)
class EmbedConfig:
    provider: str = "mock"
    model: str = "mock-embed"
    dim: int = DEFAULT_EMBED_DIM


class EmbeddingVector:
    """Fixed-dimension real vector with a cached norm."""

    __slots__ = ("values", "norm")

    def __init__(self, values):
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError("embedding must be one-dimensional")
        if not np.all(np.isfinite(arr)):
            raise ValueError("embedding contains non-finite entries")
        self.values = arr
        self.norm = float(np.linalg.norm(arr))

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def unit(self) -> np.ndarray:
        if self.norm == 0.0:
            raise ValueError("zero embedding has no direction")
        return self.values / self.norm

    def tolist(self) -> list[float]:
        return self.values.tolist()


class TokenLedger:
    """Per-role, per-phase input/output token counters. Thread-safe."""

    def __init__(self):
        self._lock = threading.Lock()
        self._counts: dict[tuple[str, str], list[int]] = {}

    def record(self, role: str, phase: str, tokens_in: int, tokens_out: int) -> None:
        if tokens_in < 0 or tokens_out < 0:
            raise ValueError("token counts must be non-negative")
        with self._lock:
            cell = self._counts.setdefault((role, phase), [0, 0])
            cell[0] += tokens_in
            cell[1] += tokens_out

    def totals(self) -> tuple[int, int]:
        with self._lock:
            t_in = sum(c[0] for c in self._counts.values())
            t_out = sum(c[1] for c in self._counts.values())
        return t_in, t_out

    @property
    def total(self) -> int:
        t_in, t_out = self.totals()
        return t_in + t_out

    def to_dict(self) -> dict:
        with self._lock:
            cells = {
                f"{role}/{phase}": {"input": c[0], "output": c[1]}
                for (role, phase), c in sorted(self._counts.items())
            }
        t_in = sum(c["input"] for c in cells.values())
        t_out = sum(c["output"] for c in cells.values())
        return {
            "by_role_phase": cells,
            "total_input": t_in,
            "total_output": t_out,
            "total": t_in + t_out,
        }

    def merge(self, other: "TokenLedger") -> None:
        with other._lock:
            items = list(other._counts.items())
        for (role, phase), (i, o) in items:
            self.record(role, phase, i, o)


def replay_call_log(paths) -> TokenLedger:
    """Rebuild a ledger from call-log JSONL files (the conservation check)."""
    ledger = TokenLedger()
    for path in paths:
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            ledger.record(rec["role"], rec["phase"], rec["tokens_in"], rec["tokens_out"])
    return ledger


class CallLogWriter:
    """Single-writer JSONL call log; one file per pipeline scope."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._seq = 0
        self._fh = self.path.open("w", encoding="utf-8")

    def write(self, record: dict) -> None:
        record = {"seq": self._seq, **record}
        self._seq += 1
        self._fh.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


def validate_provider_separation(role_configs: dict, allow_same_provider: bool = False):
    """Generation and judge roles must resolve to different provider families.

    Returns a list of violation strings (empty when ok). The mock provider is
    exempt so offline test runs can route everything through it.
    """
    violations = []
    gen = role_configs.get(GENERATION_ROLE)
    if gen is None:
        return [f"role {GENERATION_ROLE!r} is not configured"]
    for role in JUDGE_ROLES:
        cfg = role_configs.get(role)
        if cfg is None:
            violations.append(f"role {role!r} is not configured")
            continue
        if cfg.provider == "mock" or gen.provider == "mock":
            continue
        if cfg.provider == gen.provider:
            violations.append(
                f"judge role {role!r} shares provider family "
                f"{cfg.provider!r} with the generation role"
            )
    if violations and allow_same_provider:
        for v in violations:
            log.warning("provider separation (allowed by flag): %s", v)
        return []
    return violations


@dataclass
class _RateGate:
    min_interval: float = 0.0
    last_call: float = field(default=0.0)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def wait(self):
        if self.min_interval <= 0:
            return
        with self.lock:
            now = time.monotonic()
            delta = self.min_interval - (now - self.last_call)
            if delta > 0:
                time.sleep(delta)
            self.last_call = time.monotonic()


class Gateway:
    """Routes role-tagged requests to providers with retries and accounting.

    A gateway instance is scoped to one pipeline (topic/variant) so its call
    log has a single writer; the ledger, providers, and embedding cache are
    shared across scopes and thread-safe.
    """

    MAX_RETRIES = 3
    BACKOFF_BASE = 0.5

    def __init__(
        self,
        role_configs: dict,
        providers: dict,
        embed_config: EmbedConfig = EmbedConfig(),
        ledger: Optional[TokenLedger] = None,
        call_sink: Optional[CallLogWriter] = None,
        embed_cache: Optional[dict] = None,
        rate_gates: Optional[dict] = None,
        backoff_base: Optional[float] = None,
    ):
        self.role_configs = role_configs
        self.providers = providers
        self.embed_config = embed_config
        self.ledger = ledger if ledger is not None else TokenLedger()
        self.call_sink = call_sink
        self._embed_cache = embed_cache if embed_cache is not None else {}
        self._embed_lock = threading.Lock()
        self._rate_gates = rate_gates if rate_gates is not None else {}
        if backoff_base is not None:
            self.BACKOFF_BASE = backoff_base

    def _provider_for(self, family: str):
        try:
            return self.providers[family]
        except KeyError:
            raise ConfigError(f"provider family {family!r} is not configured")

    def _gate(self, family: str) -> _RateGate:
        return self._rate_gates.setdefault(family, _RateGate())

    def complete(self, role: str, system: str, user: str, phase: str,
                 temperature: Optional[float] = None,
                 max_output: int = 2048) -> tuple[str, int, int]:
        """Run one completion; returns (text, tokens_in, tokens_out)."""
        cfg = self.role_configs.get(role)
        if cfg is None:
            raise ConfigError(f"role {role!r} is not configured")
        req = CompletionRequest(
            role=role,
            system=system,
            user=user,
            temperature=cfg.temperature if temperature is None else temperature,
            max_output=max_output,
        )
        provider = self._provider_for(cfg.provider)
        last_err = None
        for attempt in range(self.MAX_RETRIES):
            self._gate(cfg.provider).wait()
            try:
                result = provider.complete(
                    role=req.role, model=cfg.model, system=req.system,
                    user=req.user, temperature=req.temperature,
                    max_output=req.max_output,
                )
                break
            except ProviderError as err:
                last_err = err
                if not err.retryable or attempt == self.MAX_RETRIES - 1:
                    raise ProviderError(
                        f"{cfg.provider}/{cfg.model} failed for role {role}: {err}",
                        retryable=False,
                    )
                delay = self.BACKOFF_BASE * (2**attempt)
                log.warning("provider call failed (%s); retry %d in %.2fs",
                            err, attempt + 1, delay)
                time.sleep(delay)
        else:  # pragma: no cover - loop always breaks or raises
            raise ProviderError(str(last_err), retryable=False)

        text, tokens_in, tokens_out = result
        if tokens_in is None:
            tokens_in = estimate_tokens(system) + estimate_tokens(user)
        if tokens_out is None:
            tokens_out = estimate_tokens(text)
        self.ledger.record(role, phase, tokens_in, tokens_out)
        if self.call_sink is not None:
            self.call_sink.write({
                "role": role,
                "phase": phase,
                "provider": cfg.provider,
                "model": cfg.model,
                "temperature": req.temperature,
                "tokens_in": tokens_in,
                "tokens_out": tokens_out,
                "system_sha": _sha(system),
                "user_sha": _sha(user),
                "output_sha": _sha(text),
            })
        return text, tokens_in, tokens_out

    def embed(self, texts, phase: str) -> list[EmbeddingVector]:
        """Embed texts in order. Results are cached per text content."""
        texts = list(texts)
        if not texts or any(not t for t in texts):
            raise ValueError("embed requires non-empty texts")
        cfg = self.embed_config
        provider = self._provider_for(cfg.provider)
        with self._embed_lock:
            missing = [t for t in dict.fromkeys(texts) if t not in self._embed_cache]
        if missing:
            vectors = self._embed_with_retry(provider, cfg, missing)
            tokens_in = sum(estimate_tokens(t) for t in missing)
            self.ledger.record(EMBED_ROLE, phase, tokens_in, 0)
            if self.call_sink is not None:
                self.call_sink.write({
                    "role": EMBED_ROLE,
                    "phase": phase,
                    "provider": cfg.provider,
                    "model": cfg.model,
                    "temperature": 0.0,
                    "tokens_in": tokens_in,
                    "tokens_out": 0,
                    "batch": len(missing),
                })
            with self._embed_lock:
                for t, vec in zip(missing, vectors):
                    ev = EmbeddingVector(vec)
                    if ev.dim != cfg.dim:
                        raise ProviderError(
                            f"embedding dimension {ev.dim} != configured {cfg.dim}")
                    self._embed_cache[t] = ev
        with self._embed_lock:
            return [self._embed_cache[t] for t in texts]

    def _embed_with_retry(self, provider, cfg, texts):
        last_err = None
        for attempt in range(self.MAX_RETRIES):
            self._gate(cfg.provider).wait()
            try:
                return provider.embed(model=cfg.model, texts=texts, dim=cfg.dim)
            except ProviderError as err:
                last_err = err
                if not err.retryable or attempt == self.MAX_RETRIES - 1:
                    raise ProviderError(f"embedding failed: {err}", retryable=False)
                time.sleep(self.BACKOFF_BASE * (2**attempt))
        raise ProviderError(str(last_err), retryable=False)  # pragma: no cover

    def scoped(self, call_sink: Optional[CallLogWriter]) -> "Gateway":
        """Clone sharing providers/ledger but with its own call log.

        The embedding cache is fresh per scope so call logs stay
        deterministic regardless of topic scheduling.
        """
        return Gateway(
            role_configs=self.role_configs,
            providers=self.providers,
            embed_config=self.embed_config,
            ledger=self.ledger,
            call_sink=call_sink,
            embed_cache={},
            rate_gates=self._rate_gates,
            backoff_base=self.BACKOFF_BASE,
        )


def _sha(text: str) -> str:
    import hashlib

    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]
