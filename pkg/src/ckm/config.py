"""Run configuration: TOML parsing, provider wiring, benchmark topics."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from datetime import date
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .corpus import PhaseCaps, TopicConfig
from .errors import ConfigError
from .evaluation import Thresholds
from .gateway import ROLES, EmbedConfig, RoleConfig
from .metabolism import VARIANTS
from .providers import MockProvider, OpenAICompatProvider
from .sources import (
    SOURCE_URL_ENV,
    ArxivSearchClient,
    JsonlSource,
    SyntheticSource,
)

DEFAULT_ROLE_CONFIGS = {
    "generation": RoleConfig("google", "gemini-2.5-flash", 0.7),
    "prefilter_judge": RoleConfig("openai", "gpt-4o-mini", 0.1),
    "final_judge": RoleConfig("openai", "gpt-4o", 0.1),
    "novelty_judge": RoleConfig("openai", "gpt-5.4", 0.1),
    "keyword": RoleConfig("openai", "gpt-4o", 0.1),
    "profile": RoleConfig("openai", "gpt-4o", 0.1),
}

DEFAULT_EMBEDDING = EmbedConfig(provider="openai", model="text-embedding-3-small",
                                dim=1536)


@dataclass(frozen=True)
class SourceSpec:
    kind: str = "arxiv"
    url: str = ""
    path: str = ""
    papers_per_month: int = 6

    def __post_init__(self):
        if self.kind not in ("arxiv", "synthetic", "jsonl"):
            raise ConfigError(f"unknown source kind {self.kind!r}")
        if self.kind == "jsonl" and not self.path:
            raise ConfigError("jsonl source requires a path")


@dataclass(frozen=True)
class RunConfig:
    run_id: str
    seed: int
    topics: tuple
    t_init: date
    t0: date
    t_end: date
    t_val_end: date
    window_months: int
    caps: PhaseCaps
    variants: tuple
    per_window: int
    thresholds: Thresholds
    role_configs: dict
    endpoints: dict
    limits: dict
    embedding: EmbedConfig
    source: SourceSpec

    def topic_config(self, topic: str) -> TopicConfig:
        return TopicConfig(
            topic=topic, t_init=self.t_init, t0=self.t0, t_end=self.t_end,
            t_val_end=self.t_val_end, window_months=self.window_months,
            caps=self.caps,
        )


def benchmark_topics() -> list[dict]:
    """The shipped 50-topic benchmark with category labels."""
    raw = resources.files("ckm.data").joinpath("topics50.json").read_text("utf-8")
    return json.loads(raw)["topics"]


def _require_date(table: dict, key: str) -> date:
    v = table.get(key)
    if not isinstance(v, date):
        raise ConfigError(f"[phases].{key} must be a TOML date")
    return v


def parse_config(text: str) -> RunConfig:
    """Parse and validate a run configuration from TOML text."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"invalid TOML: {err}")

    run = data.get("run", {})
    run_id = str(run.get("id", "")).strip()
    if not run_id or "/" in run_id:
        raise ConfigError("[run].id must be a non-empty path-safe string")
    seed = int(run.get("seed", 0))

    phases = data.get("phases", {})
    t_init = _require_date(phases, "t_init")
    t0 = _require_date(phases, "t0")
    t_end = _require_date(phases, "t_end")
    t_val_end = _require_date(phases, "t_val_end")
    window_months = int(phases.get("window_months", 2))

    caps_tbl = data.get("caps", {})
    caps = PhaseCaps(
        init=int(caps_tbl.get("init", 48)),
        evolution=int(caps_tbl.get("evolution", 96)),
        validation=int(caps_tbl.get("validation", 180)),
    )

    topics_tbl = data.get("topics", {})
    if topics_tbl.get("benchmark"):
        topics = tuple(t["name"] for t in benchmark_topics())
    else:
        topics = tuple(str(t) for t in topics_tbl.get("names", ()))
    if not topics:
        raise ConfigError("[topics] must list names or set benchmark = true")
    if len(set(topics)) != len(topics):
        raise ConfigError("topic names must be unique")

    variants = tuple(str(v).lower() for v in
                     data.get("variants", {}).get("enabled", ("lite",)))
    unknown = [v for v in variants if v not in VARIANTS]
    if unknown:
        raise ConfigError(f"unknown variants {unknown}; choose from {sorted(VARIANTS)}")

    per_window = int(data.get("generation", {}).get("per_window", 3))
    if per_window <= 0:
        raise ConfigError("[generation].per_window must be positive")

    thr = data.get("thresholds", {})
    try:
        thresholds = Thresholds(
            prefilter=float(thr.get("prefilter", 5.0)),
            hit=float(thr.get("hit", 6.0)),
            candidates=int(thr.get("candidates", 30)),
        )
    except ValueError as err:
        raise ConfigError(f"[thresholds]: {err}")

    role_configs = dict(DEFAULT_ROLE_CONFIGS)
    providers_tbl = data.get("providers", {})
    for role in ROLES:
        tbl = providers_tbl.get(role)
        if tbl:
            base = role_configs[role]
            role_configs[role] = RoleConfig(
                provider=str(tbl.get("provider", base.provider)),
                model=str(tbl.get("model", base.model)),
                temperature=float(tbl.get("temperature", base.temperature)),
            )
    endpoints = {k: str(v) for k, v in providers_tbl.get("endpoints", {}).items()}
    limits = {k: float(v) for k, v in data.get("limits", {}).items()}

    emb_tbl = data.get("embedding", {})
    embedding = EmbedConfig(
        provider=str(emb_tbl.get("provider", DEFAULT_EMBEDDING.provider)),
        model=str(emb_tbl.get("model", DEFAULT_EMBEDDING.model)),
        dim=int(emb_tbl.get("dim", DEFAULT_EMBEDDING.dim)),
    )
    if embedding.dim <= 0:
        raise ConfigError("[embedding].dim must be positive")

    src_tbl = data.get("source", {})
    source = SourceSpec(
        kind=str(src_tbl.get("kind", "arxiv")),
        url=str(src_tbl.get("url", "")),
        path=str(src_tbl.get("path", "")),
        papers_per_month=int(src_tbl.get("papers_per_month", 6)),
    )

    cfg = RunConfig(
        run_id=run_id, seed=seed, topics=topics, t_init=t_init, t0=t0,
        t_end=t_end, t_val_end=t_val_end, window_months=window_months,
        caps=caps, variants=variants, per_window=per_window,
        thresholds=thresholds, role_configs=role_configs, endpoints=endpoints,
        limits=limits, embedding=embedding, source=source,
    )
    cfg.topic_config(topics[0])  # validates phase geometry once
    return cfg


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def build_source(config: RunConfig, mock: bool, seed: int):
    """Instantiate the paper source. ``--mock`` forces an offline backend."""
    spec = config.source
    if spec.kind == "jsonl":
        return JsonlSource(spec.path)
    if spec.kind == "synthetic" or mock:
        return SyntheticSource(seed=seed, papers_per_month=spec.papers_per_month)
    url = spec.url or os.environ.get(SOURCE_URL_ENV)
    return ArxivSearchClient(base_url=url)


def build_runtime(config: RunConfig, mock: bool, seed: int):
    """Resolve role configs, provider instances, and the embedding config.

    With ``mock`` every role (and the embedder) routes to the deterministic
    offline provider; temperatures are preserved so routing stays faithful.
    """
    if mock:
        role_configs = {
            role: RoleConfig("mock", f"mock-{cfg.model}", cfg.temperature)
            for role, cfg in config.role_configs.items()
        }
        embed = EmbedConfig(provider="mock", model="mock-embed",
                            dim=config.embedding.dim)
        return role_configs, {"mock": MockProvider(seed=seed)}, embed

    role_configs = dict(config.role_configs)
    embed = config.embedding
    families = {cfg.provider for cfg in role_configs.values()}
    if embed.provider != "mock":
        families.add(embed.provider)
    providers = {}
    for family in sorted(families):
        if family == "mock":
            providers[family] = MockProvider(seed=seed)
            continue
        endpoint = config.endpoints.get(family)
        if not endpoint:
            raise ConfigError(
                f"no endpoint configured for provider family {family!r}; "
                f"add [providers.endpoints].{family}")
        client = OpenAICompatProvider(family=family, base_url=endpoint)
        if not os.environ.get(client.api_key_env):
            raise ConfigError(
                f"missing credential for provider {family!r}: set "
                f"{client.api_key_env}")
        providers[family] = client
    if "mock" in {cfg.provider for cfg in role_configs.values()} and "mock" not in providers:
        providers["mock"] = MockProvider(seed=seed)
    return role_configs, providers, embed
