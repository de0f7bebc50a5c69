from __future__ import annotations

from datetime import date

import pytest

from ckm.corpus import Paper, TopicConfig
from ckm.gateway import ROLES, EmbedConfig, Gateway, RoleConfig
from ckm.providers import MockProvider


def make_mock_gateway(seed=0, dim=64, sink=None, ledger=None):
    role_configs = {
        role: RoleConfig("mock", "mock-model",
                         0.7 if role == "generation" else 0.1)
        for role in ROLES
    }
    return Gateway(
        role_configs=role_configs,
        providers={"mock": MockProvider(seed=seed)},
        embed_config=EmbedConfig(provider="mock", model="mock-embed", dim=dim),
        call_sink=sink,
        ledger=ledger,
    )


@pytest.fixture
def mock_gateway():
    return make_mock_gateway()


def make_paper(pid="2401.00001", day=date(2024, 1, 15), cats=("cs.CL",),
               title="Adaptive retrieval for grounded reasoning",
               full_text="Long form content for the paper body."):
    return Paper(
        id=pid,
        title=title,
        abstract=f"Abstract of {title.lower()}.",
        full_text=full_text,
        published_at=day,
        categories=tuple(cats),
    )


@pytest.fixture
def paper_factory():
    return make_paper


@pytest.fixture
def topic_config():
    return TopicConfig(
        topic="adaptive retrieval",
        t_init=date(2023, 1, 1),
        t0=date(2024, 1, 1),
        t_end=date(2025, 1, 1),
        t_val_end=date(2026, 1, 1),
        window_months=2,
    )


MOCK_CONFIG_TEMPLATE = """\
[run]
id = "{run_id}"
seed = {seed}

[phases]
t_init = 2023-01-01
t0 = 2024-01-01
t_end = 2025-01-01
t_val_end = 2026-01-01
window_months = 2

[caps]
init = {init_cap}
evolution = {evolution_cap}
validation = {validation_cap}

[topics]
names = [{topics}]

[variants]
enabled = [{variants}]

[source]
kind = "synthetic"
papers_per_month = {papers_per_month}

[embedding]
dim = {dim}
"""


def mock_config_text(run_id="demo", seed=42,
                     topics=("adaptive retrieval",),
                     variants=("lite", "full", "batch"),
                     init_cap=8, evolution_cap=30, validation_cap=24,
                     papers_per_month=4, dim=128):
    return MOCK_CONFIG_TEMPLATE.format(
        run_id=run_id, seed=seed,
        topics=", ".join(f'"{t}"' for t in topics),
        variants=", ".join(f'"{v}"' for v in variants),
        init_cap=init_cap, evolution_cap=evolution_cap,
        validation_cap=validation_cap,
        papers_per_month=papers_per_month, dim=dim,
    )


@pytest.fixture
def config_text_factory():
    return mock_config_text
