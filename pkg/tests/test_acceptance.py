"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest -s tests/test_acceptance.py` to see the per-criterion
lines. Everything here runs offline against the deterministic mock
provider and the shipped fixtures.
"""

from __future__ import annotations

import hashlib
import json
import random
import time
from datetime import date, timedelta
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from ckm import fixtures
from ckm.analysis import (
    crosstab_trigger_drift,
    rank_correlation,
    window_dynamics,
)
from ckm.analysis.stats import cohens_d, wilcoxon_signed_rank
from ckm.corpus import Window, add_months, partition_windows
from ckm.errors import LeakageError
from ckm.evaluation import (
    aggregate_metrics,
    compute_topic_metrics,
    hits_at_threshold,
)
from ckm.gateway import Gateway, RoleConfig, replay_call_log, TokenLedger, CallLogWriter
from ckm.kbdiff import KnowledgeDiff, apply_diff
from ckm.knowledge import KnowledgeBase, TopicFile, load_snapshot
from ckm.kbupdate import update_knowledge
from ckm.metabolism import GenerationContext, TrajectorySummary, generate_hypotheses, get_variant
from ckm.reporting import token_efficiency
from ckm.service import create_app
from tests.conftest import make_mock_gateway, make_paper, mock_config_text
from tests.test_stats import oracle_spearman_rho, oracle_wilcoxon_exact

E2E_TOPICS = ("adaptive retrieval", "symbolic reasoning agents",
              "latent program induction")
E2E_VARIANTS = ("lite", "full", "batch")


def _ok(n: int, name: str) -> None:
    print(f"ACCEPTANCE {n:02d} {name}: PASS")


# -- criterion 1: windowing exactness ----------------------------------------

def test_acceptance_01_windowing_exactness():
    started = time.perf_counter()
    windows = partition_windows([], date(2024, 1, 1), date(2025, 1, 1), 2)
    assert [w.label for w in windows] == [
        "2024-01", "2024-03", "2024-05", "2024-07", "2024-09", "2024-11"]
    assert len(windows) == 6

    rng = random.Random(1)
    for _ in range(200):
        t0 = date(rng.randint(2015, 2027), rng.randint(1, 12),
                  rng.randint(1, 28))
        width = rng.randint(1, 6)
        count = rng.randint(1, 12)
        t_end = add_months(t0, width * count)
        span = (t_end - t0).days
        papers = [
            make_paper(pid=f"{2100 + i:04d}.{10000 + i}",
                       day=t0 + timedelta(days=rng.randrange(span)))
            for i in range(rng.randint(0, 25))
        ]
        windows = partition_windows(papers, t0, t_end, width)
        assert len(windows) == count
        assert windows[0].start == t0 and windows[-1].end == t_end
        for a, b in zip(windows, windows[1:]):
            assert a.end == b.start  # disjoint cover, no gaps
        assert sum(len(w.papers) for w in windows) == len(papers)
        for w in windows:
            for p in w.papers:
                assert w.start <= p.published_at < w.end
    elapsed = time.perf_counter() - started
    assert elapsed < 1.0, f"windowing took {elapsed:.2f}s"
    _ok(1, "windowing exactness")


# -- criterion 2: leakage guard ------------------------------------------------

class ExplodingProvider:
    """Any completion proves the guard ran after a provider call."""

    family = "exploding"

    def complete(self, *args, **kwargs):
        raise AssertionError("provider called despite leakage")

    def embed(self, *args, **kwargs):
        raise AssertionError("provider called despite leakage")


def _guarded_gateway():
    return Gateway(role_configs={"generation": RoleConfig("exploding", "x", 0.1)},
                   providers={"exploding": ExplodingProvider()})


HYP_TEMPLATE = """BEGIN HYPOTHESIS
STATEMENT: s
PROBLEM: p
METHOD_DELTA: m
BASELINE: b
EXPECTED_OBSERVABLE: e
EVALUATION_PLAN: ev
FAILURE_MODE: f
SOURCE_PAPERS: {ids}
TRIGGER: GAP
NOVELTY: 5.0
FEASIBILITY: 5.0
IMPACT: 5.0
END HYPOTHESIS"""


class OneShotProvider:
    family = "oneshot"

    def __init__(self, text):
        self.text = text

    def complete(self, *args, **kwargs):
        return self.text, None, None

    def embed(self, *args, **kwargs):
        raise AssertionError("not used")


def test_acceptance_02_leakage_guard():
    started = time.perf_counter()
    rng = random.Random(2)
    kb = KnowledgeBase(topic="t", window_index=0, files=(
        TopicFile("core", "# core\n\n## Known methods\n- m [2401.00001]"),))
    cases = 0

    for _ in range(400):  # future paper in the evolution stream
        t0 = date(2024, rng.randint(1, 6), 1)
        t_end = add_months(t0, 6)
        future = make_paper(
            pid=f"97{rng.randint(10, 99)}.{rng.randint(10000, 99999)}",
            day=t_end + timedelta(days=rng.randint(0, 900)))
        inside = make_paper(pid="2403.00001",
                            day=t0 + timedelta(days=rng.randint(0, 30)))
        with pytest.raises(LeakageError) as err:
            partition_windows([inside, future], t0, t_end, 2)
        assert err.value.exit_code == 4
        cases += 1

    for _ in range(400):  # poisoned window must fail before any provider call
        start = date(2024, rng.randint(1, 10), 1)
        end = add_months(start, 2)
        poisoned = Window(index=1, start=start, end=end, papers=(
            make_paper(pid="2404.00001",
                       day=end + timedelta(days=rng.randint(0, 400))),))
        with pytest.raises(LeakageError) as err:
            update_knowledge(_guarded_gateway(), kb, poisoned, "lite")
        assert err.value.exit_code == 4
        cases += 1

    window = Window(index=1, start=date(2024, 1, 1), end=date(2024, 3, 1),
                    papers=(make_paper(pid="2401.00002",
                                       day=date(2024, 1, 10)),))
    for _ in range(200):  # future citation never reaches a generation context
        future_id = f"98{rng.randint(10, 99)}.{rng.randint(10000, 99999)}"
        gw = Gateway(
            role_configs={"generation": RoleConfig("oneshot", "o", 0.1)},
            providers={"oneshot": OneShotProvider(
                HYP_TEMPLATE.format(ids=future_id))})
        ctx = GenerationContext(
            topic="t", variant=get_variant("lite"), window=window,
            knowledge=kb.with_files(kb.files, 1),
            trajectory=TrajectorySummary(), prior_hypotheses=[],
            visible_dates={"2401.00002": date(2024, 1, 10)})
        hyps = generate_hypotheses(gw, ctx)
        assert hyps == []  # unseen/future citation rejected
        cases += 1

    elapsed = time.perf_counter() - started
    assert cases == 1000
    assert elapsed < 10.0, f"leakage fuzzing took {elapsed:.2f}s"
    _ok(2, "leakage guard")


# -- criterion 3: end-to-end mock run -------------------------------------------

def _drive_pipeline(runs_root: Path) -> float:
    config = mock_config_text(
        run_id="e2e", seed=1234, topics=E2E_TOPICS, variants=E2E_VARIANTS,
        init_cap=6, evolution_cap=24, validation_cap=20,
        papers_per_month=3, dim=96)
    started = time.perf_counter()
    with TestClient(create_app(runs_root=runs_root)) as client:
        resp = client.post("/runs", json={"config_toml": config, "mock": True})
        assert resp.status_code == 200, resp.text
        assert client.post("/runs/e2e/init", json={"jobs": 1}).status_code == 200
        for variant in E2E_VARIANTS:
            resp = client.post("/runs/e2e/evolve",
                               json={"variant": variant, "jobs": 1})
            assert resp.status_code == 200, resp.text
        resp = client.post("/runs/e2e/evaluate", json={"jobs": 1})
        assert resp.status_code == 200, resp.text
        assert client.post("/runs/e2e/analyze").status_code == 200
        assert client.post("/runs/e2e/report").status_code == 200
    return time.perf_counter() - started


def _tree_hashes(root: Path) -> dict:
    return {
        p.relative_to(root).as_posix():
            hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*")) if p.is_file()
    }


@pytest.fixture(scope="module")
def e2e_runs(tmp_path_factory):
    root_a = tmp_path_factory.mktemp("e2e-a")
    root_b = tmp_path_factory.mktemp("e2e-b")
    elapsed_a = _drive_pipeline(root_a)
    _drive_pipeline(root_b)
    return root_a / "e2e", root_b / "e2e", elapsed_a


def test_acceptance_03_end_to_end_mock_run(e2e_runs):
    run_a, run_b, elapsed = e2e_runs
    assert elapsed < 60.0, f"pipeline took {elapsed:.1f}s"

    expected = ["config.toml", "run.json", "manifest.json", "ledger.json",
                "metrics.json", "analysis/crosstab.csv",
                "analysis/quadrants.csv", "analysis/windows.csv",
                "analysis/trajectories.csv", "analysis/diagnostics.json",
                "analysis/embeddings.jsonl", "report/report.json",
                "report/comparisons.csv", "report/tokens.csv",
                "report/metrics.csv"]
    for rel in expected:
        assert (run_a / rel).exists(), f"missing {rel}"
    for topic_slug in ("adaptive-retrieval", "symbolic-reasoning-agents",
                       "latent-program-induction"):
        assert (run_a / topic_slug / "kb" / "w0").is_dir()
        for variant in E2E_VARIANTS:
            vdir = run_a / topic_slug / variant
            for name in ("hypotheses.jsonl", "signals.jsonl",
                         "trajectory.md", "evaluation.jsonl"):
                assert (vdir / name).exists(), f"missing {vdir / name}"
            windows = 6 if variant != "batch" else 1
            for w in range(1, windows + 1):
                assert (vdir / "kb" / f"w{w}").is_dir()
                assert (vdir / "kb" / f"w{w}.diff.json").exists()

    hashes_a, hashes_b = _tree_hashes(run_a), _tree_hashes(run_b)
    assert hashes_a == hashes_b  # bit-identical rerun
    _ok(3, "end-to-end mock run")


# -- criterion 4: statistics oracle suite ---------------------------------------

def test_acceptance_04_statistics_oracles():
    started = time.perf_counter()
    rng = random.Random(44)
    for _ in range(30):  # exact Wilcoxon against 2^n sign enumeration
        n = rng.randint(5, 10)
        a = [round(rng.gauss(0, 1), 2) for _ in range(n)]
        b = [x + rng.choice([0.0, 0.5, -0.5, 1.0, -1.0, 2.0]) for x in a]
        mine = wilcoxon_signed_rank(a, b)
        _, p_exact = oracle_wilcoxon_exact(a, b)
        assert abs(mine.p_value - p_exact) < 1e-9

    assert cohens_d([1, 2, 3], [2, 3, 4]) == -1.0

    for _ in range(500):  # Spearman against brute-force rank computation
        n = rng.randint(5, 40)
        x = [round(rng.gauss(0, 1), 1) for _ in range(n)]
        y = [round(rng.gauss(0, 1), 1) for _ in range(n)]
        try:
            mine = rank_correlation(x, y, method="spearman")
        except ValueError:
            continue
        assert abs(mine.statistic - oracle_spearman_rho(x, y)) < 1e-9

    elapsed = time.perf_counter() - started
    assert elapsed < 10.0, f"oracle suite took {elapsed:.2f}s"
    _ok(4, "statistics oracle suite")


# -- criteria 5-8: fixture arithmetic -------------------------------------------

def _headline_aggregate():
    records = fixtures.headline_records()
    by_topic = {}
    for r in records:
        by_topic.setdefault(r.topic, []).append(r)
    per_topic = {t: compute_topic_metrics(t, rs) for t, rs in by_topic.items()}
    return records, aggregate_metrics(per_topic)


def test_acceptance_05_headline_metrics_fixture():
    _, agg = _headline_aggregate()
    assert abs(agg["hit_rate_mean"] - 5.8) <= 0.05
    assert abs(agg["yield_mean"] - 17.3) <= 0.05
    assert agg["coverage"] == "36/50"
    assert agg["unique_hits"] == 64
    assert abs(agg["hyps_per_hit"] - 13.5) <= 0.05
    _ok(5, "headline metrics fixture")


def test_acceptance_06_crosstab_fixture():
    result = crosstab_trigger_drift(fixtures.crosstab_records())
    rows = {row.trigger: row for row in result.rows}
    gap = rows["GAP_EXPLOITATION"]
    assert gap.low_n == 9 and round(gap.low_hit_rate, 1) == 33.3
    assert gap.high_n == 18 and gap.high_hit_rate == 0.0
    assert result.low_hits == 10 and result.low_hits + result.high_hits == 12
    _ok(6, "trigger-by-drift crosstab fixture")


def test_acceptance_07_window_dynamics_fixture():
    rows = {r["window"]: r for r in window_dynamics(fixtures.window_records())}
    first, last = rows["2024-01"], rows["2024-11"]
    assert (first["n"], round(first["novelty_mean"], 2),
            round(first["hit_rate"], 1)) == (144, 6.73, 3.5)
    assert (last["n"], round(last["novelty_mean"], 2),
            round(last["hit_rate"], 1)) == (147, 6.86, 0.0)
    expected = {"2024-03": (147, 6.81, 0.7), "2024-05": (155, 6.86, 1.3),
                "2024-07": (151, 6.86, 1.3), "2024-09": (148, 6.84, 1.4)}
    for label, (n, novelty, rate) in expected.items():
        row = rows[label]
        assert (row["n"], round(row["novelty_mean"], 2),
                round(row["hit_rate"], 1)) == (n, novelty, rate)
    _ok(7, "window dynamics fixture")


def test_acceptance_08_drift_correlation_fixture():
    fx = fixtures.drift_hit_rate()
    res = rank_correlation(fx["drift"], fx["hit_rate"], method="spearman")
    assert abs(res.statistic - (-0.281)) <= 0.001
    assert abs(res.p_value - 0.051) <= 0.005
    _ok(8, "drift correlation fixture")


# -- criterion 9: threshold sweep monotonicity ----------------------------------

def _sweep(records):
    thresholds = [round(5.0 + 0.1 * i, 1) for i in range(21)]
    return [hits_at_threshold(records, t) for t in thresholds]


def test_acceptance_09_threshold_sweep_monotone(e2e_runs):
    records, _ = _headline_aggregate()
    counts = _sweep(records)
    assert counts == sorted(counts, reverse=True)
    assert counts[0] > counts[-1] >= 0  # sweep actually discriminates

    run_a, _, _ = e2e_runs
    from ckm.ops import load_records

    mock_records = []
    for path in run_a.rglob("evaluation.jsonl"):
        mock_records.extend(load_records(path))
    assert mock_records
    mock_counts = _sweep(mock_records)
    assert mock_counts == sorted(mock_counts, reverse=True)
    _ok(9, "threshold sweep monotonicity")


# -- criterion 10: knowledge cap and diff round-trip ----------------------------

def test_acceptance_10_knowledge_cap_and_diff_round_trip(e2e_runs):
    run_a, _, _ = e2e_runs
    from ckm.knowledge import slugify

    slug_to_topic = {slugify(t): t for t in E2E_TOPICS}
    checked_files = 0
    checked_windows = 0
    for topic_dir in run_a.iterdir():
        if not (topic_dir / "kb" / "w0").is_dir():
            continue
        topic = slug_to_topic[topic_dir.name]
        for variant in E2E_VARIANTS:
            kb_root = topic_dir / variant / "kb"
            if not kb_root.is_dir():
                continue
            kb = load_snapshot(topic, 0, topic_dir / "kb" / "w0")
            windows = sorted(
                int(p.name[1:]) for p in kb_root.iterdir() if p.is_dir())
            for w in windows:
                snapshot = load_snapshot(topic, w, kb_root / f"w{w}")
                for f in snapshot.files:
                    assert f.line_count <= 200, (topic, variant, w, f.name)
                    checked_files += 1
                diff = KnowledgeDiff.from_dict(json.loads(
                    (kb_root / f"w{w}.diff.json").read_text()))
                rebuilt = apply_diff(kb, diff)
                assert [(f.name, f.body) for f in rebuilt.files] == \
                    [(f.name, f.body) for f in snapshot.files], (topic, variant, w)
                kb = snapshot
                checked_windows += 1
    assert checked_windows == 3 * (6 + 6 + 1)  # 3 topics x (lite+full+batch)
    assert checked_files > 0
    _ok(10, "knowledge cap and diff round-trip")


# -- criterion 11: token ledger conservation ------------------------------------

def test_acceptance_11_token_ledger_conservation(e2e_runs, tmp_path):
    run_a, _, _ = e2e_runs
    saved = json.loads((run_a / "ledger.json").read_text())
    replayed = replay_call_log(sorted((run_a / "calls").glob("*.jsonl")))
    assert replayed.to_dict() == saved
    assert saved["total"] == saved["total_input"] + saved["total_output"]

    # independent conservation check: in-memory ledger vs its own call log
    sink = CallLogWriter(tmp_path / "conserve.jsonl")
    ledger = TokenLedger()
    gw = make_mock_gateway(sink=sink, ledger=ledger)
    for i in range(25):
        gw.complete("generation", "sys", f"payload {i}", phase="evolve:lite")
    gw.embed(["alpha beta", "gamma"], phase="evaluate:lite")
    sink.close()
    assert replay_call_log([tmp_path / "conserve.jsonl"]).to_dict() == ledger.to_dict()

    fx = fixtures.token_ledger()
    rows = token_efficiency([fx])
    per_hyp = rows[0]["tokens_per_hypothesis"]
    assert round(per_hyp / 1000) == 30  # 26M / 863 is ~30K per hypothesis
    assert rows[0]["tokens_per_hit"] == pytest.approx(26_000_000 / 64)
    _ok(11, "token ledger conservation")


def test_e2e_knowledge_citations_are_temporally_sound(e2e_runs):
    """Every citation in every snapshot resolves to a paper already seen,
    published strictly before the window's end (leakage-free by content)."""
    from ckm.corpus import add_months
    from ckm.knowledge import citations_in, slugify
    from ckm.sources import SyntheticSource

    run_a, _, _ = e2e_runs
    t0, t_end = date(2024, 1, 1), date(2025, 1, 1)
    source = SyntheticSource(seed=1234, papers_per_month=3)
    checked = 0
    for topic in E2E_TOPICS:
        init = source.fetch(topic, date(2023, 1, 1), t0, 999)
        init = sorted(init, key=lambda p: (p.published_at, p.id))[:6]
        evo = source.fetch(topic, t0, t_end, 999)
        evo = sorted(evo, key=lambda p: (p.published_at, p.id))[:24]
        dates = {p.id: p.published_at for p in init + evo}
        topic_dir = run_a / slugify(topic)
        for variant in E2E_VARIANTS:
            kb_root = topic_dir / variant / "kb"
            for snap in sorted(p for p in kb_root.iterdir() if p.is_dir()):
                w = int(snap.name[1:])
                end = t_end if variant == "batch" else add_months(t0, 2 * w)
                for md in snap.glob("*.md"):
                    for cited in citations_in(md.read_text()):
                        assert cited in dates, (topic, variant, w, cited)
                        assert dates[cited] < end, (topic, variant, w, cited)
                        checked += 1
    assert checked > 100
