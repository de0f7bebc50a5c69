from __future__ import annotations

import json
from datetime import date

import pytest

from ckm.corpus import TopicConfig, Window
from ckm.errors import ConfigError
from ckm.gateway import Gateway, RoleConfig
from ckm.kbdiff import diff_knowledge
from ckm.kbupdate import init_knowledge
from ckm.knowledge import KnowledgeBase, TopicFile
from ckm.metabolism import (
    ChangeSignal,
    GenerationContext,
    Hypothesis,
    TrajectoryEntry,
    TrajectorySummary,
    VARIANTS,
    detect_change,
    generate_hypotheses,
    get_variant,
    normalize_label,
    summarize_trajectory,
)
from ckm.pipeline import build_windows, run_topic
from ckm.sources import SyntheticSource
from tests.conftest import make_mock_gateway


class ScriptedProvider:
    """Returns queued responses; used to exercise parse paths exactly."""

    family = "scripted"

    def __init__(self, responses):
        self.responses = list(responses)
        self.calls = 0

    def complete(self, role, model, system, user, temperature, max_output):
        self.calls += 1
        if not self.responses:
            raise AssertionError("no scripted response left")
        return self.responses.pop(0), None, None

    def embed(self, model, texts, dim):
        raise AssertionError("not used")


def scripted_gateway(*responses):
    return Gateway(
        role_configs={"generation": RoleConfig("scripted", "s", 0.1)},
        providers={"scripted": ScriptedProvider(responses)},
        backoff_base=0.0,
    )


def _kb(idx=0, body="# core\n\n## Known methods\n- m [2401.00001]"):
    return KnowledgeBase(topic="t", window_index=idx,
                         files=(TopicFile("core", body),))


def _window(papers=(), index=1):
    return Window(index=index, start=date(2024, 1, 1), end=date(2024, 3, 1),
                  papers=tuple(papers))


def _nonempty_diff():
    return diff_knowledge(_kb(0), _kb(1, body="# core\n\n## Known methods\n"
                                              "- m [2401.00001]\n- n [2401.00001]"))


def test_normalize_label_upper_snake():
    assert normalize_label("Gap_Exploitation") == "GAP_EXPLOITATION"
    assert normalize_label(" non-obvious bridge ") == "NON_OBVIOUS_BRIDGE"
    assert normalize_label("CONVERGENCE") == "CONVERGENCE"


def test_detect_change_parses_structured_payload():
    gw = scripted_gateway(json.dumps({
        "change_type": "CONVERGENCE",
        "reason": "independent lines agree",
        "key_changes": ["a", "b"],
    }))
    signal = detect_change(gw, _nonempty_diff(), _window(), _kb(0), _kb(1))
    assert signal.change_type == "CONVERGENCE"
    assert signal.is_canonical
    assert signal.key_changes == ("a", "b")


def test_detect_change_empty_diff_short_circuits():
    gw = scripted_gateway()  # any provider call would fail the test
    empty = diff_knowledge(_kb(0), _kb(1))
    signal = detect_change(gw, empty, _window(), _kb(0), _kb(1))
    assert signal.change_type == "INCREMENTAL"
    assert "no substantive change" in signal.reason


def test_detect_change_preserves_open_set_labels():
    gw = scripted_gateway(json.dumps({
        "change_type": "Gap_Exploitation", "reason": "", "key_changes": []}))
    signal = detect_change(gw, _nonempty_diff(), _window(), _kb(0), _kb(1))
    assert signal.change_type == "GAP_EXPLOITATION"
    assert not signal.is_canonical


def test_detect_change_falls_back_after_two_parse_failures():
    gw = scripted_gateway("not json at all", "still not json")
    signal = detect_change(gw, _nonempty_diff(), _window(), _kb(0), _kb(1))
    assert signal.change_type == "INCREMENTAL"
    assert signal.reason == "parse fallback"


def test_change_signal_requires_label():
    with pytest.raises(ValueError):
        ChangeSignal(change_type="")


def test_trajectory_appends_in_order_and_renders_without_change_type():
    traj = TrajectorySummary()
    traj = traj.append(TrajectoryEntry(1, "2024-01", "first"))
    traj = traj.append(TrajectoryEntry(2, "2024-03", "second", "BRIDGE"))
    assert len(traj) == 2
    rendered = traj.render()
    assert "Window 1 (2024-01): first" in rendered
    assert "[BRIDGE]" in rendered
    with pytest.raises(ValueError):
        traj.append(TrajectoryEntry(2, "2024-05", "out of order"))


def test_trajectory_render_condenses_past_line_cap():
    traj = TrajectorySummary(max_lines=10)
    for i in range(1, 30):
        traj = traj.append(TrajectoryEntry(i, f"2024-{i:02d}", f"entry {i}"))
    rendered = traj.render()
    assert len(rendered.split("\n")) <= 10
    assert "condensed" in rendered
    assert "entry 29" in rendered


def test_summarize_trajectory_entry_shapes():
    diff = _nonempty_diff()
    base = summarize_trajectory(TrajectorySummary(), _window(), diff, None)
    assert len(base) == 1
    assert base.entries[0].change_type is None  # lite entries carry no label
    signal = ChangeSignal("CONVERGENCE", reason="lines agree")
    more = summarize_trajectory(base, _window(index=2), diff, signal)
    assert more.entries[1].change_type == "CONVERGENCE"
    assert "lines agree" in more.entries[1].summary


def test_variant_flag_matrix_matches_experimental_groups():
    flags = {
        name: (v.incremental, v.diff_updates, v.change_detection,
               v.trajectory_conditioning, v.full_text)
        for name, v in VARIANTS.items()
    }
    assert flags["full"] == (True, True, True, True, True)
    assert flags["lite"] == (True, False, False, False, True)
    assert flags["batch"] == (False, False, False, False, True)
    assert flags["abstract"] == (True, True, True, True, False)
    assert flags["shuffled"] == flags["full"]
    assert VARIANTS["shuffled"].shuffle_dates
    with pytest.raises(ConfigError):
        get_variant("turbo")


def test_generation_context_forbids_signal_without_detection():
    with pytest.raises(ConfigError):
        GenerationContext(
            topic="t", variant=get_variant("lite"), window=_window(),
            knowledge=_kb(1), trajectory=TrajectorySummary(),
            prior_hypotheses=[], visible_dates={},
            change_signal=ChangeSignal("BRIDGE"))


def _papers(n=4):
    src = SyntheticSource(seed=2)
    return src.fetch("adaptive retrieval", date(2024, 1, 1),
                     date(2024, 3, 1), 99)[:n]


def _ctx(variant="full", window_papers=None, signal=None, prior=None):
    papers = _papers() if window_papers is None else window_papers
    window = _window(papers)
    visible = {p.id: p.published_at for p in papers}
    return GenerationContext(
        topic="adaptive retrieval", variant=get_variant(variant),
        window=window, knowledge=_kb(1), trajectory=TrajectorySummary(),
        prior_hypotheses=prior or [], visible_dates=visible,
        change_signal=signal)


def test_generate_hypotheses_mock_yield_and_validity():
    gw = make_mock_gateway()
    signal = ChangeSignal("CONVERGENCE", reason="agreement")
    hyps = generate_hypotheses(gw, _ctx(signal=signal), target_count=3)
    assert 2 <= len(hyps) <= 4
    for h in hyps:
        assert h.statement
        assert set(h.claim) == {"problem", "method_delta", "baseline",
                                "expected_observable", "evaluation_plan",
                                "failure_mode"}
        assert all(1.0 <= v <= 10.0 for v in h.self_assessment.values())
        assert h.generated_at == date(2024, 3, 1)
        assert h.trigger
        assert Hypothesis.from_dict(h.to_dict()) == h


HYP_BLOCK = """BEGIN HYPOTHESIS
STATEMENT: Future paper citation should be rejected.
PROBLEM: p
METHOD_DELTA: m
BASELINE: b
EXPECTED_OBSERVABLE: e
EVALUATION_PLAN: ev
FAILURE_MODE: f
SOURCE_PAPERS: {ids}
TRIGGER: GAP
NOVELTY: 7.0
FEASIBILITY: 6.0
IMPACT: 7.5
END HYPOTHESIS"""


def test_generate_rejects_unseen_and_future_citations():
    papers = _papers()
    gw = scripted_gateway(HYP_BLOCK.format(ids="2512.99999"))
    assert generate_hypotheses(gw, _ctx(window_papers=papers,
                                        signal=None, variant="lite")) == []

    future_ctx = _ctx(variant="lite", window_papers=papers)
    future_ctx.visible_dates["2512.99999"] = date(2025, 6, 1)
    gw = scripted_gateway(HYP_BLOCK.format(ids="2512.99999"))
    with pytest.raises(ConfigError):
        generate_hypotheses(gw, future_ctx)


def test_generate_drops_malformed_blocks_keeps_valid():
    papers = _papers()
    good = HYP_BLOCK.format(ids=papers[0].id)
    bad = "BEGIN HYPOTHESIS\nPROBLEM: only\nEND HYPOTHESIS"
    gw = scripted_gateway(good + "\n" + bad)
    hyps = generate_hypotheses(gw, _ctx(variant="lite", window_papers=papers))
    assert len(hyps) == 1
    assert hyps[0].source_papers == (papers[0].id,)


def test_generate_full_trigger_defaults_to_change_signal():
    papers = _papers()
    block = HYP_BLOCK.format(ids=papers[0].id).replace("TRIGGER: GAP\n", "")
    gw = scripted_gateway(block)
    signal = ChangeSignal("CONVERGENCE", reason="r")
    hyps = generate_hypotheses(gw, _ctx(window_papers=papers, signal=signal))
    assert hyps[0].trigger == "CONVERGENCE"


# -- run_topic orchestration ---------------------------------------------

def _topic_cfg():
    return TopicConfig(
        topic="adaptive retrieval", t_init=date(2023, 1, 1),
        t0=date(2024, 1, 1), t_end=date(2025, 1, 1),
        t_val_end=date(2026, 1, 1), window_months=2)


def _evolution_corpus(cfg):
    return SyntheticSource(seed=2).fetch(cfg.topic, cfg.t0, cfg.t_end, 48)


def _run(tmp_path, variant_name, seed=0):
    cfg = _topic_cfg()
    gw = make_mock_gateway(seed=seed)
    init_papers = SyntheticSource(seed=2).fetch(
        cfg.topic, cfg.t_init, cfg.t0, 8)
    baseline = init_knowledge(gw, cfg, init_papers)
    return run_topic(
        gw, get_variant(variant_name), cfg, baseline,
        _evolution_corpus(cfg), init_papers,
        tmp_path / variant_name, per_window=3, seed=seed)


def test_run_topic_lite_executes_six_rounds(tmp_path):
    result = _run(tmp_path, "lite")
    assert result.windows == 6
    assert result.signals == 0
    assert (tmp_path / "lite" / "signals.jsonl").read_text() == ""
    assert 12 <= result.hypotheses <= 20


def test_run_topic_batch_executes_one_round(tmp_path):
    result = _run(tmp_path, "batch")
    assert result.windows == 1
    assert result.signals == 0
    hyp_lines = (tmp_path / "batch" / "hypotheses.jsonl").read_text().splitlines()
    assert all(json.loads(l)["window_index"] == 1 for l in hyp_lines)
    assert all(json.loads(l)["generated_at"] == "2025-01-01" for l in hyp_lines)


def test_run_topic_full_emits_signals_and_ordered_context(tmp_path):
    result = _run(tmp_path, "full")
    assert result.windows == 6
    assert result.signals == 6
    lines = (tmp_path / "full" / "hypotheses.jsonl").read_text().splitlines()
    indices = [json.loads(l)["window_index"] for l in lines]
    assert indices == sorted(indices)  # prior context grows monotonically
    for line in lines:
        d = json.loads(line)
        end = {1: "2024-03-01", 2: "2024-05-01", 3: "2024-07-01",
               4: "2024-09-01", 5: "2024-11-01", 6: "2025-01-01"}[d["window_index"]]
        assert d["generated_at"] == end
    kb_dirs = sorted(p.name for p in (tmp_path / "full" / "kb").iterdir()
                     if p.is_dir())
    assert kb_dirs == [f"w{i}" for i in range(1, 7)]


def test_run_topic_shuffled_is_deterministic(tmp_path):
    one = _run(tmp_path / "a", "shuffled", seed=11)
    two = _run(tmp_path / "b", "shuffled", seed=11)
    text_a = (tmp_path / "a" / "shuffled" / "hypotheses.jsonl").read_bytes()
    text_b = (tmp_path / "b" / "shuffled" / "hypotheses.jsonl").read_bytes()
    assert text_a == text_b
    assert one.hypotheses == two.hypotheses


def test_build_windows_variant_geometry():
    cfg = _topic_cfg()
    papers = _evolution_corpus(cfg)
    incremental = build_windows(get_variant("full"), cfg, papers, seed=0)
    batch = build_windows(get_variant("batch"), cfg, papers, seed=0)
    assert len(incremental) == 6
    assert len(batch) == 1
    # batch/incremental paper parity: same corpus either way
    flat = [p.id for w in incremental for p in w.papers]
    assert sorted(flat) == sorted(p.id for p in batch[0].papers)
    abstract = build_windows(get_variant("abstract"), cfg, papers, seed=0)
    assert all(p.full_text is None for w in abstract for p in w.papers)


class DyingProvider:
    """Delegates to the mock until a call budget is exhausted."""

    family = "mock"

    def __init__(self, budget):
        from ckm.providers import MockProvider
        self.inner = MockProvider(seed=0)
        self.budget = budget

    def complete(self, *args, **kwargs):
        from ckm.errors import ProviderError
        self.budget -= 1
        if self.budget < 0:
            raise ProviderError("quota exhausted", retryable=False)
        return self.inner.complete(*args, **kwargs)

    def embed(self, model, texts, dim):
        return self.inner.embed(model, texts, dim)


def test_run_topic_hard_window_failure_retains_partial_artifacts(tmp_path):
    from ckm.errors import ProviderError
    from ckm.gateway import EmbedConfig, Gateway, RoleConfig, ROLES

    cfg = _topic_cfg()
    init_papers = SyntheticSource(seed=2).fetch(cfg.topic, cfg.t_init, cfg.t0, 8)
    baseline = init_knowledge(make_mock_gateway(), cfg, init_papers)
    gw = Gateway(
        role_configs={r: RoleConfig("mock", "m", 0.1) for r in ROLES},
        providers={"mock": DyingProvider(budget=14)},
        embed_config=EmbedConfig(provider="mock", model="m", dim=32),
        backoff_base=0.0,
    )
    with pytest.raises(ProviderError):
        run_topic(gw, get_variant("lite"), cfg, baseline,
                  _evolution_corpus(cfg), init_papers, tmp_path / "lite",
                  per_window=3, seed=0)
    failures = json.loads((tmp_path / "lite" / "failures.json").read_text())
    assert failures["window_index"] >= 1
    hyp_lines = (tmp_path / "lite" / "hypotheses.jsonl").read_text().splitlines()
    produced = {json.loads(l)["window_index"] for l in hyp_lines}
    assert all(w < failures["window_index"] for w in produced)
    assert (tmp_path / "lite" / "kb" / "w1").is_dir()  # partial snapshots kept


def test_run_topic_abstract_strips_full_text_but_keeps_instrumentation(tmp_path):
    result = _run(tmp_path, "abstract")
    assert result.windows == 6
    assert result.signals == 6  # abstract keeps the change-detection path
