from __future__ import annotations

import random
from datetime import date

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ckm.corpus import Window
from ckm.errors import ConfigError, LeakageError
from ckm.kbdiff import apply_diff, diff_knowledge, KnowledgeDiff
from ckm.kbupdate import init_knowledge, update_knowledge
from ckm.knowledge import (
    KnowledgeBase,
    TopicFile,
    clean_body,
    compress_topic_file,
    citations_in,
    load_snapshot,
    new_topic_file,
    save_snapshot,
    stub_knowledge_base,
)
from ckm.sources import SyntheticSource
from tests.conftest import make_mock_gateway, make_paper


def _init_papers(n=8, topic="adaptive retrieval"):
    src = SyntheticSource(seed=5)
    return src.fetch(topic, date(2023, 1, 1), date(2024, 1, 1), 999)[:n]


def _window(papers, index=1, start=date(2024, 1, 1), end=date(2024, 3, 1)):
    return Window(index=index, start=start, end=end, papers=tuple(papers))


def _evolution_papers(n=8):
    src = SyntheticSource(seed=5)
    return src.fetch("adaptive retrieval", date(2024, 1, 1),
                     date(2024, 3, 1), 999)[:n]


def test_init_builds_baseline_with_cited_claims(topic_config):
    gw = make_mock_gateway()
    papers = _init_papers(n=48)  # the per-topic initialization cap
    kb = init_knowledge(gw, topic_config, papers)
    assert kb.window_index == 0
    assert len(kb.files) >= 1
    known = {p.id for p in papers}
    assert kb.all_citations() <= known
    for f in kb.files:
        assert f.line_count <= 200


def test_init_empty_corpus_yields_flagged_stub(topic_config):
    kb = init_knowledge(make_mock_gateway(), topic_config, [])
    assert kb.window_index == 0
    assert len(kb.files) == 1
    assert "empty baseline" in kb.files[0].body


def test_init_is_deterministic(topic_config):
    papers = _init_papers()
    one = init_knowledge(make_mock_gateway(seed=9), topic_config, papers)
    two = init_knowledge(make_mock_gateway(seed=9), topic_config, papers)
    assert [(f.name, f.body) for f in one.files] == \
        [(f.name, f.body) for f in two.files]


def test_init_rejects_papers_outside_initialization_period(topic_config):
    future = make_paper(day=date(2024, 6, 1))
    with pytest.raises(LeakageError):
        init_knowledge(make_mock_gateway(), topic_config, [future])
    ancient = make_paper(day=date(2022, 1, 1))
    with pytest.raises(ConfigError):
        init_knowledge(make_mock_gateway(), topic_config, [ancient])


def _baseline(topic_config):
    return init_knowledge(make_mock_gateway(), topic_config, _init_papers())


def test_update_empty_window_is_identity(topic_config):
    kb = _baseline(topic_config)
    kb2, diff = update_knowledge(make_mock_gateway(), kb, _window([]), "lite")
    assert kb2.window_index == 1
    assert [f.body for f in kb2.files] == [f.body for f in kb.files]
    assert diff.is_empty


def test_update_full_mode_categorizes_every_window_paper(topic_config):
    kb = _baseline(topic_config)
    papers = _evolution_papers(8)
    kb2, diff = update_knowledge(make_mock_gateway(), kb, _window(papers), "full")
    assert len(diff.categorized_entries) >= 8
    covered = {e.paper_id for e in diff.categorized_entries}
    assert covered == {p.id for p in papers}
    for e in diff.categorized_entries:
        assert e.category in ("NEW", "CONFIRM", "CONTRADICT", "CROSS_DOMAIN")


def test_update_lite_mode_has_no_categorized_entries(topic_config):
    kb = _baseline(topic_config)
    kb2, diff = update_knowledge(
        make_mock_gateway(), kb, _window(_evolution_papers(5)), "lite")
    assert diff.categorized_entries == ()
    assert not diff.is_empty


def test_update_diff_round_trips(topic_config):
    kb = _baseline(topic_config)
    gw = make_mock_gateway()
    kb2, diff = update_knowledge(gw, kb, _window(_evolution_papers(8)), "full")
    rebuilt = apply_diff(kb, diff)
    assert [(f.name, f.body) for f in rebuilt.files] == \
        [(f.name, f.body) for f in kb2.files]


def test_update_leakage_guard_is_hard_error(topic_config):
    kb = _baseline(topic_config)
    poisoned = _window([make_paper(day=date(2024, 3, 1))])  # == window end
    with pytest.raises(LeakageError):
        update_knowledge(make_mock_gateway(), kb, poisoned, "full")


def test_update_requires_consecutive_snapshot(topic_config):
    kb = _baseline(topic_config)
    w2 = _window(_evolution_papers(2), index=2,
                 start=date(2024, 3, 1), end=date(2024, 5, 1))
    with pytest.raises(ConfigError):
        update_knowledge(make_mock_gateway(), kb, w2, "lite")


def test_update_keeps_files_under_line_cap(topic_config):
    kb = _baseline(topic_config)
    kb2, _ = update_knowledge(
        make_mock_gateway(), kb, _window(_evolution_papers(8)), "full")
    for f in kb2.files:
        assert f.line_count <= 200


# -- compression ------------------------------------------------------------

def _bloated_file(lines=260):
    body_lines = ["# bulk", "", "## Known methods"]
    for i in range(lines // 2):
        body_lines.append(f"- method finding number {i} [24{i % 10:02d}.{10000 + i}]")
    body_lines += ["", "## Established findings"]
    for i in range(lines - len(body_lines) - 5):
        body_lines.append(f"- observed effect {i} [25{i % 10:02d}.{20000 + i}]")
    body_lines += ["", "## Open questions", "- open?", "", "## Cross-references"]
    return TopicFile(name="bulk", body="\n".join(body_lines))


def test_compress_under_cap_is_identity():
    f = new_topic_file("small")
    assert compress_topic_file(f) is f


def test_compress_enforces_cap_and_preserves_citation_set():
    f = _bloated_file(260)
    assert f.line_count > 200
    squeezed = compress_topic_file(f)
    assert squeezed.line_count <= 200
    assert squeezed.citations == f.citations  # citation-set equality oracle


def test_compress_is_idempotent():
    f = _bloated_file(300)
    once = compress_topic_file(f)
    twice = compress_topic_file(once)
    assert once.body == twice.body


def test_clean_body_drops_uncited_and_unknown_claims():
    body = "\n".join([
        "# t", "", "## Known methods",
        "- cited claim [2401.00001]",
        "- uncited claim",
        "- unknown citation [2499.99999]",
        "", "## Open questions",
        "- question without citation is fine",
    ])
    cleaned, dropped = clean_body(body, {"2401.00001"})
    assert dropped == 2
    assert "uncited claim" not in cleaned
    assert "2499.99999" not in cleaned
    assert "question without citation is fine" in cleaned


# -- diffs -------------------------------------------------------------------

def _kb(topic, idx, **files):
    return KnowledgeBase(topic=topic, window_index=idx, files=tuple(
        TopicFile(name=k, body=v) for k, v in files.items()))


def test_diff_identity_is_empty():
    a = _kb("t", 0, one="# one\n- x [2401.00001]")
    b = _kb("t", 1, one="# one\n- x [2401.00001]")
    assert diff_knowledge(a, b).is_empty


def test_diff_single_appended_line():
    a = _kb("t", 0, one="# one\nline")
    b = _kb("t", 1, one="# one\nline\nnew line")
    d = diff_knowledge(a, b)
    fd = d.changed_files["one"]
    assert len(fd.added_spans) == 1
    assert fd.added_spans[0][2] == 1


def test_diff_topic_mismatch_errors():
    with pytest.raises(ValueError):
        diff_knowledge(_kb("a", 0, f="x"), _kb("b", 1, f="x"))
    with pytest.raises(ValueError):
        diff_knowledge(_kb("a", 0, f="x"), _kb("a", 2, f="x"))


def test_diff_serialization_round_trip(topic_config):
    kb = _baseline(topic_config)
    _, diff = update_knowledge(
        make_mock_gateway(), kb, _window(_evolution_papers(6)), "full")
    loaded = KnowledgeDiff.from_dict(diff.to_dict())
    assert apply_diff(kb, loaded).files == apply_diff(kb, diff).files


@settings(max_examples=60, deadline=None)
@given(
    base=st.lists(st.sampled_from(["alpha", "beta", "gamma", "delta"]),
                  min_size=0, max_size=12),
    seed=st.integers(0, 10_000),
)
def test_random_edit_scripts_round_trip(base, seed):
    rng = random.Random(seed)
    edited = list(base)
    for _ in range(rng.randint(0, 6)):
        op = rng.choice(("insert", "delete", "replace"))
        if op == "insert" or not edited:
            edited.insert(rng.randint(0, len(edited)), f"new-{rng.randint(0, 9)}")
        elif op == "delete":
            edited.pop(rng.randrange(len(edited)))
        else:
            edited[rng.randrange(len(edited))] = f"mod-{rng.randint(0, 9)}"
    a = _kb("t", 0, f="\n".join(base))
    b = _kb("t", 1, f="\n".join(edited))
    d = diff_knowledge(a, b)
    assert apply_diff(a, d).get("f").body == b.get("f").body


def test_snapshot_save_load_round_trip(tmp_path, topic_config):
    kb = _baseline(topic_config)
    save_snapshot(kb, tmp_path / "w0")
    loaded = load_snapshot(kb.topic, 0, tmp_path / "w0")
    assert [(f.name, f.body) for f in loaded.files] == \
        [(f.name, f.body) for f in kb.files]


def test_knowledge_base_invariants():
    with pytest.raises(ValueError):
        KnowledgeBase(topic="t", window_index=0, files=(
            TopicFile("a", "x"), TopicFile("a", "y")))
    stub = stub_knowledge_base("t")
    assert stub.file_names == ["baseline"]
    assert citations_in(stub.files[0].body) == []


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 100_000), n_lines=st.integers(0, 320))
def test_compress_properties_on_adversarial_bodies(seed, n_lines):
    rng = random.Random(seed)
    lines = []
    for i in range(n_lines):
        kind = rng.random()
        cite = f"[{rng.randint(2000, 2599):04d}.{rng.randint(10000, 99999)}]"
        if kind < 0.45:
            bullet = f"- bullet {i} {cite if rng.random() < 0.8 else ''}"
            lines.append(bullet.rstrip())
        elif kind < 0.55:
            lines.append(f"## Heading {i % 5}")
        elif kind < 0.6:
            lines.append("")
        elif kind < 0.65:
            lines.append(f"- Compressed evidence: {cite}")
        else:
            prose = f"prose line {i} {cite if rng.random() < 0.3 else ''}"
            lines.append(prose.rstrip())
    f = TopicFile(name="fuzz", body="\n".join(lines))
    out = compress_topic_file(f, max_lines=200)
    assert out.line_count <= 200
    assert out.citations == f.citations
    assert compress_topic_file(out, max_lines=200).body == out.body
