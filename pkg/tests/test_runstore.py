from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor

from ckm.runstore import RunStore, file_sha256


def _store(tmp_path):
    store = RunStore(tmp_path, "r1")
    store.create("[run]\nid='r1'\n", {"mock": True, "seed": 0,
                                      "allow_same_provider": False})
    return store


def test_mark_complete_and_checksum_verification(tmp_path):
    store = _store(tmp_path)
    artifact = store.root / "topic" / "out.txt"
    artifact.parent.mkdir(parents=True)
    artifact.write_text("payload", encoding="utf-8")
    store.mark_complete("init:topic", [artifact], {"topic": "topic"})
    assert store.is_complete("init:topic")
    assert store.completed_info("init:topic") == {"topic": "topic"}

    artifact.write_text("tampered", encoding="utf-8")
    assert not store.is_complete("init:topic")  # checksum mismatch forces rerun

    artifact.unlink()
    assert not store.is_complete("init:topic")
    assert not store.is_complete("never-marked")


def test_concurrent_mark_complete_loses_no_entries(tmp_path):
    store = _store(tmp_path)
    paths = []
    for i in range(64):
        p = store.root / f"t{i:02d}" / "artifact.txt"
        p.parent.mkdir(parents=True)
        p.write_text(f"content {i}", encoding="utf-8")
        paths.append(p)

    def work(i):
        store.mark_complete(f"init:t{i:02d}", [paths[i]], {"i": i})
        return store.is_complete(f"init:t{i:02d}")

    with ThreadPoolExecutor(max_workers=8) as pool:
        results = list(pool.map(work, range(64)))
    assert all(results)
    manifest = json.loads(store.manifest_path.read_text())
    assert len(manifest) == 64  # no lost updates, no partial writes
    for i in range(64):
        assert store.is_complete(f"init:t{i:02d}")


def test_file_sha256_stable(tmp_path):
    p = tmp_path / "x.bin"
    p.write_bytes(b"abc")
    assert file_sha256(p) == (
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad")
