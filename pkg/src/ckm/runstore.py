"""Run-directory layout, artifact checksums, and phase resumability.

Everything a run produces lives under ``runs/<run-id>/``. The manifest maps
phase keys to artifact checksums; a phase whose artifacts all exist with
matching checksums is skipped on rerun.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from pathlib import Path

from .errors import ConfigError
from .knowledge import slugify

META_FILE = "run.json"
CONFIG_FILE = "config.toml"
MANIFEST_FILE = "manifest.json"
LEDGER_FILE = "ledger.json"
METRICS_FILE = "metrics.json"


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


class RunStore:
    def __init__(self, runs_root, run_id: str):
        self.runs_root = Path(runs_root)
        self.run_id = run_id
        self.root = self.runs_root / run_id
        # Guards manifest read-modify-write cycles across topic threads.
        self._manifest_lock = threading.Lock()

    # -- layout -----------------------------------------------------------

    @property
    def config_path(self) -> Path:
        return self.root / CONFIG_FILE

    @property
    def meta_path(self) -> Path:
        return self.root / META_FILE

    @property
    def manifest_path(self) -> Path:
        return self.root / MANIFEST_FILE

    @property
    def ledger_path(self) -> Path:
        return self.root / LEDGER_FILE

    @property
    def metrics_path(self) -> Path:
        return self.root / METRICS_FILE

    @property
    def corpus_dir(self) -> Path:
        return self.root / "corpus"

    @property
    def calls_dir(self) -> Path:
        return self.root / "calls"

    @property
    def analysis_dir(self) -> Path:
        return self.root / "analysis"

    @property
    def report_dir(self) -> Path:
        return self.root / "report"

    @staticmethod
    def topic_slug(topic: str) -> str:
        return slugify(topic)

    def topic_dir(self, topic: str) -> Path:
        return self.root / self.topic_slug(topic)

    def baseline_dir(self, topic: str) -> Path:
        return self.topic_dir(topic) / "kb" / "w0"

    def variant_dir(self, topic: str, variant: str) -> Path:
        return self.topic_dir(topic) / variant

    def variant_kb_dir(self, topic: str, variant: str, window_index: int) -> Path:
        return self.variant_dir(topic, variant) / "kb" / f"w{window_index}"

    def variant_diff_path(self, topic: str, variant: str, window_index: int) -> Path:
        return self.variant_dir(topic, variant) / "kb" / f"w{window_index}.diff.json"

    def call_log_path(self, phase: str, topic: str) -> Path:
        return self.calls_dir / f"{phase.replace(':', '__')}__{self.topic_slug(topic)}.jsonl"

    # -- lifecycle --------------------------------------------------------

    def exists(self) -> bool:
        return self.config_path.exists()

    def create(self, config_text: str, meta: dict) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        _atomic_write_text(self.config_path, config_text)
        _atomic_write_text(self.meta_path,
                           json.dumps(meta, indent=2, sort_keys=True) + "\n")

    def load_config_text(self) -> str:
        if not self.exists():
            raise ConfigError(
                f"run {self.run_id!r} does not exist under {self.runs_root}; "
                "create it first")
        return self.config_path.read_text(encoding="utf-8")

    def load_meta(self) -> dict:
        return json.loads(self.meta_path.read_text(encoding="utf-8"))

    # -- manifest / resumability ------------------------------------------

    def _load_manifest(self) -> dict:
        if self.manifest_path.exists():
            return json.loads(self.manifest_path.read_text(encoding="utf-8"))
        return {}

    def _save_manifest(self, manifest: dict) -> None:
        _atomic_write_text(
            self.manifest_path,
            json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    def mark_complete(self, key: str, artifact_paths, info: dict | None = None) -> None:
        artifacts = {}
        for path in sorted(Path(p) for p in artifact_paths):
            rel = path.relative_to(self.root).as_posix()
            artifacts[rel] = file_sha256(path)
        with self._manifest_lock:
            manifest = self._load_manifest()
            manifest[key] = {"artifacts": artifacts, "info": info or {}}
            self._save_manifest(manifest)

    def is_complete(self, key: str) -> bool:
        with self._manifest_lock:
            entry = self._load_manifest().get(key)
        if not entry:
            return False
        for rel, digest in entry["artifacts"].items():
            path = self.root / rel
            if not path.exists() or file_sha256(path) != digest:
                return False
        return True

    def completed_info(self, key: str) -> dict:
        with self._manifest_lock:
            return self._load_manifest().get(key, {}).get("info", {})

    # -- ledger / metrics ---------------------------------------------------

    def list_call_logs(self) -> list[Path]:
        if not self.calls_dir.exists():
            return []
        return sorted(self.calls_dir.glob("*.jsonl"))

    def save_ledger(self, ledger_dict: dict) -> None:
        _atomic_write_text(
            self.ledger_path,
            json.dumps(ledger_dict, indent=2, sort_keys=True) + "\n")

    def load_metrics(self) -> dict:
        if self.metrics_path.exists():
            return json.loads(self.metrics_path.read_text(encoding="utf-8"))
        return {"variants": {}}

    def save_metrics(self, metrics: dict) -> None:
        _atomic_write_text(
            self.metrics_path,
            json.dumps(metrics, indent=2, sort_keys=True) + "\n")
