"""Run lifecycle operations: create, init, evolve, evaluate, analyze, report.

These are the functions the service endpoints (and therefore the CLI) call.
Every phase is resumable: a (phase, topic) whose artifacts exist with
matching checksums is skipped on rerun.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import reporting
from .analysis import (
    build_trajectory,
    centroid,
    crosstab_trigger_drift,
    embedding_diagnostics,
    pca_project,
    quadrant_analysis,
    rank_correlation,
    window_dynamics,
)
from .analysis.tables import (
    HypothesisOutcome,
    write_crosstab_csv,
    write_quadrants_csv,
    write_trajectories_csv,
    write_windows_csv,
)
from .config import RunConfig, build_runtime, build_source, parse_config
from .corpus import window_label_for
from .errors import ConfigError, LeakageError, ProviderError
from .evaluation import (
    EvaluationRecord,
    aggregate_metrics,
    compute_topic_metrics,
    evaluate_hypothesis,
)
from .gateway import (
    CallLogWriter,
    Gateway,
    _RateGate,
    replay_call_log,
    validate_provider_separation,
)
from .kbupdate import init_knowledge
from .knowledge import load_snapshot, save_snapshot
from .metabolism import Hypothesis, get_variant
from .pipeline import run_topic
from .runstore import RunStore
from .sources import CorpusStore

log = logging.getLogger(__name__)


def create_run(runs_root, config_text: str, mock: bool = False,
               seed: int | None = None, allow_same_provider: bool = False) -> dict:
    """Create (or idempotently reopen) a run from TOML config text."""
    config = parse_config(config_text)
    resolved_seed = config.seed if seed is None else seed
    meta = {
        "mock": bool(mock),
        "seed": int(resolved_seed),
        "allow_same_provider": bool(allow_same_provider),
    }
    role_configs, _, _ = build_runtime(config, mock, resolved_seed)
    violations = validate_provider_separation(role_configs, allow_same_provider)
    if violations:
        raise ConfigError(
            "provider separation violated: " + "; ".join(violations)
            + " (pass --allow-same-provider to override)")

    store = RunStore(runs_root, config.run_id)
    created = True
    if store.exists():
        existing = store.load_config_text()
        if _digest(existing) != _digest(config_text):
            raise ConfigError(
                f"run {config.run_id!r} already exists with a different "
                "config; choose a new run id")
        created = False
    else:
        store.create(config_text, meta)
    return {
        "run_id": config.run_id,
        "created": created,
        "topics": list(config.topics),
        "variants": list(config.variants),
        "mock": meta["mock"],
        "seed": meta["seed"],
    }


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def open_run(runs_root, run_id: str) -> tuple[RunStore, RunConfig, dict]:
    store = RunStore(runs_root, run_id)
    config = parse_config(store.load_config_text())
    meta = store.load_meta()
    return store, config, meta


def _base_gateway(store: RunStore, config: RunConfig, meta: dict) -> Gateway:
    role_configs, providers, embed = build_runtime(
        config, meta["mock"], meta["seed"])
    gates = {}
    for family, interval in config.limits.items():
        gates[family] = _RateGate(min_interval=float(interval))
    return Gateway(role_configs=role_configs, providers=providers,
                   embed_config=embed, rate_gates=gates)


def _corpus_store(store: RunStore, config: RunConfig, meta: dict) -> CorpusStore:
    source = build_source(config, meta["mock"], meta["seed"])
    return CorpusStore(store.corpus_dir, source)


def _for_each_topic(topics, jobs: int, fn):
    """Run fn(topic) for every topic, optionally in parallel; keep order."""
    if jobs <= 1:
        return [fn(t) for t in topics]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, topics))


def _select_topics(config: RunConfig, topics) -> tuple:
    if not topics:
        return config.topics
    unknown = [t for t in topics if t not in config.topics]
    if unknown:
        raise ConfigError(f"topics not in this run's config: {unknown}")
    return tuple(t for t in config.topics if t in set(topics))


def _save_ledger(store: RunStore) -> None:
    store.save_ledger(replay_call_log(store.list_call_logs()).to_dict())


def run_init(runs_root, run_id: str, jobs: int = 1, topics=None) -> dict:
    """Phase 1: cache corpora and build the shared K_0 per topic."""
    store, config, meta = open_run(runs_root, run_id)
    selected = _select_topics(config, topics)
    base = _base_gateway(store, config, meta)
    corpus = _corpus_store(store, config, meta)

    def do_topic(topic: str) -> dict:
        key = f"init:{store.topic_slug(topic)}"
        if store.is_complete(key):
            return {"topic": topic, "skipped": True,
                    **store.completed_info(key)}
        tcfg = config.topic_config(topic)
        papers = corpus.fetch_papers(topic, tcfg.t_init, tcfg.t0, tcfg.caps.init)
        sink = CallLogWriter(store.call_log_path("init", topic))
        try:
            kb = init_knowledge(base.scoped(sink), tcfg, papers)
        finally:
            sink.close()
        files = save_snapshot(kb, store.baseline_dir(topic))
        artifacts = list(files)
        cache = corpus.cache_path(topic, tcfg.t_init, tcfg.t0, tcfg.caps.init)
        if cache.exists():
            artifacts.append(cache)
        info = {"topic": topic, "files": len(files), "papers": len(papers)}
        store.mark_complete(key, artifacts, info)
        return {"skipped": False, **info}

    results = _for_each_topic(selected, jobs, do_topic)
    _save_ledger(store)
    return {"run_id": run_id, "topics": results}


def run_evolve(runs_root, run_id: str, variant_name: str, jobs: int = 1,
               topics=None) -> dict:
    """Phase 2: per-window metabolism and hypothesis generation."""
    store, config, meta = open_run(runs_root, run_id)
    selected = _select_topics(config, topics)
    variant = get_variant(variant_name)
    if variant.name not in config.variants:
        raise ConfigError(
            f"variant {variant.name!r} is not enabled in this run "
            f"(enabled: {list(config.variants)})")
    base = _base_gateway(store, config, meta)
    corpus = _corpus_store(store, config, meta)
    failures: list[str] = []

    def do_topic(topic: str) -> dict:
        slug = store.topic_slug(topic)
        key = f"evolve:{variant.name}:{slug}"
        if store.is_complete(key):
            return {"topic": topic, "skipped": True, **store.completed_info(key)}
        if not store.baseline_dir(topic).exists():
            raise ConfigError(
                f"no baseline snapshot for topic {topic!r}; run `ckm init` first")
        tcfg = config.topic_config(topic)
        baseline = load_snapshot(topic, 0, store.baseline_dir(topic))
        init_papers = corpus.fetch_papers(
            topic, tcfg.t_init, tcfg.t0, tcfg.caps.init)
        papers = corpus.fetch_papers(
            topic, tcfg.t0, tcfg.t_end, tcfg.caps.evolution)
        sink = CallLogWriter(store.call_log_path(f"evolve:{variant.name}", topic))
        try:
            result = run_topic(
                base.scoped(sink), variant, tcfg, baseline, papers,
                init_papers, store.variant_dir(topic, variant.name),
                per_window=config.per_window, seed=meta["seed"],
                phase=f"evolve:{variant.name}")
        except ProviderError as err:
            failures.append(f"{topic}: {err}")
            return {"topic": topic, "skipped": False, "failed": True,
                    "error": str(err)}
        finally:
            sink.close()
        info = {"topic": topic, "windows": result.windows,
                "hypotheses": result.hypotheses, "signals": result.signals}
        store.mark_complete(key, result.artifacts, info)
        return {"skipped": False, "failed": False, **info}

    results = _for_each_topic(selected, jobs, do_topic)
    _save_ledger(store)
    if failures:
        raise ProviderError(
            f"{len(failures)} topic(s) aborted on hard window failures: "
            + "; ".join(failures))
    return {"run_id": run_id, "variant": variant.name, "topics": results}


def load_hypotheses(path) -> list[Hypothesis]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(Hypothesis.from_dict(json.loads(line)))
    return out


def load_records(path) -> list[EvaluationRecord]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(EvaluationRecord.from_dict(json.loads(line)))
    return out


def run_evaluate(runs_root, run_id: str, variants=None, jobs: int = 1,
                 topics=None) -> dict:
    """Phase 3: temporal validation against strictly-future papers."""
    store, config, meta = open_run(runs_root, run_id)
    selected = _select_topics(config, topics)
    names = [v.lower() for v in (variants or config.variants)]
    for name in names:
        if name not in config.variants:
            raise ConfigError(f"variant {name!r} is not enabled in this run")
    base = _base_gateway(store, config, meta)
    corpus = _corpus_store(store, config, meta)
    metrics = store.load_metrics()
    summary = {}

    for name in names:
        def do_topic(topic: str, name=name) -> tuple[str, list[EvaluationRecord]]:
            slug = store.topic_slug(topic)
            vdir = store.variant_dir(topic, name)
            eval_path = vdir / "evaluation.jsonl"
            key = f"evaluate:{name}:{slug}"
            if store.is_complete(key):
                return topic, load_records(eval_path)
            hyp_path = vdir / "hypotheses.jsonl"
            if not hyp_path.exists():
                raise ConfigError(
                    f"no hypotheses for topic {topic!r} variant {name!r}; "
                    f"run `ckm evolve --variant {name}` first")
            tcfg = config.topic_config(topic)
            hypotheses = load_hypotheses(hyp_path)
            validation = corpus.fetch_papers(
                topic, tcfg.t_end, tcfg.t_val_end, tcfg.caps.validation)
            for p in validation:
                if p.published_at < tcfg.t_end:
                    raise LeakageError(
                        f"validation paper {p.id} dated {p.published_at} "
                        f"precedes the validation phase start {tcfg.t_end}")
            papers_by_id = {}
            for p in corpus.fetch_papers(topic, tcfg.t_init, tcfg.t0,
                                         tcfg.caps.init):
                papers_by_id[p.id] = p
            for p in corpus.fetch_papers(topic, tcfg.t0, tcfg.t_end,
                                         tcfg.caps.evolution):
                papers_by_id[p.id] = p
            sink = CallLogWriter(store.call_log_path(f"evaluate:{name}", topic))
            records = []
            try:
                gw = base.scoped(sink)
                for h in hypotheses:
                    rec = evaluate_hypothesis(
                        gw, h, validation, papers_by_id,
                        thresholds=config.thresholds,
                        phase=f"evaluate:{name}")
                    rec.window_label = window_label_for(
                        tcfg.t0, tcfg.window_months, h.window_index)
                    records.append(rec)
            finally:
                sink.close()
            eval_path.parent.mkdir(parents=True, exist_ok=True)
            with eval_path.open("w", encoding="utf-8") as fh:
                for rec in records:
                    fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")
            store.mark_complete(key, [eval_path],
                                {"topic": topic, "records": len(records)})
            return topic, records

        pairs = _for_each_topic(selected, jobs, do_topic)
        existing = metrics.get("variants", {}).get(name, {}).get("per_topic", {})
        per_topic = dict(existing)
        per_topic.update(
            {t: compute_topic_metrics(t, recs).to_dict() for t, recs in pairs})
        agg = aggregate_metrics(per_topic)
        metrics.setdefault("variants", {})[name] = {
            "aggregate": agg,
            "per_topic": per_topic,
        }
        summary[name] = agg

    store.save_metrics(metrics)
    _save_ledger(store)
    return {"run_id": run_id, "variants": summary}


def _statements_by_id(store: RunStore, config: RunConfig, variant: str) -> dict:
    out = {}
    for topic in config.topics:
        path = store.variant_dir(topic, variant) / "hypotheses.jsonl"
        if path.exists():
            for h in load_hypotheses(path):
                out[h.id] = h.statement
    return out


def run_analyze(runs_root, run_id: str) -> dict:
    """Post-hoc analytics over evaluated variants; writes the analysis tree."""
    store, config, meta = open_run(runs_root, run_id)
    metrics = store.load_metrics()
    variant_names = sorted(metrics.get("variants", {}))
    if not variant_names:
        raise ConfigError("no evaluated variants; run `ckm evaluate` first")
    key = f"analyze:{_digest(store.metrics_path.read_text(encoding='utf-8'))}"
    if store.is_complete(key):
        info = store.completed_info(key)
        return {"run_id": run_id, "files": info["files"],
                "variants": variant_names, "skipped": True}
    base = _base_gateway(store, config, meta)
    sink = CallLogWriter(store.calls_dir / "analyze.jsonl")
    gw = base.scoped(sink)

    crosstabs, quadrants, windows, diagnostics = {}, {}, {}, {}
    trajectory_rows = []
    export_path = store.analysis_dir / "embeddings.jsonl"
    store.analysis_dir.mkdir(parents=True, exist_ok=True)
    export = export_path.open("w", encoding="utf-8")
    try:
        for name in variant_names:
            records, statements = [], _statements_by_id(store, config, name)
            for topic in config.topics:
                path = store.variant_dir(topic, name) / "evaluation.jsonl"
                if path.exists():
                    records.extend(load_records(path))
            if not records:
                continue
            texts = [statements.get(r.hypothesis_id, r.hypothesis_id)
                     for r in records]
            vectors = gw.embed(texts, phase="analyze")
            for rec, vec in zip(records, vectors):
                export.write(json.dumps(
                    {"variant": name, "hypothesis_id": rec.hypothesis_id,
                     "vector": [round(x, 8) for x in vec.tolist()]},
                    sort_keys=True) + "\n")

            by_topic: dict[str, list[int]] = {}
            for i, rec in enumerate(records):
                by_topic.setdefault(rec.topic, []).append(i)
            drifts = {}
            for topic, idxs in sorted(by_topic.items()):
                by_window: dict[int, list[int]] = {}
                for i in idxs:
                    by_window.setdefault(records[i].window_index, []).append(i)
                labeled = []
                for w in sorted(by_window):
                    vecs = [vectors[i].values for i in by_window[w]]
                    labeled.append((records[by_window[w][0]].window_label,
                                    centroid(vecs)))
                traj = build_trajectory(topic, labeled)
                drifts[topic] = traj.drift
                if len(traj.centroids) >= 3:
                    points, _ = pca_project(traj.centroids, dims=2)
                else:
                    points = [[0.0, 0.0] for _ in traj.centroids]
                for lbl, pt in zip(traj.labels, points):
                    trajectory_rows.append(
                        (name, topic, lbl, float(pt[0]), float(pt[1]),
                         traj.drift))

            outcomes = [
                HypothesisOutcome(
                    topic=r.topic, is_hit=r.is_hit, trigger=r.trigger,
                    drift=drifts.get(r.topic),
                    novelty=r.novelty.get("mean") if r.novelty else None,
                    best_match=r.best_match, window_label=r.window_label)
                for r in records
            ]
            tab = crosstab_trigger_drift(outcomes)
            if tab.rows:
                crosstabs[name] = tab
            try:
                quadrants[name] = quadrant_analysis(outcomes)
            except ValueError:
                pass
            windows[name] = window_dynamics(outcomes)

            diag = {}
            scored = [(vectors[i].values, records[i].best_match,
                       records[i].is_hit)
                      for i in range(len(records))
                      if records[i].best_match is not None]
            if len(scored) >= 3:
                diag = embedding_diagnostics(
                    [s[0] for s in scored], [s[1] for s in scored],
                    [s[2] for s in scored])
            per_topic = metrics["variants"][name]["per_topic"]
            topics_with_drift = sorted(t for t in drifts if t in per_topic)
            if len(topics_with_drift) >= 3:
                try:
                    res = rank_correlation(
                        [drifts[t] for t in topics_with_drift],
                        [per_topic[t]["hit_rate"] for t in topics_with_drift],
                        method="spearman")
                    diag["drift_hit_rate_spearman"] = res.statistic
                    diag["drift_hit_rate_p"] = res.p_value
                except ValueError:
                    pass
            diag["drift_by_topic"] = {t: drifts[t] for t in sorted(drifts)}
            diagnostics[name] = diag
    finally:
        export.close()
        sink.close()

    files = [export_path]
    files.append(write_crosstab_csv(crosstabs, store.analysis_dir / "crosstab.csv"))
    files.append(write_quadrants_csv(quadrants, store.analysis_dir / "quadrants.csv"))
    files.append(write_windows_csv(windows, store.analysis_dir / "windows.csv"))
    files.append(write_trajectories_csv(
        trajectory_rows, store.analysis_dir / "trajectories.csv"))
    diag_path = store.analysis_dir / "diagnostics.json"
    diag_path.write_text(
        json.dumps(diagnostics, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    files.append(diag_path)
    _save_ledger(store)
    rel_files = [str(f.relative_to(store.root)) for f in files]
    store.mark_complete(key, files, {"files": rel_files})
    return {"run_id": run_id, "files": rel_files, "variants": variant_names}


def run_report(runs_root, run_id: str) -> dict:
    """Consolidated cross-variant comparison plus token efficiency."""
    store, config, meta = open_run(runs_root, run_id)
    metrics = store.load_metrics()
    variants = sorted(metrics.get("variants", {}))
    if not variants:
        raise ConfigError("nothing to report; run `ckm evaluate` first")
    inputs = store.metrics_path.read_text(encoding="utf-8")
    if store.ledger_path.exists():
        inputs += store.ledger_path.read_text(encoding="utf-8")
    key = f"report:{_digest(inputs)}"
    if store.is_complete(key):
        cached = json.loads(
            (store.report_dir / "report.json").read_text(encoding="utf-8"))
        cached["files"] = store.completed_info(key)["files"]
        cached["skipped"] = True
        return cached

    per_topic_by_variant = {
        name: metrics["variants"][name]["per_topic"] for name in variants
    }
    comparisons = []
    if len(variants) >= 2:
        comparisons = reporting.pairwise_comparisons(per_topic_by_variant)

    ledger = replay_call_log(store.list_call_logs()).to_dict()
    token_rows = []
    for name in variants:
        total = 0
        for key, cell in ledger["by_role_phase"].items():
            phase = key.split("/", 1)[1]
            if phase in (f"evolve:{name}", f"evaluate:{name}"):
                total += cell["input"] + cell["output"]
        agg = metrics["variants"][name]["aggregate"]
        token_rows.append({
            "variant": name,
            "tokens": total,
            "hypotheses": agg["total_yield"],
            "unique_hits": agg["unique_hits"],
        })
    tokens = reporting.token_efficiency(token_rows)

    store.report_dir.mkdir(parents=True, exist_ok=True)
    files = [
        reporting.write_comparisons_csv(
            comparisons, store.report_dir / "comparisons.csv"),
        reporting.write_tokens_csv(tokens, store.report_dir / "tokens.csv"),
        reporting.write_metrics_csv(
            {name: metrics["variants"][name]["aggregate"] for name in variants},
            store.report_dir / "metrics.csv"),
    ]
    payload = {
        "run_id": run_id,
        "variants": variants,
        "comparisons": comparisons,
        "tokens": tokens,
    }
    report_path = store.report_dir / "report.json"
    report_path.write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    files.append(report_path)
    rel_files = [str(f.relative_to(store.root)) for f in files]
    store.mark_complete(key, files, {"files": rel_files})
    payload["files"] = rel_files
    return payload
