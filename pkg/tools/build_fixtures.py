#!/usr/bin/env python3
"""Regenerate the shipped benchmark fixtures under src/ckm/data/fixtures/.

Each fixture encodes published aggregate marginals as concrete
per-hypothesis records so the real metric/table/statistics code paths can
be exercised against frozen expected values. Deterministic: rerunning
reproduces identical files.
"""

from __future__ import annotations

import json
import random
import sys
from datetime import date, timedelta
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from ckm.analysis.stats import rank_correlation  # noqa: E402
from ckm.evaluation import (  # noqa: E402
    AlignmentJudgment,
    EvaluationRecord,
    Thresholds,
    compute_topic_metrics,
    aggregate_metrics,
    finalize_record,
)

OUT = Path(__file__).resolve().parents[1] / "src" / "ckm" / "data" / "fixtures"

WINDOW_LABELS = ["2024-01", "2024-03", "2024-05", "2024-07", "2024-09", "2024-11"]
WINDOW_ENDS = {
    "2024-01": date(2024, 3, 1), "2024-03": date(2024, 5, 1),
    "2024-05": date(2024, 7, 1), "2024-07": date(2024, 9, 1),
    "2024-09": date(2024, 11, 1), "2024-11": date(2025, 1, 1),
}


def _write_jsonl(path: Path, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    print(f"wrote {path} ({len(rows)} rows)")


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    print(f"wrote {path}")


# ---------------------------------------------------------------------------
# Headline-metrics fixture: 50 topics, 863 hypotheses, 64 unique hit papers.
#
# Topic plan:
#   7 topics, yield 18, 2 hit hypotheses (one matching 2 papers -> 3 unique)
#   7 topics, yield 17, same double-hit pattern
#  22 topics, yield 17, 1 hit hypothesis
#   6 topics, yield 18, no hits
#   8 topics, yield 17, no hits
# Mean per-topic hit rate = (7*2/18 + 7*2/17 + 22*1/17) / 50 = 5.7908%,
# total yield 863, coverage 36/50, unique hits 14*3 + 22 = 64,
# total yield / unique hits = 13.484.
# ---------------------------------------------------------------------------

def build_headline_records() -> list[dict]:
    rng = random.Random(20240101)
    thresholds = Thresholds()
    plan = ([("double", 18)] * 7 + [("double", 17)] * 7
            + [("single", 17)] * 22 + [("none", 18)] * 6 + [("none", 17)] * 8)
    rows = []
    paper_seq = 0

    def next_paper(year=2025):
        nonlocal paper_seq
        paper_seq += 1
        return f"{year % 100:02d}{1 + paper_seq % 9:02d}.{10000 + paper_seq}"

    for t_idx, (kind, yield_n) in enumerate(plan, start=1):
        topic = f"topic-{t_idx:02d}"
        hit_slots = {"double": [0, 1], "single": [0], "none": []}[kind]
        for k in range(yield_n):
            label = WINDOW_LABELS[k % len(WINDOW_LABELS)]
            gen = WINDOW_ENDS[label]
            rec = EvaluationRecord(
                hypothesis_id=f"lite:{topic}:w{k % 6 + 1}:{k}",
                topic=topic, variant="lite",
                window_index=k % 6 + 1, window_label=label,
                generated_at=gen.isoformat(),
            )
            judged = []
            if k in hit_slots:
                hit_date = gen + timedelta(days=rng.randint(250, 550))
                judged.append(AlignmentJudgment(
                    paper_id=next_paper(), paper_date=hit_date.isoformat(),
                    prefilter=round(5.2 + rng.random() * 2.0, 1),
                    final=round(6.0 + rng.random() * 0.9, 1)))
                if kind == "double" and k == 0:
                    second = gen + timedelta(days=rng.randint(250, 550))
                    judged.append(AlignmentJudgment(
                        paper_id=next_paper(), paper_date=second.isoformat(),
                        prefilter=round(5.2 + rng.random() * 2.0, 1),
                        final=round(6.0 + rng.random() * 0.7, 1)))
            elif k in (2, 3) and kind != "none" or (kind == "none" and k == 2):
                near_date = gen + timedelta(days=rng.randint(200, 500))
                judged.append(AlignmentJudgment(
                    paper_id=next_paper(), paper_date=near_date.isoformat(),
                    prefilter=round(5.0 + rng.random() * 1.5, 1),
                    final=round(5.0 + rng.random() * 0.9, 1)))
            for _ in range(2):
                miss_date = gen + timedelta(days=rng.randint(100, 600))
                judged.append(AlignmentJudgment(
                    paper_id=next_paper(), paper_date=miss_date.isoformat(),
                    prefilter=round(1.2 + rng.random() * 3.6, 1), final=None))
            rec.judged = judged
            rec.candidates = [(j.paper_id, round(0.5 + rng.random() * 0.4, 6))
                              for j in judged]
            finalize_record(rec, gen, thresholds)
            mean = round(5.4 + rng.random() * 1.3, 2)
            rec.novelty = {"d1": round(mean - 1.2, 2), "d2": round(mean - 0.2, 2),
                           "d3": round(mean + 0.2, 2), "d4": round(mean + 1.2, 2),
                           "mean": mean}
            rec.cross_domain = 1 + (rng.random() < 0.35)
            rows.append(rec.to_dict())

    # Sanity-check the encoded marginals before freezing.
    by_topic = {}
    for row in rows:
        by_topic.setdefault(row["topic"], []).append(
            EvaluationRecord.from_dict(row))
    per_topic = {t: compute_topic_metrics(t, recs) for t, recs in by_topic.items()}
    agg = aggregate_metrics(per_topic)
    assert agg["total_yield"] == 863, agg["total_yield"]
    assert agg["unique_hits"] == 64, agg["unique_hits"]
    assert agg["coverage"] == "36/50", agg["coverage"]
    assert abs(agg["yield_mean"] - 17.3) <= 0.05, agg["yield_mean"]
    assert abs(agg["hit_rate_mean"] - 5.8) <= 0.05, agg["hit_rate_mean"]
    assert abs(agg["hyps_per_hit"] - 13.5) <= 0.05, agg["hyps_per_hit"]
    return rows


# ---------------------------------------------------------------------------
# Trigger x drift crosstab fixture (reported rows split at median drift).
# ---------------------------------------------------------------------------

CROSSTAB_PLAN = [
    # trigger, low n, low hits, high n, high hits
    ("GAP_EXPLOITATION", 9, 3, 18, 0),
    ("BRIDGE", 104, 3, 77, 0),
    ("GAP", 73, 2, 72, 1),
    ("NON_OBVIOUS_BRIDGE", 69, 1, 103, 1),
    ("CONTRADICTION", 81, 1, 75, 0),
    ("CROSS_PAPER", 36, 0, 54, 0),
    # Below the n >= 9 reporting floor; must not appear in the table.
    ("TREND_CONFIRMED", 3, 0, 2, 0),
]


def build_crosstab_records() -> list[dict]:
    low_topics = [(f"steady-{i:02d}", round(0.150 + i * 0.0058, 4))
                  for i in range(20)]
    high_topics = [(f"moving-{i:02d}", round(0.268 + i * 0.008, 4))
                   for i in range(20)]
    # Median of all 40 drifts = (0.2602 + 0.268) / 2 = 0.2641; every "low"
    # topic sits at or below it, every "high" topic above.
    rows = []
    counters = {"low": 0, "high": 0}

    def emit(trigger, side, count, hits):
        topics = low_topics if side == "low" else high_topics
        for j in range(count):
            topic, drift = topics[counters[side] % len(topics)]
            counters[side] += 1
            rows.append({
                "topic": topic, "drift": drift, "trigger": trigger,
                "is_hit": j < hits,
                "novelty": 6.7, "best_match": 6.2 if j < hits else 4.4,
                "window_label": WINDOW_LABELS[j % 6],
            })

    for trigger, low_n, low_hits, high_n, high_hits in CROSSTAB_PLAN:
        emit(trigger, "low", low_n, low_hits)
        emit(trigger, "high", high_n, high_hits)
    return rows


# ---------------------------------------------------------------------------
# Per-window dynamics fixture (892 hypotheses over six windows).
# ---------------------------------------------------------------------------

WINDOW_PLAN = [
    ("2024-01", 144, 6.73, 5),
    ("2024-03", 147, 6.81, 1),
    ("2024-05", 155, 6.86, 2),
    ("2024-07", 151, 6.86, 2),
    ("2024-09", 148, 6.84, 2),
    ("2024-11", 147, 6.86, 0),
]


def build_window_records() -> list[dict]:
    rows = []
    for label, n, novelty, hits in WINDOW_PLAN:
        for j in range(n):
            rows.append({
                "topic": f"wtopic-{j % 25:02d}", "drift": None,
                "trigger": None, "is_hit": j < hits,
                "novelty": novelty, "best_match": 6.3 if j < hits else 4.5,
                "window_label": label,
            })
    assert len(rows) == 892
    return rows


# ---------------------------------------------------------------------------
# Novelty x alignment quadrant fixture.
# Medians: novelty 6.80, best match 4.80 (elements equal to the median go
# low). Cells: high/low = 233 (0 hits, drift 0.282), low/high = 132 (4 hits),
# low/low = 316, high/high = 211.
# ---------------------------------------------------------------------------

def build_quadrant_records() -> list[dict]:
    rng = random.Random(55)
    rows = []

    def add(n, novelty_range, best_range, hits=0, drift=0.25,
            novelty_exact=None, best_exact=None):
        for j in range(n):
            nov = novelty_exact if novelty_exact is not None else round(
                rng.uniform(*novelty_range), 2)
            best = best_exact if best_exact is not None else round(
                rng.uniform(*best_range), 2)
            rows.append({
                "topic": f"qtopic-{len(rows) % 30:02d}", "drift": drift,
                "trigger": None, "is_hit": j < hits, "novelty": nov,
                "best_match": best, "window_label": None,
            })

    # low novelty, low alignment: 316 (3 pin the novelty median, 104 pin the
    # best-match median so both medians land exactly on 6.80 / 4.80)
    add(3, None, None, novelty_exact=6.80, best_exact=4.20)
    add(104, (5.50, 6.79), None, best_exact=4.80)
    add(209, (5.50, 6.79), (2.00, 4.79))
    # low novelty, high alignment: 132 with 4 hits (hits need best >= 6.0)
    add(4, (5.50, 6.79), (6.00, 6.80), hits=4)
    add(128, (5.50, 6.79), (4.90, 5.90))
    # high novelty, low alignment: 233, zero hits, drift pinned at 0.282
    add(233, (6.81, 8.50), (2.00, 4.79), drift=0.282)
    # high novelty, high alignment: 211
    add(211, (6.81, 8.50), (4.90, 5.90))
    assert len(rows) == 892
    nov_sorted = sorted(r["novelty"] for r in rows)
    best_sorted = sorted(r["best_match"] for r in rows)
    assert (nov_sorted[445] + nov_sorted[446]) / 2 == 6.80
    assert (best_sorted[445] + best_sorted[446]) / 2 == 4.80
    return rows


# ---------------------------------------------------------------------------
# Drift vs hit-rate correlation fixture: 50 topics, Spearman rho -0.281.
# With integer ranks, rho = 1 - 6*S/124950 where S = sum of squared rank
# differences; S is always even, so target S = 26676 (rho = -0.28096).
# ---------------------------------------------------------------------------

def _find_permutation(target_s: int, n: int = 50, seed: int = 11) -> list[int]:
    rng = random.Random(seed)
    perm = list(range(n))
    rng.shuffle(perm)

    def score(p):
        return sum((i - v) ** 2 for i, v in enumerate(p))

    current = score(perm)
    for _ in range(200000):
        if current == target_s:
            return perm
        i, j = rng.randrange(n), rng.randrange(n)
        if i == j:
            continue
        pi, pj = perm[i], perm[j]
        delta = ((i - pj) ** 2 + (j - pi) ** 2) - ((i - pi) ** 2 + (j - pj) ** 2)
        # Accept swaps that move us closer to the target.
        if abs(current + delta - target_s) <= abs(current - target_s):
            perm[i], perm[j] = pj, pi
            current += delta
    raise RuntimeError(f"no permutation found (stuck at {current})")


def build_drift_fixture() -> dict:
    perm = _find_permutation(26676)
    drifts = [round(0.150 + 0.0056 * i, 4) for i in range(50)]
    # Strictly decreasing base so higher hit-rate rank means higher rate and
    # no ties anywhere.
    hit_rates = [round(0.2 + 0.24 * perm[i], 4) for i in range(50)]
    res = rank_correlation(drifts, hit_rates, method="spearman")
    assert abs(res.statistic - (-0.281)) <= 1e-3, res.statistic
    assert abs(res.p_value - 0.051) <= 5e-3, res.p_value
    return {
        "topics": [f"topic-{i + 1:02d}" for i in range(50)],
        "drift": drifts,
        "hit_rate": hit_rates,
        "expected_spearman_rho": round(res.statistic, 9),
        "expected_p_value": round(res.p_value, 9),
    }


# ---------------------------------------------------------------------------
# Paired per-topic novelty fixture (strong one-sided shift, p << 0.001).
# ---------------------------------------------------------------------------

def build_novelty_pairs() -> dict:
    rng = random.Random(7)
    lite, full = [], []
    for i in range(50):
        base = 6.03 + rng.gauss(0, 0.20)
        shift = 0.79 + rng.gauss(0, 0.08)
        if i % 25 == 7:
            shift = -0.05  # a couple of reversals keep it honest
        lite.append(round(base, 3))
        full.append(round(base + shift, 3))
    return {"lite": lite, "full": full}


# ---------------------------------------------------------------------------
# Embedding-space fixture calibrated to diversity 0.499 and a centroid
# distance vs score Pearson r of -0.235.
# ---------------------------------------------------------------------------

def _mean_pairwise_cosine_distance(mat: np.ndarray) -> float:
    unit = mat / np.linalg.norm(mat, axis=1, keepdims=True)
    sims = unit @ unit.T
    n = mat.shape[0]
    iu = np.triu_indices(n, k=1)
    return float((1.0 - sims[iu]).mean())


def _centroid_distances(mat: np.ndarray) -> np.ndarray:
    c = mat.mean(axis=0)
    cn = np.linalg.norm(c)
    norms = np.linalg.norm(mat, axis=1)
    return 1.0 - (mat @ c) / (norms * cn)


def build_embedding_space(n: int = 160, dim: int = 24) -> dict:
    rng = np.random.default_rng(2025)
    center = rng.standard_normal(dim)
    center /= np.linalg.norm(center)
    noise = rng.standard_normal((n, dim))

    def cloud(spread: float) -> np.ndarray:
        mat = center[None, :] + spread * noise
        return mat / np.linalg.norm(mat, axis=1, keepdims=True)

    lo, hi = 0.05, 3.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _mean_pairwise_cosine_distance(cloud(mid)) < 0.499:
            lo = mid
        else:
            hi = mid
    spread = 0.5 * (lo + hi)
    mat = cloud(spread)

    cd = _centroid_distances(mat)
    cd_std = cd.std()
    score_noise = rng.standard_normal(n)
    target_r = -0.235

    def pearson(sigma: float) -> float:
        scores = -cd / cd_std + sigma * score_noise
        return float(np.corrcoef(cd, scores)[0, 1])

    lo, hi = 0.05, 50.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if pearson(mid) < target_r:
            lo = mid
        else:
            hi = mid
    sigma = 0.5 * (lo + hi)
    raw = -cd / cd_std + sigma * score_noise
    # Affine map to a plausible 0-10 judge-score band (correlation invariant).
    scores = 4.5 + 1.0 * (raw - raw.mean()) / raw.std()
    order = np.argsort(scores)
    hits = [False] * n
    for idx in order[-6:]:
        hits[int(idx)] = True

    achieved_div = _mean_pairwise_cosine_distance(mat)
    achieved_r = float(np.corrcoef(cd, scores)[0, 1])
    assert abs(achieved_div - 0.499) < 2e-3, achieved_div
    assert abs(achieved_r - target_r) < 2e-3, achieved_r
    return {
        "vectors": [[round(float(x), 8) for x in row] for row in mat],
        "scores": [round(float(s), 6) for s in scores],
        "hits": hits,
        "expected_diversity": round(achieved_div, 6),
        "expected_centroid_score_pearson": round(achieved_r, 6),
    }


def main() -> None:
    _write_jsonl(OUT / "headline_records.jsonl", build_headline_records())
    _write_jsonl(OUT / "crosstab_records.jsonl", build_crosstab_records())
    _write_jsonl(OUT / "window_records.jsonl", build_window_records())
    _write_jsonl(OUT / "quadrant_records.jsonl", build_quadrant_records())
    _write_json(OUT / "drift_hit_rate.json", build_drift_fixture())
    _write_json(OUT / "novelty_pairs.json", build_novelty_pairs())
    _write_json(OUT / "embedding_space.json", build_embedding_space())
    _write_json(OUT / "token_ledger.json", {
        "variant": "lite",
        "tokens": 26_000_000,
        "hypotheses": 863,
        "unique_hits": 64,
    })


if __name__ == "__main__":
    main()
