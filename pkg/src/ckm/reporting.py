"""Cross-variant comparison tables: paired statistics and token efficiency."""

from __future__ import annotations

import csv
from itertools import combinations
from pathlib import Path

from .analysis.stats import cohens_d, wilcoxon_signed_rank

COMPARISON_METRICS = (
    ("hit_rate", "hit_rate"),
    ("novelty", "novelty_mean"),
    ("best_match", "best_match_mean"),
    ("yield", "yield"),
    ("cross_domain", "cross_domain"),
)


def pairwise_comparisons(per_topic_by_variant: dict) -> list[dict]:
    """Per-metric paired Wilcoxon + Cohen's d over common topics.

    ``per_topic_by_variant``: variant -> {topic -> metric dict}. Mean A/B are
    per-topic means, matching how aggregate tables are reported.
    """
    rows = []
    for va, vb in combinations(sorted(per_topic_by_variant), 2):
        ta, tb = per_topic_by_variant[va], per_topic_by_variant[vb]
        common = sorted(set(ta) & set(tb))
        for metric, key in COMPARISON_METRICS:
            a_vals, b_vals = [], []
            for t in common:
                x, y = ta[t].get(key), tb[t].get(key)
                if x is None or y is None:
                    continue
                a_vals.append(float(x))
                b_vals.append(float(y))
            if len(a_vals) < 2:
                continue
            mean_a = sum(a_vals) / len(a_vals)
            mean_b = sum(b_vals) / len(b_vals)
            stat = wilcoxon_signed_rank(a_vals, b_vals)
            try:
                d = cohens_d(a_vals, b_vals)
            except ValueError:
                d = None
            rows.append({
                "comparison": f"{va} vs {vb}",
                "metric": metric,
                "mean_a": mean_a,
                "mean_b": mean_b,
                "delta": mean_a - mean_b,
                "cohens_d": d,
                "p_value": stat.p_value,
                "n": stat.n,
            })
    return rows


def token_efficiency(rows) -> list[dict]:
    """Total / per-hypothesis / per-hit token costs per variant.

    ``rows``: iterable of {"variant", "tokens", "hypotheses", "unique_hits"}.
    """
    out = []
    for row in rows:
        tokens = int(row["tokens"])
        hyps = int(row["hypotheses"])
        hits = int(row["unique_hits"])
        out.append({
            "variant": row["variant"],
            "tokens": tokens,
            "tokens_per_hypothesis": (tokens / hyps) if hyps else None,
            "tokens_per_hit": (tokens / hits) if hits else None,
            "hypotheses": hyps,
            "unique_hits": hits,
        })
    return out


def _write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_comparisons_csv(rows, path) -> Path:
    return _write_csv(
        path,
        ["comparison", "metric", "mean_a", "mean_b", "delta", "cohens_d",
         "p_value", "n"],
        [[r["comparison"], r["metric"], round(r["mean_a"], 4),
          round(r["mean_b"], 4), round(r["delta"], 4),
          "" if r["cohens_d"] is None else round(r["cohens_d"], 4),
          f"{r['p_value']:.6g}", r["n"]] for r in rows],
    )


def write_tokens_csv(rows, path) -> Path:
    return _write_csv(
        path,
        ["variant", "tokens", "tokens_per_hypothesis", "tokens_per_hit",
         "hypotheses", "unique_hits"],
        [[r["variant"], r["tokens"],
          "" if r["tokens_per_hypothesis"] is None
          else round(r["tokens_per_hypothesis"], 1),
          "" if r["tokens_per_hit"] is None else round(r["tokens_per_hit"], 1),
          r["hypotheses"], r["unique_hits"]] for r in rows],
    )


def write_metrics_csv(per_variant_aggregate: dict, path) -> Path:
    """Headline metrics table (one row per variant)."""
    rows = []
    for variant in sorted(per_variant_aggregate):
        agg = per_variant_aggregate[variant]
        rows.append([
            variant,
            round(agg["yield_mean"], 1) if agg["yield_mean"] is not None else "",
            round(agg["hit_rate_mean"], 1) if agg["hit_rate_mean"] is not None else "",
            agg["coverage"],
            agg["unique_hits"],
            round(agg["hyps_per_hit"], 1) if agg["hyps_per_hit"] else "",
        ])
    return _write_csv(
        path, ["variant", "yield", "hit_rate_pct", "coverage", "unique_hits",
               "hyps_per_hit"], rows)
