"""Nonparametric statistics kernel: Wilcoxon signed-rank, Cohen's d,
Spearman/Pearson correlation, and the special functions they need.

Wilcoxon conventions (documented so fixtures stay stable): zero differences
are dropped, the exact null distribution is enumerated for n <= 25 (ties in
|d| handled through average ranks), and larger samples use the normal
approximation with tie correction and no continuity correction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class StatResult:
    test: str
    statistic: float
    p_value: float
    n: int
    effect_size: Optional[float] = None

    def __post_init__(self):
        if not (0.0 < self.p_value <= 1.0):
            raise ValueError(f"p_value {self.p_value} outside (0, 1]")
        if self.n < 1:
            raise ValueError("n must be >= 1")

    def to_dict(self) -> dict:
        return {"test": self.test, "statistic": self.statistic,
                "p_value": self.p_value, "n": self.n,
                "effect_size": self.effect_size}


TINY_P = 1e-300


def normal_sf(z: float) -> float:
    """Upper tail of the standard normal."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _betacf(a: float, b: float, x: float) -> float:
    # Lentz's continued fraction for the incomplete beta function.
    max_iter, eps, fpmin = 300, 3e-16, 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, df: int) -> float:
    """Two-sided p for a t statistic with df degrees of freedom."""
    if df < 1:
        raise ValueError("df must be >= 1")
    x = df / (df + t * t)
    return betainc_reg(df / 2.0, 0.5, x)


def rankdata(values) -> list[float]:
    """Ranks 1..n with average ranks for ties."""
    values = list(values)
    n = len(values)
    order = sorted(range(n), key=lambda i: values[i])
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def _signed_rank_parts(a, b):
    if len(a) != len(b):
        raise ValueError("paired samples must have equal length")
    diffs = [x - y for x, y in zip(a, b) if x != y]
    if not diffs:
        return [], 0.0, 0.0
    ranks = rankdata([abs(d) for d in diffs])
    w_plus = sum(r for d, r in zip(diffs, ranks) if d > 0)
    w_minus = sum(r for d, r in zip(diffs, ranks) if d < 0)
    return ranks, w_plus, w_minus


def _exact_signed_rank_p(ranks, w_plus) -> float:
    # DP over doubled ranks so tied (half-integer) ranks stay integral.
    scaled = [round(2 * r) for r in ranks]
    total = sum(scaled)
    counts = [0] * (total + 1)
    counts[0] = 1
    for r in scaled:
        for s in range(total - r, -1, -1):
            if counts[s]:
                counts[s + r] += counts[s]
    w_obs = round(2 * w_plus)
    w_small = min(w_obs, total - w_obs)
    lo = sum(counts[: w_small + 1])
    hi = sum(counts[total - w_small:])
    return min(1.0, (lo + hi) / 2 ** len(ranks))


def wilcoxon_signed_rank(a, b) -> StatResult:
    """Two-sided Wilcoxon signed-rank test on paired samples.

    Exact enumeration for n <= 25 retained pairs, normal approximation with
    tie correction above. All-zero differences give statistic 0, p = 1.
    """
    ranks, w_plus, w_minus = _signed_rank_parts(a, b)
    n = len(ranks)
    if n == 0:
        return StatResult("wilcoxon", statistic=0.0, p_value=1.0,
                          n=max(1, len(list(a))))
    statistic = min(w_plus, w_minus)
    if n <= 25:
        p = _exact_signed_rank_p(ranks, w_plus)
    else:
        mu = n * (n + 1) / 4.0
        var = n * (n + 1) * (2 * n + 1) / 24.0
        seen = {}
        for r in ranks:
            seen[r] = seen.get(r, 0) + 1
        var -= sum(t**3 - t for t in seen.values()) / 48.0
        z = (w_plus - mu) / math.sqrt(var)
        p = min(1.0, 2.0 * normal_sf(abs(z)))
    return StatResult("wilcoxon", statistic=float(statistic),
                      p_value=max(p, TINY_P), n=n)


def cohens_d(a, b) -> float:
    """Pooled-SD effect size (Bessel-corrected variances)."""
    a, b = list(a), list(b)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("cohens_d requires at least two values per sample")
    ma = sum(a) / len(a)
    mb = sum(b) / len(b)
    va = sum((x - ma) ** 2 for x in a) / (len(a) - 1)
    vb = sum((x - mb) ** 2 for x in b) / (len(b) - 1)
    pooled = math.sqrt(((len(a) - 1) * va + (len(b) - 1) * vb)
                       / (len(a) + len(b) - 2))
    if pooled == 0.0:
        raise ValueError("pooled standard deviation is zero; effect undefined")
    return (ma - mb) / pooled


def _pearson_r(x, y) -> float:
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("zero variance; correlation undefined")
    r = sxy / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def rank_correlation(x, y, method: str = "spearman") -> StatResult:
    """Spearman rho (default) or Pearson r, with a t-approximation p-value."""
    x, y = list(x), list(y)
    if len(x) != len(y):
        raise ValueError("samples must have equal length")
    n = len(x)
    if n < 3:
        raise ValueError("correlation requires at least 3 pairs")
    if method == "spearman":
        r = _pearson_r(rankdata(x), rankdata(y))
    elif method == "pearson":
        r = _pearson_r(x, y)
    else:
        raise ValueError(f"unknown method {method!r}")
    if abs(r) >= 1.0:
        p = TINY_P
    else:
        t = r * math.sqrt((n - 2) / (1.0 - r * r))
        p = max(t_two_sided_p(t, n - 2), TINY_P)
    return StatResult(method, statistic=r, p_value=p, n=n)
