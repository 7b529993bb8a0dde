"""Set-retrieval metrics and the two significance tests used in reports."""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import betainc


@dataclass(frozen=True)
class PRF1:
    precision: float
    recall: float
    f1: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.precision, self.recall, self.f1)


ZERO = PRF1(0.0, 0.0, 0.0)


def prf1(retrieved, relevant) -> PRF1:
    """Precision, recall and F1 of a retrieved set against a relevant set."""
    retrieved, relevant = set(retrieved), set(relevant)
    if not relevant:
        raise ValueError("relevant set is empty; recall is undefined")
    hits = len(retrieved & relevant)
    p = hits / len(retrieved) if retrieved else 0.0
    r = hits / len(relevant)
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return PRF1(p, r, f)


def mean_prf1(values) -> PRF1:
    values = list(values)
    if not values:
        return ZERO
    n = len(values)
    return PRF1(
        math.fsum(v.precision for v in values) / n,
        math.fsum(v.recall for v in values) / n,
        math.fsum(v.f1 for v in values) / n,
    )


def t_sf_two_sided(t: float, dof: int) -> float:
    """Two-sided p-value of Student's t via the regularized incomplete beta."""
    if dof <= 0:
        return float("nan")
    if math.isinf(t):
        return 0.0
    x = dof / (dof + t * t)
    return float(betainc(dof / 2.0, 0.5, x))


@dataclass(frozen=True)
class PairedTTest:
    n: int
    mean_delta: float
    t: float
    p_value: float


def paired_t_test(a, b) -> PairedTTest:
    """Paired t-test of ``a - b``. Zero-variance deltas give p = 0 (or 1 when
    every delta is zero)."""
    a, b = list(a), list(b)
    if len(a) != len(b):
        raise ValueError("paired samples differ in length")
    n = len(a)
    deltas = [x - y for x, y in zip(a, b)]
    if n < 2:
        return PairedTTest(n, deltas[0] if deltas else 0.0, float("nan"), float("nan"))
    mean = math.fsum(deltas) / n
    var = math.fsum((d - mean) ** 2 for d in deltas) / (n - 1)
    if var == 0.0:
        if mean == 0.0:
            return PairedTTest(n, 0.0, 0.0, 1.0)
        return PairedTTest(n, mean, math.copysign(math.inf, mean), 0.0)
    t = mean / math.sqrt(var / n)
    return PairedTTest(n, mean, t, t_sf_two_sided(t, n - 1))


def chi2_sf_1dof(x: float) -> float:
    """Survival function of the chi-squared distribution with one dof."""
    if x <= 0:
        return 1.0
    return math.erfc(math.sqrt(x / 2.0))


def chi2_2x2(a: int, b: int, c: int, d: int) -> tuple[float, float]:
    """Pearson chi-squared (no continuity correction) for [[a, b], [c, d]].

    A zero row or column total gives statistic 0 and p = 1.
    """
    n = a + b + c + d
    denom = (a + b) * (c + d) * (a + c) * (b + d)
    if denom == 0:
        return 0.0, 1.0
    stat = n * (a * d - b * c) ** 2 / denom
    return float(stat), chi2_sf_1dof(stat)
