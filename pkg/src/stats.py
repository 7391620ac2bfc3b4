"""
Distribution helpers shared by the regression, trend and matching code.
"""
import math
from typing import Sequence, Tuple

import numpy as np
from scipy import special
from scipy.stats import rankdata

EXACT_WILCOXON_MAX_N = 25


def t_two_sided_p(t: float, df: float) -> float:
    """
    Two-sided p-value of a t statistic via the regularized incomplete beta.

    Args:
        t: test statistic
        df: degrees of freedom (> 0)

    Returns:
        float: P(|T| >= |t|)
    """
    if math.isnan(t):
        return float("nan")
    if math.isinf(t):
        return 0.0
    return float(min(1.0, special.betainc(df / 2.0, 0.5, df / (df + t * t))))


def t_quantile(q: float, df: float) -> float:
    return float(special.stdtrit(df, q))


def normal_two_sided_p(z: float) -> float:
    if math.isnan(z):
        return float("nan")
    return float(min(1.0, 2.0 * special.ndtr(-abs(z))))


def normal_quantile(q: float) -> float:
    return float(special.ndtri(q))


def t_interval(mean: float, se: float, df: float, level: float = 0.95) -> Tuple[float, float]:
    half = t_quantile(0.5 + level / 2.0, df) * se
    return mean - half, mean + half


def _signed_rank_distribution(doubled_ranks: np.ndarray) -> np.ndarray:
    """
    Null distribution of the doubled positive-rank sum.

    Entry s holds the number of sign assignments whose positive doubled ranks sum to s.
    """
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=float)
    counts[0] = 1.0
    for r in doubled_ranks.astype(int):
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:total + 1 - r]
        counts = counts + shifted
    return counts


def wilcoxon_signed_rank(diffs: Sequence[float]) -> Tuple[float, float, str]:
    """
    Two-sided Wilcoxon signed-rank test on paired differences.

    Zero differences are dropped. Up to 25 nonzero differences use the exact
    null distribution (average ranks for ties); larger samples use the normal
    approximation with continuity and tie corrections.

    Returns:
        tuple: (W+ statistic, p-value, method 'exact' | 'normal')
    """
    d = np.asarray(diffs, dtype=float)
    d = d[d != 0]
    n = len(d)
    if n == 0:
        return 0.0, 1.0, "exact"
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())

    if n <= EXACT_WILCOXON_MAX_N:
        doubled = np.rint(2 * ranks)
        counts = _signed_rank_distribution(doubled)
        probs = counts / counts.sum()
        observed = int(round(2 * w_plus))
        lower = probs[:observed + 1].sum()
        upper = probs[observed:].sum()
        return w_plus, float(min(1.0, 2.0 * min(lower, upper))), "exact"

    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    variance = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_counts ** 3 - tie_counts)) / 48.0
    if variance <= 0:
        return w_plus, 1.0, "normal"
    z = max(0.0, abs(w_plus - mean) - 0.5) / math.sqrt(variance)
    return w_plus, normal_two_sided_p(z), "normal"
