"""Multi-dataset classifier comparison: Friedman/Nemenyi and the Bayesian sign test."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

__all__ = [
    "ScoreTable",
    "FriedmanReport",
    "BayesReport",
    "NEMENYI_Q",
    "nemenyi_critical_difference",
    "rank_methods",
    "friedman_nemenyi",
    "bayesian_sign_test",
]

# Critical values for the Nemenyi test: Studentized-range quantiles at infinite
# degrees of freedom divided by sqrt(2), frozen from scipy.stats.studentized_range
# (q_alpha = ppf(1 - alpha, k, inf) / sqrt(2)); k is the number of methods.
NEMENYI_Q = {
    0.05: {2: 1.9600, 3: 2.3437, 4: 2.5690, 5: 2.7278, 6: 2.8497, 7: 2.9483, 8: 3.0309, 9: 3.1017, 10: 3.1637},
    0.10: {2: 1.6449, 3: 2.0523, 4: 2.2913, 5: 2.4595, 6: 2.5885, 7: 2.6927, 8: 2.7799, 9: 2.8546, 10: 2.9199},
}


@dataclass(frozen=True)
class ScoreTable:
    """N datasets by k methods of mean scores in [0, 1]; no missing cells."""

    methods: tuple[str, ...]
    datasets: tuple[str, ...]
    scores: np.ndarray  # (N, k)

    def __post_init__(self):
        k, n = len(self.methods), len(self.datasets)
        if self.scores.shape != (n, k):
            raise ValueError(f"scores must be ({n}, {k}), got {self.scores.shape}")
        if k < 2 or n < 2:
            raise ValueError("need at least 2 methods and 2 datasets")
        if not np.all(np.isfinite(self.scores)):
            raise ValueError("score table has missing or non-finite cells")


@dataclass(frozen=True)
class FriedmanReport:
    methods: tuple[str, ...]
    avg_ranks: np.ndarray
    statistic: float
    p_value: float
    iman_davenport: float
    iman_davenport_p: float
    cd: float
    alpha: float
    groups: tuple[tuple[str, ...], ...]


@dataclass(frozen=True)
class BayesReport:
    p_a_gt_b: float
    p_rope: float
    p_b_gt_a: float
    rope: float
    samples: int


def rank_methods(t: ScoreTable):
    """Per-dataset ranks (1 = best accuracy, ties get the mean rank) and their averages."""
    ranks = np.vstack([sps.rankdata(-row, method="average") for row in t.scores])
    return ranks, ranks.mean(axis=0)


def nemenyi_critical_difference(k: int, n_datasets: int, alpha: float = 0.05) -> float:
    """CD = q_alpha * sqrt(k(k+1) / (6N))."""
    try:
        q = NEMENYI_Q[alpha][k]
    except KeyError:
        raise ValueError(f"no Nemenyi constant for k={k}, alpha={alpha}") from None
    return q * np.sqrt(k * (k + 1) / (6.0 * n_datasets))


def friedman_nemenyi(t: ScoreTable, alpha: float = 0.05) -> FriedmanReport:
    """Friedman rank test with the Nemenyi post-hoc grouping.

    The chi-square statistic is 12N/(k(k+1)) * (sum R_j^2 - k(k+1)^2/4) with
    k-1 degrees of freedom; the Iman-Davenport F correction is reported
    alongside but grouping uses the Nemenyi critical difference: two methods
    fall in the same group when their average ranks differ by less than CD.
    """
    k = len(t.methods)
    n = len(t.datasets)
    if k < 3:
        raise ValueError("Friedman chi-square approximation needs k >= 3 methods")
    _, avg_ranks = rank_methods(t)
    statistic = 12.0 * n / (k * (k + 1)) * (np.sum(avg_ranks**2) - k * (k + 1) ** 2 / 4.0)
    p_value = float(sps.chi2.sf(statistic, k - 1))
    denom = n * (k - 1) - statistic
    if denom <= 0:
        iman = np.inf
        iman_p = 0.0
    else:
        iman = (n - 1) * statistic / denom
        iman_p = float(sps.f.sf(iman, k - 1, (k - 1) * (n - 1)))
    cd = nemenyi_critical_difference(k, n, alpha)

    order = np.argsort(avg_ranks, kind="stable")
    groups = []
    for start in range(k):
        end = start
        while end + 1 < k and avg_ranks[order[end + 1]] - avg_ranks[order[start]] < cd:
            end += 1
        groups.append((start, end))
    maximal = [g for g in groups if not any(o[0] <= g[0] and g[1] <= o[1] and o != g for o in groups)]
    named = tuple(tuple(t.methods[order[i]] for i in range(a, b + 1)) for a, b in dict.fromkeys(maximal))

    return FriedmanReport(
        methods=t.methods,
        avg_ranks=avg_ranks,
        statistic=float(statistic),
        p_value=p_value,
        iman_davenport=float(iman),
        iman_davenport_p=iman_p,
        cd=float(cd),
        alpha=alpha,
        groups=named,
    )


def bayesian_sign_test(a_scores, b_scores, rope: float, samples: int = 50000, seed=0) -> BayesReport:
    """Dirichlet-process sign test with a region of practical equivalence.

    Score differences are trichotomized at +/-rope; a prior pseudo-count of 1
    sits on the rope outcome. Each Monte-Carlo draw is a probability triple
    (a wins, rope, b wins); the reported probabilities are the fractions of
    draws in which each component is the strict maximum, with exact ties split
    uniformly.
    """
    a = np.asarray(a_scores, dtype=np.float64)
    b = np.asarray(b_scores, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("score vectors must be 1-D and of equal length")
    if rope < 0:
        raise ValueError("rope must be >= 0")

    z = a - b
    n_right = int(np.sum(z > rope))  # a better
    n_left = int(np.sum(z < -rope))  # b better
    n_rope = len(z) - n_right - n_left
    concentration = np.array([n_right, n_rope + 1.0, n_left])

    rng = np.random.default_rng(seed)
    # gamma draws normalize to Dirichlet; shape 0 yields an exact zero component
    draws = rng.gamma(shape=np.broadcast_to(concentration, (samples, 3)))
    draws /= draws.sum(axis=1, keepdims=True)
    is_max = draws == draws.max(axis=1, keepdims=True)
    weights = is_max / is_max.sum(axis=1, keepdims=True)
    p = weights.sum(axis=0) / samples
    return BayesReport(
        p_a_gt_b=float(p[0]),
        p_rope=float(p[1]),
        p_b_gt_a=float(p[2]),
        rope=rope,
        samples=samples,
    )
