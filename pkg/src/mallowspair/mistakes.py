"""Error models linking a latent ranking to reported pair orders.

Bernoulli model: every comparison is flipped independently with constant
probability theta < 0.5. Logistic model: the flip probability decays with
the rank gap of the two items, so close items are confused more often.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .perms import PreferenceSet


@dataclass(frozen=True)
class BernoulliParams:
    theta: float

    def __post_init__(self):
        if not 0.0 <= self.theta < 0.5:
            raise ValueError("theta must lie in [0, 0.5)")


@dataclass(frozen=True)
class LogisticParams:
    beta0: float
    beta1: float

    def __post_init__(self):
        # beta1 = 0 is admitted (flat slope: collapses to the Bernoulli model).
        if self.beta0 <= 0 or self.beta1 < 0:
            raise ValueError("beta0 must be positive and beta1 non-negative")


def g_vector(ps: PreferenceSet, r: np.ndarray) -> np.ndarray:
    """Per-comparison mistake indicators: 1 where the reported order
    contradicts the ranking r."""
    return (r[ps.preferred] > r[ps.other]).astype(np.int64)


def g_indicator(preferred: int, other: int, r: np.ndarray) -> int:
    return int(r[preferred] > r[other])


def bm_log_likelihood(ps: PreferenceSet, r: np.ndarray, p: BernoulliParams) -> float:
    """Log likelihood of one preference set under the Bernoulli model."""
    g_sum = int(g_vector(ps, r).sum())
    m = ps.n_pairs
    if p.theta == 0.0:
        return 0.0 if g_sum == 0 else -math.inf
    return g_sum * math.log(p.theta / (1 - p.theta)) + m * math.log(1 - p.theta)


def lm_mistake_prob(rank_gap: int, n: int, p: LogisticParams) -> float:
    """Flip probability for a pair whose item ranks differ by rank_gap."""
    if n < 3:
        raise ValueError("logistic model undefined for n < 3")
    if not 1 <= rank_gap <= n - 1:
        raise ValueError(f"rank gap {rank_gap} out of range for n={n}")
    return 1.0 / (1.0 + math.exp(p.beta0 + p.beta1 * (rank_gap - 1) / (n - 2)))


def lm_log_likelihood(ps: PreferenceSet, r: np.ndarray, p: LogisticParams) -> float:
    """Log likelihood of one preference set under the logistic model."""
    n = r.size
    if n < 3:
        raise ValueError("logistic model undefined for n < 3")
    gaps = np.abs(r[ps.preferred] - r[ps.other])
    g = r[ps.preferred] > r[ps.other]
    eta = p.beta0 + p.beta1 * (gaps - 1) / (n - 2)
    # log q = -log(1 + e^eta), log(1-q) = eta - log(1 + e^eta)
    log1pe = np.logaddexp(0.0, eta)
    return float(np.where(g, -log1pe, eta - log1pe).sum())
