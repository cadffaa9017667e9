"""Synthetic data generation: latent rankings from the ranking model, uniform
pair assignment, and mistake injection under either error model."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import mistakes
from .perms import Dataset, PreferenceSet, invert, ranking_of
from .sampler import swap_propose
from .perms import distance

# Metropolis moves used to draw one ranking (validated against small-n
# enumeration; see tests).
BURN_IN_SWEEPS = 200


@dataclass
class SimConfig:
    n_items: int
    n_assessors: int
    lambda_pairs: float                    # mean comparisons per assessor
    alpha_true: float
    theta_true: float | None = None        # BM truth
    beta_true: tuple[float, float] | None = None  # LM truth (beta0, beta1)
    rho_true: np.ndarray | None = None     # (G, n) rankings; random if None
    cluster_weights: np.ndarray | None = None
    metric: str = "footrule"
    seed: int = 0
    fixed_pairs: int | None = None         # exact M_j instead of Poisson
    min_pairs: int = 5

    def __post_init__(self):
        max_pairs = self.n_items * (self.n_items - 1) // 2
        if self.lambda_pairs > max_pairs:
            raise ValueError("lambda_pairs exceeds the number of item pairs")
        if (self.theta_true is None) == (self.beta_true is None):
            raise ValueError("specify exactly one of theta_true / beta_true")
        if self.theta_true is not None and not 0 <= self.theta_true < 0.5:
            raise ValueError("theta_true must lie in [0, 0.5)")


@dataclass
class TruthRecord:
    rho_true: np.ndarray            # (G, n)
    latent_true: np.ndarray         # (N, n)
    labels_true: np.ndarray         # (N,)
    flips: list[np.ndarray]         # per assessor, per pair mistake flags
    config: SimConfig = field(repr=False, default=None)


def sample_mallows(rho, alpha: float, metric: str, rng, sweeps: int = BURN_IN_SWEEPS):
    """One draw from the distance-based ranking model via a Metropolis run
    with the swap proposal, started at the consensus."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    rho = np.asarray(rho, dtype=np.int64)
    n = rho.size
    r = rho.copy()
    x = invert(r)
    l_star = max(1, n // 2)
    d_cur = 0
    for _ in range(sweeps * n):
        # Lazy step: a pure transposition walk has period two (after an even
        # number of accepted swaps only even permutations are reachable, which
        # bites exactly when alpha = 0 and nothing is ever rejected).
        if rng.random() < 0.5:
            continue
        xp, l, u = swap_propose(x, l_star, rng)
        i1, i2 = xp[u - 1], xp[u + l - 1]
        rp = r.copy()
        rp[i1], rp[i2] = r[i2], r[i1]
        if metric == "footrule":
            d_new = (
                d_cur
                + abs(rp[i1] - rho[i1])
                + abs(rp[i2] - rho[i2])
                - abs(r[i1] - rho[i1])
                - abs(r[i2] - rho[i2])
            )
        else:
            d_new = distance(metric, rp, rho)
        log_a = -(alpha / n) * (d_new - d_cur)
        if log_a >= 0 or rng.random() < math.exp(log_a):
            r, x, d_cur = rp, xp, d_new
    return r


def _draw_n_pairs(cfg: SimConfig, rng) -> int:
    max_pairs = cfg.n_items * (cfg.n_items - 1) // 2
    if cfg.fixed_pairs is not None:
        return min(cfg.fixed_pairs, max_pairs)
    lo = min(cfg.min_pairs, max_pairs)
    while True:
        m = int(rng.poisson(cfg.lambda_pairs))
        if lo <= m <= max_pairs:
            return m


def generate_dataset(cfg: SimConfig, rng=None) -> tuple[Dataset, TruthRecord]:
    """Draw latent rankings, assign random pairs and inject mistakes."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    n, N = cfg.n_items, cfg.n_assessors
    if cfg.rho_true is None:
        rho_true = (rng.permutation(n) + 1)[None, :]
    else:
        rho_true = np.atleast_2d(np.asarray(cfg.rho_true, dtype=np.int64))
    G = rho_true.shape[0]
    if cfg.cluster_weights is None:
        weights = np.full(G, 1.0 / G)
    else:
        weights = np.asarray(cfg.cluster_weights, dtype=float)
        weights = weights / weights.sum()
    labels = rng.choice(G, size=N, p=weights)

    all_pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    latent = np.empty((N, n), dtype=np.int64)
    sets = []
    flips = []
    for j in range(N):
        r = sample_mallows(rho_true[labels[j]], cfg.alpha_true, cfg.metric, rng)
        latent[j] = r
        m = _draw_n_pairs(cfg, rng)
        chosen = rng.choice(len(all_pairs), size=m, replace=False)
        preferred = np.empty(m, dtype=np.int64)
        other = np.empty(m, dtype=np.int64)
        flip = np.zeros(m, dtype=bool)
        for idx, c in enumerate(chosen):
            a, b = all_pairs[c]
            win, lose = (a, b) if r[a] < r[b] else (b, a)
            if cfg.theta_true is not None:
                p_flip = cfg.theta_true
            else:
                gap = abs(int(r[a]) - int(r[b]))
                p_flip = mistakes.lm_mistake_prob(
                    gap, n, mistakes.LogisticParams(*cfg.beta_true)
                )
            if rng.random() < p_flip:
                win, lose = lose, win
                flip[idx] = True
            preferred[idx], other[idx] = win, lose
        sets.append(PreferenceSet(j, preferred, other))
        flips.append(flip)
    dataset = Dataset(n, tuple(sets))
    truth = TruthRecord(rho_true, latent, labels, flips, cfg)
    return dataset, truth
