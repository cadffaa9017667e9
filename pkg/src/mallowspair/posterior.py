"""Posterior summaries: relabeling, consensus estimates, interval estimates,
top-k marginals, pair prediction, cluster diagnostics and convergence stats.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import mistakes
from .perms import Dataset, distances_to, invert
from .sampler import SampleLog


@dataclass
class ScalarSummary:
    mean: float
    map_estimate: float
    hpd_low: float
    hpd_high: float


@dataclass
class ConsensusSummary:
    """Per-cluster point estimates and interval summaries."""

    cp_orderings: list[np.ndarray]        # item indices, best first
    map_rankings: list[np.ndarray]
    alpha: list[ScalarSummary]
    weight: list[ScalarSummary]
    theta: ScalarSummary | None = None
    beta0: ScalarSummary | None = None
    beta1: ScalarSummary | None = None


@dataclass
class ClusterDiagnostics:
    """Boxplot-ready per-iteration fit statistics for each candidate G."""

    candidates: list[int]
    distance_samples: dict[int, np.ndarray]
    misfit_samples: dict[int, np.ndarray]


def _assignment_probs(samples: SampleLog, dataset_latent: np.ndarray | None = None):
    """Per-iteration soft assignment matrices P[t, j, g], recomputed from the
    stored states (weights, alphas, rhos, latent) rather than the z draws."""
    S, G = samples.alphas.shape
    N = samples.latent.shape[1]
    n = samples.n_items
    from .partition import build_table

    logz = build_table(samples.metric, n)
    P = np.empty((S, G, N))
    for t in range(S):
        logp = np.empty((G, N))
        with np.errstate(divide="ignore"):
            log_eta = np.log(samples.weights[t])
        for g in range(G):
            d = distances_to(samples.metric, samples.latent[t], samples.rhos[t, g])
            logp[g] = (
                log_eta[g]
                - (samples.alphas[t, g] / n) * d
                - logz.at(samples.alphas[t, g])
            )
        logp -= logp.max(axis=0)
        p = np.exp(logp)
        P[t] = p / p.sum(axis=0)
    return np.transpose(P, (0, 2, 1))  # (S, N, G)


def relabel(samples: SampleLog, max_sweeps: int = 50) -> SampleLog:
    """Undo label switching by per-iteration cluster permutations chosen to
    minimize the KL loss against the running average assignment matrix
    (exhaustive over G! permutations; refuse above G = 8)."""
    G = samples.n_clusters
    if G == 1:
        return samples
    if G > 8:
        raise ValueError("exhaustive relabeling supported only for G <= 8")
    P = _assignment_probs(samples)
    S = P.shape[0]
    perms = list(itertools.permutations(range(G)))
    eps = 1e-300
    # Anchor on the first retained iteration; a symmetric running average
    # would leave every per-iteration choice tied and nothing would move.
    logQ0 = np.log(P[0] + eps)
    current = []
    for t in range(S):
        best, best_loss = None, math.inf
        for nu in perms:
            p = P[t][:, nu]
            loss = float((p * (np.log(p + eps) - logQ0)).sum())
            if loss < best_loss:
                best, best_loss = nu, loss
        current.append(best)
    for _ in range(max_sweeps):
        Pp = np.stack([P[t][:, current[t]] for t in range(S)])
        Q = Pp.mean(axis=0)
        logQ = np.log(Q + eps)
        changed = False
        for t in range(S):
            best, best_loss = None, math.inf
            for nu in perms:
                p = P[t][:, nu]
                loss = float((p * (np.log(p + eps) - logQ)).sum())
                if loss < best_loss:
                    best, best_loss = nu, loss
            if best != current[t]:
                current[t] = best
                changed = True
        if not changed:
            break
    out = SampleLog(
        model=samples.model,
        metric=samples.metric,
        n_items=samples.n_items,
        n_clusters=G,
        seed=samples.seed,
        thinning=samples.thinning,
        burn_in=samples.burn_in,
        alphas=samples.alphas.copy(),
        rhos=samples.rhos.copy(),
        thetas=None if samples.thetas is None else samples.thetas.copy(),
        betas=None if samples.betas is None else samples.betas.copy(),
        latent=samples.latent,
        labels=samples.labels.copy(),
        weights=samples.weights.copy(),
        accepted=dict(samples.accepted),
        proposed=dict(samples.proposed),
        g_eval_count=samples.g_eval_count,
    )
    for t in range(S):
        nu = np.array(current[t])
        out.alphas[t] = samples.alphas[t, nu]
        out.rhos[t] = samples.rhos[t, nu]
        out.weights[t] = samples.weights[t, nu]
        inv = np.empty(G, dtype=np.int64)
        inv[nu] = np.arange(G)
        out.labels[t] = inv[samples.labels[t]]
    return out


def cp_consensus(rho_samples: np.ndarray) -> np.ndarray:
    """Cumulative-probability consensus ordering.

    Sequentially picks the not-yet-chosen item with the largest marginal
    posterior probability of being ranked at or above the current position;
    ties break to the smallest item index.
    """
    rho_samples = np.atleast_2d(rho_samples)
    S, n = rho_samples.shape
    if S < 1:
        raise ValueError("need at least one sample")
    chosen: list[int] = []
    remaining = list(range(n))
    for pos in range(1, n + 1):
        cum = [(rho_samples[:, i] <= pos).mean() for i in remaining]
        best = remaining[int(np.argmax(cum))]
        chosen.append(best)
        remaining.remove(best)
    return np.array(chosen, dtype=np.int64)


def map_ranking(rho_samples: np.ndarray) -> np.ndarray:
    """Most frequent sampled ranking (posterior mode over permutations)."""
    rho_samples = np.atleast_2d(rho_samples)
    counter = Counter(map(tuple, rho_samples.tolist()))
    best = max(sorted(counter), key=lambda k: counter[k])
    return np.array(best, dtype=np.int64)


def map_and_hpd(samples: np.ndarray, level: float = 0.95) -> ScalarSummary:
    """Histogram-mode MAP (Freedman-Diaconis bins) plus the shortest
    contiguous interval holding the target posterior mass."""
    x = np.asarray(samples, dtype=float)
    if x.size < 100:
        raise ValueError("need at least 100 samples")
    srt = np.sort(x)
    if srt[0] == srt[-1]:
        c = float(srt[0])
        return ScalarSummary(c, c, c, c)
    q75, q25 = np.percentile(x, [75, 25])
    iqr = q75 - q25
    if iqr > 0:
        width = 2 * iqr / x.size ** (1 / 3)
        bins = max(1, int(math.ceil((srt[-1] - srt[0]) / width)))
    else:
        bins = 10
    hist, edges = np.histogram(x, bins=bins)
    k = int(np.argmax(hist))
    map_est = 0.5 * (edges[k] + edges[k + 1])
    m = int(math.ceil(level * x.size))
    m = min(m, x.size)
    widths = srt[m - 1:] - srt[: x.size - m + 1]
    lo = int(np.argmin(widths))
    return ScalarSummary(
        mean=float(x.mean()),
        map_estimate=float(map_est),
        hpd_low=float(srt[lo]),
        hpd_high=float(srt[lo + m - 1]),
    )


def topk_marginals(rank_samples: np.ndarray, k: int) -> np.ndarray:
    """Per-item empirical probability of being ranked in the top k."""
    rank_samples = np.atleast_2d(rank_samples)
    if not 0 < k < rank_samples.shape[1]:
        raise ValueError("k must lie in 1..n-1")
    return (rank_samples <= k).mean(axis=0)


def joint_topk_probability(rank_samples: np.ndarray, items, k: int) -> float:
    """Empirical probability that all listed items rank in the top k
    simultaneously."""
    rank_samples = np.atleast_2d(rank_samples)
    items = np.asarray(list(items), dtype=np.int64)
    if items.size > k:
        raise ValueError("item set larger than k")
    return float((rank_samples[:, items] <= k).all(axis=1).mean())


def best_joint_topk_triplet(rank_samples: np.ndarray) -> tuple[np.ndarray, float]:
    """Item triplet with the largest joint posterior probability of occupying
    the top-3 ranks, with its probability."""
    rank_samples = np.atleast_2d(rank_samples)
    tops = [frozenset(np.nonzero(row <= 3)[0].tolist()) for row in rank_samples]
    counter = Counter(tops)
    best = max(sorted(counter, key=sorted), key=lambda s: counter[s])
    return (
        np.array(sorted(best), dtype=np.int64),
        counter[best] / rank_samples.shape[0],
    )


def predict_pair(latent_samples: np.ndarray, item_i: int, item_k: int) -> float:
    """Posterior probability that item_i is preferred to item_k, from one
    assessor's latent-ranking samples (S, n)."""
    if item_i == item_k:
        raise ValueError("cannot compare an item with itself")
    latent_samples = np.atleast_2d(latent_samples)
    return float((latent_samples[:, item_i] < latent_samples[:, item_k]).mean())


def cluster_fit_curves(
    runs: dict[int, SampleLog], dataset: Dataset
) -> ClusterDiagnostics:
    """Within-cluster distance sums and misfit counts per retained iteration,
    for each candidate number of clusters."""
    dist_out: dict[int, np.ndarray] = {}
    misfit_out: dict[int, np.ndarray] = {}
    n = dataset.n_items
    for G, samples in sorted(runs.items()):
        S = samples.n_samples
        dist = np.empty(S)
        misfit = np.empty(S, dtype=np.int64)
        for t in range(S):
            total_d = 0.0
            total_m = 0
            for g in range(samples.n_clusters):
                members = np.nonzero(samples.labels[t] == g)[0]
                if members.size == 0:
                    continue
                d = distances_to(
                    "footrule", samples.latent[t, members], samples.rhos[t, g]
                )
                total_d += float(d.sum()) / n
                for j in members:
                    total_m += int(
                        mistakes.g_vector(
                            dataset.preference_sets[j], samples.rhos[t, g]
                        ).sum()
                    )
            dist[t] = total_d
            misfit[t] = total_m
        dist_out[G] = dist
        misfit_out[G] = misfit
    return ClusterDiagnostics(sorted(runs), dist_out, misfit_out)


def integrated_autocorrelation_time(trace: np.ndarray) -> float:
    """IAT via initial-positive-sequence truncation of the empirical
    autocorrelation; NaN for a constant trace."""
    x = np.asarray(trace, dtype=float)
    if x.size < 1000:
        raise ValueError("need at least 1000 samples for IAT")
    if np.all(x == x[0]):
        return math.nan
    x = x - x.mean()
    nfft = 1 << (2 * x.size - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conjugate(f), nfft)[: x.size].real / x.size
    rho = acov / acov[0]
    iat = 1.0
    for k in range(1, x.size):
        if rho[k] <= 0:
            break
        iat += 2.0 * rho[k]
    return iat


def convergence_stats(samples: SampleLog) -> dict[str, float]:
    """IAT per scalar parameter trace."""
    out = {}
    for g in range(samples.n_clusters):
        out[f"alpha_{g + 1}"] = integrated_autocorrelation_time(samples.alphas[:, g])
        if samples.n_clusters > 1:
            out[f"eta_{g + 1}"] = integrated_autocorrelation_time(
                samples.weights[:, g]
            )
    if samples.thetas is not None:
        out["theta"] = integrated_autocorrelation_time(samples.thetas)
    if samples.betas is not None:
        out["beta0"] = integrated_autocorrelation_time(samples.betas[:, 0])
        out["beta1"] = integrated_autocorrelation_time(samples.betas[:, 1])
    return out


def summarize(samples: SampleLog, level: float = 0.95) -> ConsensusSummary:
    """Full per-cluster summary of a (relabeled) sample log."""
    G = samples.n_clusters
    cp = [cp_consensus(samples.rhos[:, g, :]) for g in range(G)]
    maps = [map_ranking(samples.rhos[:, g, :]) for g in range(G)]
    alpha = [map_and_hpd(samples.alphas[:, g], level) for g in range(G)]
    weight = [map_and_hpd(samples.weights[:, g], level) for g in range(G)]
    theta = beta0 = beta1 = None
    if samples.thetas is not None:
        theta = map_and_hpd(samples.thetas, level)
    if samples.betas is not None:
        beta0 = map_and_hpd(samples.betas[:, 0], level)
        beta1 = map_and_hpd(samples.betas[:, 1], level)
    return ConsensusSummary(cp, maps, alpha, weight, theta, beta0, beta1)
