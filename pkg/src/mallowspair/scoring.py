"""Evaluation metrics against a simulation truth record: consensus error,
top-3-in-top-5 recovery and held-out pair prediction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .perms import Dataset, distance
from .posterior import best_joint_topk_triplet, cp_consensus, predict_pair
from .sampler import SampleLog
from .simulate import TruthRecord


def normalized_footrule(a: np.ndarray, b: np.ndarray) -> float:
    """Footrule distance divided by n."""
    a = np.asarray(a)
    return distance("footrule", a, b) / a.size


@dataclass
class ScoreReport:
    consensus_df_samples: np.ndarray   # d_f(rho^(t), rho_true) per iteration
    cp_df: float                       # d_f of the CP consensus
    top3_in_top5_pct: float
    prediction_mean: float
    prediction_by_pairs: list[tuple[float, float]]      # (stratum mean M_j, mean prob)
    prediction_by_distance: list[tuple[float, float]]   # (stratum mean d, mean prob)


def consensus_error_samples(samples: SampleLog, rho_true: np.ndarray, g: int = 0):
    rho_true = np.asarray(rho_true, dtype=np.int64)
    return np.array(
        [normalized_footrule(samples.rhos[t, g], rho_true) for t in range(samples.n_samples)]
    )


def top3_in_top5_percentage(samples: SampleLog, truth: TruthRecord) -> float:
    """Percent of assessors whose best joint-top-3 triplet lies inside the
    true top-5 of their latent ranking."""
    N = samples.latent.shape[1]
    hits = 0
    for j in range(N):
        triplet, _ = best_joint_topk_triplet(samples.latent[:, j, :])
        top5 = set(np.nonzero(truth.latent_true[j] <= 5)[0].tolist())
        if set(triplet.tolist()) <= top5:
            hits += 1
    return 100.0 * hits / N


def _strata(values: np.ndarray, probs: np.ndarray, n_strata: int = 3):
    order = np.argsort(values, kind="stable")
    chunks = np.array_split(order, n_strata)
    out = []
    for chunk in chunks:
        if chunk.size:
            out.append((float(values[chunk].mean()), float(probs[chunk].mean())))
    return out


def prediction_report(
    samples: SampleLog, truth: TruthRecord, dataset: Dataset, n_strata: int = 3
):
    """Posterior probability of correctly ordering each unassessed pair,
    averaged per assessor, with M_j and distance-to-consensus strata."""
    n, N = dataset.n_items, dataset.n_assessors
    per_assessor = np.empty(N)
    m_j = np.empty(N)
    d_true = np.empty(N)
    for j, ps in enumerate(dataset.preference_sets):
        assessed = {frozenset(p) for p in ps.pairs()}
        probs = []
        r_true = truth.latent_true[j]
        for a in range(n):
            for b in range(a + 1, n):
                if frozenset((a, b)) in assessed:
                    continue
                win, lose = (a, b) if r_true[a] < r_true[b] else (b, a)
                probs.append(predict_pair(samples.latent[:, j, :], win, lose))
        per_assessor[j] = np.mean(probs) if probs else np.nan
        m_j[j] = ps.n_pairs
        d_true[j] = distance(
            "footrule", truth.rho_true[truth.labels_true[j]], r_true
        )
    ok = ~np.isnan(per_assessor)
    by_pairs = _strata(m_j[ok], per_assessor[ok], n_strata)
    by_dist = _strata(d_true[ok], per_assessor[ok], n_strata)
    return per_assessor, by_pairs, by_dist


def score(samples: SampleLog, truth: TruthRecord, dataset: Dataset) -> ScoreReport:
    df_samples = consensus_error_samples(samples, truth.rho_true[0])
    cp = cp_consensus(samples.rhos[:, 0, :])
    from .perms import ranking_of

    cp_df = normalized_footrule(ranking_of(cp), truth.rho_true[0])
    pct = top3_in_top5_percentage(samples, truth)
    per_assessor, by_pairs, by_dist = prediction_report(samples, truth, dataset)
    return ScoreReport(
        consensus_df_samples=df_samples,
        cp_df=cp_df,
        top3_in_top5_pct=pct,
        prediction_mean=float(np.nanmean(per_assessor)),
        prediction_by_pairs=by_pairs,
        prediction_by_distance=by_dist,
    )
