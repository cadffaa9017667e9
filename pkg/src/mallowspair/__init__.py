"""Bayesian inference of consensus and individual rankings from sparse,
possibly non-transitive pairwise comparison data."""

from .perms import (
    Dataset,
    PreferenceSet,
    analyze_transitivity,
    distance,
    invert,
    mallows_log_density,
    ranking_of,
)
from .mistakes import (
    BernoulliParams,
    LogisticParams,
    bm_log_likelihood,
    g_vector,
    lm_log_likelihood,
    lm_mistake_prob,
)
from .partition import (
    DistanceCounts,
    LogZTable,
    build_table,
    closed_form_logz,
    exact_counts,
    exact_logz,
    is_logz,
)
from .sampler import Chain, Priors, SampleLog, Tuning, run_chain, swap_propose
from .posterior import (
    cluster_fit_curves,
    convergence_stats,
    cp_consensus,
    joint_topk_probability,
    map_and_hpd,
    predict_pair,
    relabel,
    summarize,
    topk_marginals,
)
from .simulate import SimConfig, generate_dataset, sample_mallows

__version__ = "0.1.0"
