"""Metropolis-within-Gibbs sampler for the noisy pairwise-preference model.

One iteration alternates two blocks: (1) consensus rankings, concentrations
and mistake parameters (plus cluster labels and weights when G >= 2) given
the latent individual rankings; (2) all latent individual rankings given the
rest. Randomness comes from a single numpy Generator (PCG64) seeded from
Tuning.seed, so equal configurations reproduce bit-identical output.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import beta as beta_dist

from . import mistakes
from .partition import AlphaOutOfRangeError, LogZTable
from .perms import Dataset, analyze_transitivity, distance, distances_to, invert, ranking_of

log = logging.getLogger(__name__)

MODELS = ("BM", "LM")


@dataclass
class Priors:
    gamma_shape: float = 1.0     # alpha ~ Gamma(shape, rate)
    gamma_rate: float = 0.1
    kappa1: float = 1.0          # theta ~ Beta(kappa1, kappa2) on [0, 0.5)
    kappa2: float = 1.0
    lambda01: float = 1.0        # beta0 ~ Gamma(lambda01, lambda02)
    lambda02: float = 1.0
    # beta1 ~ Gamma(lambda11, lambda12).  The slope enters the logit only
    # through beta0 + beta1*x with x in [0, 1], so it is weakly identified
    # against the intercept; a prior mean of 0.2 shrinks the flat direction
    # toward the constant-rate model instead of letting the intercept drift.
    lambda11: float = 1.0
    lambda12: float = 5.0
    chi: float = 20.0            # eta ~ Dirichlet(chi, ..., chi)

    def __post_init__(self):
        for name, v in vars(self).items():
            if v <= 0:
                raise ValueError(f"prior hyperparameter {name} must be positive")


@dataclass
class Tuning:
    l_star: int = 3              # max swap span for consensus moves
    l_star_r: int = 1            # max swap span for latent-ranking moves
    sigma_alpha: float = 0.15    # log-normal proposal scale for alpha
    sigma_beta: float = 0.5      # log-normal proposal scale for beta0/beta1
    n_iterations: int = 100_000
    burn_in: int = 20_000
    thinning: int = 10
    seed: int = 0
    # Freezing flags for validation runs (frozen blocks consume no rng draws).
    update_rho: bool = True
    update_alpha: bool = True
    update_mistake: bool = True
    update_latent: bool = True

    def validate(self, n: int) -> None:
        if not 1 <= self.l_star <= n - 1:
            raise ValueError("l_star must lie in 1..n-1")
        if not 1 <= self.l_star_r <= n - 1:
            raise ValueError("l_star_r must lie in 1..n-1")
        if self.sigma_alpha <= 0 or self.sigma_beta <= 0:
            raise ValueError("proposal scales must be positive")
        if not 0 <= self.burn_in < self.n_iterations:
            raise ValueError("burn_in must be smaller than n_iterations")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")


@dataclass
class ChainState:
    alphas: np.ndarray           # (G,)
    rhos: np.ndarray             # (G, n) rankings
    theta: float | None          # BM
    beta0: float | None          # LM
    beta1: float | None
    latent: np.ndarray           # (N, n) rankings
    labels: np.ndarray           # (N,) in 0..G-1
    weights: np.ndarray          # (G,)


@dataclass
class SampleLog:
    model: str
    metric: str
    n_items: int
    n_clusters: int
    seed: int
    thinning: int
    burn_in: int
    alphas: np.ndarray           # (S, G)
    rhos: np.ndarray             # (S, G, n)
    thetas: np.ndarray | None    # (S,)
    betas: np.ndarray | None     # (S, 2)
    latent: np.ndarray           # (S, N, n)
    labels: np.ndarray           # (S, N)
    weights: np.ndarray          # (S, G)
    accepted: dict[str, int] = field(default_factory=dict)
    proposed: dict[str, int] = field(default_factory=dict)
    g_eval_count: int = 0

    @property
    def n_samples(self) -> int:
        return self.alphas.shape[0]

    def acceptance_rates(self) -> dict[str, float]:
        return {
            k: self.accepted[k] / self.proposed[k]
            for k in self.proposed
            if self.proposed[k]
        }


def swap_propose(x: np.ndarray, l_star: int, rng) -> tuple[np.ndarray, int, int]:
    """Swap two entries of the ordering x at positions u and u+l (1-based),
    with l uniform on 1..l_star and u uniform on 1..n-l. Symmetric."""
    n = x.size
    l = int(rng.integers(1, l_star + 1))
    u = int(rng.integers(1, n - l + 1))
    xp = x.copy()
    xp[u - 1], xp[u + l - 1] = xp[u + l - 1], xp[u - 1]
    return xp, l, u


def sample_truncated_theta(kappa1p: float, kappa2p: float, rng) -> float:
    """Inverse-CDF draw from Beta(kappa1p, kappa2p) restricted to [0, 0.5)."""
    hi = beta_dist.cdf(0.5, kappa1p, kappa2p)
    u = rng.random() * hi
    theta = float(beta_dist.ppf(u, kappa1p, kappa2p))
    return min(theta, np.nextafter(0.5, 0.0))


def topological_init(ps, n: int, rng) -> np.ndarray:
    """Initial latent ranking: random linear extension of the acyclic
    sub-relation of the preference set (cycle-creating edges dropped
    greedily in input order), unconstrained items placed at random."""
    succ: dict[int, set[int]] = {i: set() for i in range(n)}

    def reachable(a: int, b: int) -> bool:
        frontier = [a]
        seen = {a}
        while frontier:
            node = frontier.pop()
            if node == b:
                return True
            for nxt in succ[node]:
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        return False

    for a, b in ps.pairs():
        if not reachable(b, a):
            succ[a].add(b)
    indeg = {i: 0 for i in range(n)}
    for a in succ:
        for b in succ[a]:
            indeg[b] += 1
    order = []
    avail = [i for i in range(n) if indeg[i] == 0]
    while avail:
        idx = int(rng.integers(len(avail)))
        node = avail.pop(idx)
        order.append(node)
        for nxt in succ[node]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                avail.append(nxt)
    return ranking_of(np.array(order, dtype=np.int64))


class Chain:
    """Mutable sampler state plus cached sufficient statistics."""

    def __init__(
        self,
        dataset: Dataset,
        model: str = "BM",
        n_clusters: int = 1,
        priors: Priors | None = None,
        tuning: Tuning | None = None,
        metric: str = "footrule",
        logz: LogZTable | None = None,
        rng=None,
    ):
        if model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}")
        if n_clusters < 1:
            raise ValueError("n_clusters must be >= 1")
        if model == "LM" and n_clusters > 1:
            raise ValueError("mixture sampling is only defined for BM")
        n = dataset.n_items
        if model == "LM" and n < 3:
            raise ValueError("logistic model undefined for n < 3")
        self.dataset = dataset
        self.model = model
        self.G = n_clusters
        self.priors = priors or Priors()
        self.tuning = tuning or Tuning()
        self.tuning.validate(n)
        self.metric = metric
        if logz is None:
            raise ValueError("a LogZTable is required")
        if logz.metric != metric or logz.n != n:
            raise ValueError("LogZTable does not match (metric, n)")
        self.logz = logz
        self.rng = rng if rng is not None else np.random.default_rng(self.tuning.seed)
        self.n = n
        self.N = dataset.n_assessors
        self._alpha_warned = False

        self.accepted: dict[str, int] = {}
        self.proposed: dict[str, int] = {}
        self.g_eval_count = 0

        self._init_state()

    # -- initialization ----------------------------------------------------

    def _init_state(self):
        n, G, N = self.n, self.G, self.N
        rng = self.rng
        self.alphas = np.ones(G)
        rhos = []
        seen = set()
        while len(rhos) < G:
            r = rng.permutation(n) + 1
            key = tuple(r)
            if key not in seen:
                seen.add(key)
                rhos.append(r)
        self.rhos = np.array(rhos, dtype=np.int64)
        self.rho_ords = np.array([invert(r) for r in self.rhos])
        self.theta = 0.1 if self.model == "BM" else None
        self.beta0 = 1.0 if self.model == "LM" else None
        self.beta1 = 1.0 if self.model == "LM" else None
        self.labels = (
            rng.integers(0, G, size=N) if G > 1 else np.zeros(N, dtype=np.int64)
        )
        self.weights = np.full(G, 1.0 / G)
        self.latent = np.array(
            [
                topological_init(ps, n, rng)
                for ps in self.dataset.preference_sets
            ]
        )
        self.latent_ords = np.array([invert(r) for r in self.latent])
        # Cached stats: per-assessor distance to own consensus, g vectors.
        self._refresh_distances()
        self._gv = [
            mistakes.g_vector(ps, self.latent[j])
            for j, ps in enumerate(self.dataset.preference_sets)
        ]
        self.g_eval_count += self.N
        self._gsum = np.array([int(v.sum()) for v in self._gv])
        self._logz_cache = {g: self.logz.at(self.alphas[g]) for g in range(self.G)}

    def _refresh_distances(self):
        self._dist = np.array(
            [
                distance(self.metric, self.latent[j], self.rhos[self.labels[j]])
                for j in range(self.N)
            ]
        )

    def state(self) -> ChainState:
        return ChainState(
            alphas=self.alphas.copy(),
            rhos=self.rhos.copy(),
            theta=self.theta,
            beta0=self.beta0,
            beta1=self.beta1,
            latent=self.latent.copy(),
            labels=self.labels.copy(),
            weights=self.weights.copy(),
        )

    def _count(self, kernel: str, accepted: bool):
        self.proposed[kernel] = self.proposed.get(kernel, 0) + 1
        if accepted:
            self.accepted[kernel] = self.accepted.get(kernel, 0) + 1

    # -- block 1 kernels ---------------------------------------------------

    def update_rho(self, g: int) -> bool:
        members = np.nonzero(self.labels == g)[0]
        xp, _, _ = swap_propose(self.rho_ords[g], self.tuning.l_star, self.rng)
        rho_p = ranking_of(xp)
        if members.size:
            d_new = distances_to(self.metric, self.latent[members], rho_p)
            log_a = -(self.alphas[g] / self.n) * float(
                d_new.sum() - self._dist[members].sum()
            )
        else:
            log_a = 0.0
        accept = log_a >= 0 or self.rng.random() < math.exp(log_a)
        if accept:
            self.rhos[g] = rho_p
            self.rho_ords[g] = xp
            if members.size:
                self._dist[members] = d_new
        self._count("rho", accept)
        return accept

    def update_alpha(self, g: int) -> bool:
        t = self.tuning
        pr = self.priors
        a_t = self.alphas[g]
        a_p = a_t * math.exp(t.sigma_alpha * self.rng.standard_normal())
        members = self.labels == g
        n_g = int(members.sum())
        dist_sum = float(self._dist[members].sum())
        try:
            logz_p = self.logz.at(a_p)
        except AlphaOutOfRangeError:
            if not self._alpha_warned:
                log.warning(
                    "alpha proposal %.3f beyond tabulated grid; auto-rejected",
                    a_p,
                )
                self._alpha_warned = True
            self._count("alpha", False)
            return False
        log_a = (
            pr.gamma_shape * math.log(a_p / a_t)
            - (pr.gamma_rate + dist_sum / self.n) * (a_p - a_t)
            - n_g * (logz_p - self._logz_cache[g])
        )
        accept = log_a >= 0 or self.rng.random() < math.exp(log_a)
        if accept:
            self.alphas[g] = a_p
            self._logz_cache[g] = logz_p
        self._count("alpha", accept)
        return accept

    def update_theta(self) -> float:
        pr = self.priors
        g_total = int(self._gsum.sum())
        m_total = self.dataset.total_pairs
        self.theta = sample_truncated_theta(
            pr.kappa1 + g_total, pr.kappa2 + m_total - g_total, self.rng
        )
        return self.theta

    def _beta_log_target(self, beta0: float, beta1: float) -> float:
        pr = self.priors
        gaps = self._all_gaps()
        g = self._all_g()
        eta = beta0 + beta1 * (gaps - 1) / (self.n - 2)
        lp = (
            (pr.lambda01 - 1) * math.log(beta0)
            - pr.lambda02 * beta0
            + (pr.lambda11 - 1) * math.log(beta1)
            - pr.lambda12 * beta1
        )
        return lp - float((g * eta).sum()) - float(np.logaddexp(0.0, -eta).sum())

    def _all_gaps(self) -> np.ndarray:
        parts = [
            np.abs(self.latent[j][ps.preferred] - self.latent[j][ps.other])
            for j, ps in enumerate(self.dataset.preference_sets)
        ]
        return np.concatenate(parts) if parts else np.empty(0)

    def _all_g(self) -> np.ndarray:
        return np.concatenate(self._gv) if self._gv else np.empty(0)

    def update_betas(self) -> tuple[bool, bool]:
        t = self.tuning
        cur = self._beta_log_target(self.beta0, self.beta1)
        flags = []
        for which in (0, 1):
            b_t = self.beta0 if which == 0 else self.beta1
            b_p = b_t * math.exp(t.sigma_beta * self.rng.standard_normal())
            prop = (
                self._beta_log_target(b_p, self.beta1)
                if which == 0
                else self._beta_log_target(self.beta0, b_p)
            )
            log_a = prop - cur + math.log(b_p / b_t)
            accept = log_a >= 0 or self.rng.random() < math.exp(log_a)
            if accept:
                if which == 0:
                    self.beta0 = b_p
                else:
                    self.beta1 = b_p
                cur = prop
            self._count("beta0" if which == 0 else "beta1", accept)
            flags.append(accept)
        return tuple(flags)

    def update_labels(self) -> np.ndarray:
        # z_j ~ categorical with mass prop. to eta_g exp(-alpha_g d/n) / Z_g.
        with np.errstate(divide="ignore"):
            log_eta = np.log(self.weights)
        logp = np.empty((self.N, self.G))
        for g in range(self.G):
            d = distances_to(self.metric, self.latent, self.rhos[g])
            logp[:, g] = (
                log_eta[g] - (self.alphas[g] / self.n) * d - self._logz_cache[g]
            )
        gumbel = -np.log(-np.log(self.rng.random((self.N, self.G))))
        self.labels = np.argmax(logp + gumbel, axis=1)
        self._refresh_distances()
        return self.labels

    def update_weights(self) -> np.ndarray:
        counts = np.bincount(self.labels, minlength=self.G)
        self.weights = self.rng.dirichlet(self.priors.chi + counts)
        return self.weights

    # -- block 2 kernel ----------------------------------------------------

    def update_latent_rank(self, j: int) -> bool:
        t = self.tuning
        ps = self.dataset.preference_sets[j]
        g = self.labels[j]
        alpha = self.alphas[g]
        rho = self.rhos[g]
        r_t = self.latent[j]
        xp, l, u = swap_propose(self.latent_ords[j], t.l_star_r, self.rng)
        i1, i2 = xp[u - 1], xp[u + l - 1]
        r_p = r_t.copy()
        r_p[i1], r_p[i2] = r_t[i2], r_t[i1]

        if self.metric == "footrule":
            dd = (
                abs(r_p[i1] - rho[i1])
                + abs(r_p[i2] - rho[i2])
                - abs(r_t[i1] - rho[i1])
                - abs(r_t[i2] - rho[i2])
            )
            d_new = self._dist[j] + dd
        else:
            d_new = distance(self.metric, r_p, rho)
            dd = d_new - self._dist[j]
        log_a = -(alpha / self.n) * dd

        gv_new = mistakes.g_vector(ps, r_p)
        self.g_eval_count += 1
        if not np.array_equal(gv_new, self._gv[j]):
            if self.model == "BM":
                delta_g = int(gv_new.sum()) - int(self._gsum[j])
                log_a += delta_g * math.log(self.theta / (1 - self.theta))
            else:
                p = mistakes.LogisticParams(self.beta0, self.beta1)
                log_a += mistakes.lm_log_likelihood(
                    ps, r_p, p
                ) - mistakes.lm_log_likelihood(ps, r_t, p)
        accept = log_a >= 0 or self.rng.random() < math.exp(log_a)
        if accept:
            self.latent[j] = r_p
            self.latent_ords[j] = xp
            self._dist[j] = d_new
            self._gv[j] = gv_new
            self._gsum[j] = int(gv_new.sum())
        self._count("latent", accept)
        return accept

    # -- full sweep --------------------------------------------------------

    def step(self):
        t = self.tuning
        for g in range(self.G):
            if t.update_rho:
                self.update_rho(g)
            if t.update_alpha:
                self.update_alpha(g)
        if t.update_mistake:
            if self.model == "BM":
                self.update_theta()
            else:
                self.update_betas()
        if self.G > 1:
            self.update_labels()
            self.update_weights()
        if t.update_latent:
            for j in range(self.N):
                self.update_latent_rank(j)


def run_chain(
    dataset: Dataset,
    model: str = "BM",
    n_clusters: int = 1,
    priors: Priors | None = None,
    tuning: Tuning | None = None,
    metric: str = "footrule",
    logz: LogZTable | None = None,
    initial_state: ChainState | None = None,
) -> SampleLog:
    """Run the full sampler and return thinned post-burn-in snapshots."""
    tuning = tuning or Tuning()
    chain = Chain(
        dataset,
        model=model,
        n_clusters=n_clusters,
        priors=priors,
        tuning=tuning,
        metric=metric,
        logz=logz,
    )
    if initial_state is not None:
        _apply_state(chain, initial_state)
    n, G, N = chain.n, chain.G, chain.N
    n_keep = (tuning.n_iterations - tuning.burn_in) // tuning.thinning
    alphas = np.empty((n_keep, G))
    rhos = np.empty((n_keep, G, n), dtype=np.int64)
    thetas = np.empty(n_keep) if model == "BM" else None
    betas = np.empty((n_keep, 2)) if model == "LM" else None
    latent = np.empty((n_keep, N, n), dtype=np.int64)
    labels = np.empty((n_keep, N), dtype=np.int64)
    weights = np.empty((n_keep, G))
    s = 0
    for it in range(tuning.n_iterations):
        chain.step()
        if (
            it >= tuning.burn_in
            and (it - tuning.burn_in) % tuning.thinning == tuning.thinning - 1
            and s < n_keep
        ):
            alphas[s] = chain.alphas
            rhos[s] = chain.rhos
            if thetas is not None:
                thetas[s] = chain.theta
            if betas is not None:
                betas[s] = (chain.beta0, chain.beta1)
            latent[s] = chain.latent
            labels[s] = chain.labels
            weights[s] = chain.weights
            s += 1
    return SampleLog(
        model=model,
        metric=metric,
        n_items=n,
        n_clusters=G,
        seed=tuning.seed,
        thinning=tuning.thinning,
        burn_in=tuning.burn_in,
        alphas=alphas,
        rhos=rhos,
        thetas=thetas,
        betas=betas,
        latent=latent,
        labels=labels,
        weights=weights,
        accepted=chain.accepted,
        proposed=chain.proposed,
        g_eval_count=chain.g_eval_count,
    )


def _apply_state(chain: Chain, state: ChainState) -> None:
    chain.alphas = np.asarray(state.alphas, dtype=float).copy()
    chain.rhos = np.asarray(state.rhos, dtype=np.int64).copy()
    chain.rho_ords = np.array([invert(r) for r in chain.rhos])
    chain.theta = state.theta
    chain.beta0 = state.beta0
    chain.beta1 = state.beta1
    chain.latent = np.asarray(state.latent, dtype=np.int64).copy()
    chain.latent_ords = np.array([invert(r) for r in chain.latent])
    chain.labels = np.asarray(state.labels, dtype=np.int64).copy()
    chain.weights = np.asarray(state.weights, dtype=float).copy()
    chain._refresh_distances()
    chain._gv = [
        mistakes.g_vector(ps, chain.latent[j])
        for j, ps in enumerate(chain.dataset.preference_sets)
    ]
    chain._gsum = np.array([int(v.sum()) for v in chain._gv])
    chain._logz_cache = {g: chain.logz.at(chain.alphas[g]) for g in range(chain.G)}
