import math

import numpy as np
import pytest

from mallowspair.mistakes import (
    BernoulliParams,
    LogisticParams,
    bm_log_likelihood,
    g_indicator,
    g_vector,
    lm_log_likelihood,
    lm_mistake_prob,
)
from mallowspair.perms import PreferenceSet

RNG = np.random.default_rng(99)


def paper_example_set():
    return PreferenceSet(
        0,
        np.array([1, 4, 4, 4, 4, 2, 0]),
        np.array([0, 3, 2, 1, 0, 1, 2]),
    )


class TestGIndicator:
    def test_paper_example_counts(self):
        ps = paper_example_set()
        assert g_vector(ps, np.array([5, 4, 3, 2, 1])).sum() == 1
        assert g_vector(ps, np.array([5, 4, 3, 1, 2])).sum() == 2
        # the O3 swap leaves every indicator unchanged
        assert np.array_equal(
            g_vector(ps, np.array([5, 4, 2, 3, 1])),
            g_vector(ps, np.array([5, 4, 3, 2, 1])),
        )

    def test_consistent_pair(self):
        r = np.array([1, 3, 2])
        assert g_indicator(0, 1, r) == 0
        assert g_indicator(1, 0, r) == 1


class TestBernoulli:
    def test_theta_range(self):
        with pytest.raises(ValueError):
            BernoulliParams(0.5)
        with pytest.raises(ValueError):
            BernoulliParams(-0.01)

    def test_value(self):
        ps = paper_example_set()
        r = np.array([5, 4, 3, 2, 1])  # one mistake, seven pairs
        got = bm_log_likelihood(ps, r, BernoulliParams(0.1))
        assert got == pytest.approx(math.log(1 / 9) + 7 * math.log(0.9), abs=1e-12)
        assert got == pytest.approx(-2.93475, abs=1e-4)

    def test_no_mistakes(self):
        ps = PreferenceSet(0, np.arange(0, 5), np.arange(1, 6))
        r = np.arange(1, 7)
        assert bm_log_likelihood(ps, r, BernoulliParams(0.2)) == pytest.approx(
            5 * math.log(0.8)
        )

    def test_theta_zero_boundary(self):
        ps = PreferenceSet(0, np.array([0]), np.array([1]))
        assert bm_log_likelihood(ps, np.array([1, 2]), BernoulliParams(0.0)) == 0.0
        assert bm_log_likelihood(
            ps, np.array([2, 1]), BernoulliParams(0.0)
        ) == -math.inf

    def test_half_limit(self):
        ps = paper_example_set()
        theta = 0.5 - 1e-9
        for r in (np.array([5, 4, 3, 2, 1]), np.array([1, 2, 3, 4, 5])):
            got = bm_log_likelihood(ps, r, BernoulliParams(theta))
            assert got == pytest.approx(7 * math.log(0.5), abs=1e-6)

    def test_monotone_in_mistakes(self):
        p = BernoulliParams(0.3)
        ps = paper_example_set()
        r_few = np.array([5, 4, 3, 2, 1])  # 1 mistake
        r_more = np.array([5, 4, 3, 1, 2])  # 2 mistakes
        assert bm_log_likelihood(ps, r_more, p) < bm_log_likelihood(ps, r_few, p)


class TestLogistic:
    def test_param_validation(self):
        with pytest.raises(ValueError):
            LogisticParams(0.0, 1.0)
        with pytest.raises(ValueError):
            LogisticParams(1.0, -0.1)
        LogisticParams(1.0, 0.0)  # flat slope allowed

    def test_gap_one_anchor(self):
        p = LogisticParams(1.5, 2.0)
        assert lm_mistake_prob(1, 10, p) == pytest.approx(1 / (1 + math.exp(1.5)))
        assert lm_mistake_prob(1, 10, p) < 0.5

    def test_flat_slope(self):
        p = LogisticParams(2.0, 0.0)
        probs = {lm_mistake_prob(g, 8, p) for g in range(1, 8)}
        assert len(probs) == 1

    def test_direct_value(self):
        p = LogisticParams(2.0, 3.0)
        assert lm_mistake_prob(11, 12, p) == pytest.approx(
            1 / (1 + math.exp(5)), abs=1e-9
        )
        assert lm_mistake_prob(11, 12, p) == pytest.approx(0.006693, abs=1e-6)

    def test_small_n_rejected(self):
        with pytest.raises(ValueError):
            lm_mistake_prob(1, 2, LogisticParams(1.0, 1.0))

    def test_below_half_and_decreasing(self):
        for _ in range(100):
            b0 = float(RNG.uniform(0.01, 4))
            b1 = float(RNG.uniform(0.0, 4))
            n = int(RNG.integers(3, 15))
            p = LogisticParams(b0, b1)
            probs = [lm_mistake_prob(g, n, p) for g in range(1, n)]
            assert all(q < 0.5 for q in probs)
            if b1 > 0:
                assert all(a > b for a, b in zip(probs, probs[1:]))

    def test_one_term_sums(self):
        p = LogisticParams(1.2, 0.7)
        ps = PreferenceSet(0, np.array([1]), np.array([0]))
        r = np.array([1, 2, 3])  # reported order contradicts r, gap 1
        assert lm_log_likelihood(ps, r, p) == pytest.approx(
            math.log(1 / (1 + math.exp(1.2)))
        )

    def test_all_correct_max_gap(self):
        n, m = 6, 3
        p = LogisticParams(2.0, 3.0)
        ps = PreferenceSet(0, np.array([0, 1, 2]), np.array([3, 4, 5]))
        r = np.array([1, 2, 3, 4, 5, 6])
        # craft a set where all pairs have the extreme gap
        ps2 = PreferenceSet(0, np.array([0]), np.array([5]))
        got = lm_log_likelihood(ps2, r, p)
        assert got == pytest.approx(math.log(1 - 1 / (1 + math.exp(5))))

    def test_matches_per_pair_product(self):
        # independent oracle: product of per-pair probabilities
        for _ in range(100):
            n = int(RNG.integers(3, 9))
            r = RNG.permutation(n) + 1
            pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
            RNG.shuffle(pairs)
            m = int(RNG.integers(1, len(pairs) + 1))
            chosen = pairs[:m]
            pref, oth = [], []
            for a, b in chosen:
                if RNG.random() < 0.5:
                    a, b = b, a
                pref.append(a)
                oth.append(b)
            ps = PreferenceSet(0, np.array(pref), np.array(oth))
            p = LogisticParams(float(RNG.uniform(0.1, 3)), float(RNG.uniform(0, 3)))
            want = 0.0
            for a, b in zip(pref, oth):
                gap = abs(int(r[a]) - int(r[b]))
                q = lm_mistake_prob(gap, n, p)
                want += math.log(q if r[a] > r[b] else 1 - q)
            assert lm_log_likelihood(ps, r, p) == pytest.approx(want, abs=1e-10)

    def test_collapse_to_bernoulli_at_zero_slope(self):
        # beta1 = 0 reduces exactly to the constant-rate model
        for _ in range(50):
            n = int(RNG.integers(3, 9))
            r = RNG.permutation(n) + 1
            pref = RNG.permutation(n)[: n - 1]
            oth = np.array([(p + 1) % n for p in pref])
            mask = pref != oth
            ps = PreferenceSet(0, pref[mask], oth[mask])
            b0 = float(RNG.uniform(0.1, 4))
            theta = 1 / (1 + math.exp(b0))
            got = lm_log_likelihood(ps, r, LogisticParams(b0, 0.0))
            want = bm_log_likelihood(ps, r, BernoulliParams(theta))
            assert got == pytest.approx(want, abs=1e-12)
