import math
from itertools import permutations

import numpy as np
import pytest

from mallowspair.partition import (
    AlphaOutOfRangeError,
    DistanceCounts,
    ExactInfeasibleError,
    LogZTable,
    _dp_counts,
    build_table,
    closed_form_logz,
    exact_counts,
    exact_logz,
    is_logz,
)
from mallowspair.perms import METRICS, distance


def enum_counts(metric, n):
    ident = np.arange(1, n + 1)
    out = {}
    for p in permutations(range(1, n + 1)):
        d = distance(metric, np.array(p), ident)
        out[d] = out.get(d, 0) + 1
    return out


class TestExactCounts:
    def test_small_examples(self):
        assert exact_counts("footrule", 3).counts == {0: 1, 2: 2, 4: 3}
        assert exact_counts("hamming", 3).counts == {0: 1, 2: 3, 3: 2}

    def test_n2_all_metrics(self):
        from mallowspair.perms import max_distance

        for metric in METRICS:
            c = exact_counts(metric, 2).counts
            assert c == {0: 1, max_distance(metric, 2): 1}

    @pytest.mark.parametrize("metric", METRICS)
    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_matches_enumeration(self, metric, n):
        assert exact_counts(metric, n).counts == enum_counts(metric, n)

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6, 7])
    def test_counts_sum_to_factorial(self, n):
        for metric in METRICS:
            assert sum(exact_counts(metric, n).counts.values()) == math.factorial(n)

    def test_dp_path_matches_enumeration(self):
        # force the subset DP (used for n > 8) and compare on small n
        for n in (5, 6):
            assert _dp_counts(n, spearman=False) == enum_counts("footrule", n)
            assert _dp_counts(n, spearman=True) == enum_counts("spearman", n)

    def test_infeasible_raises(self):
        with pytest.raises(ExactInfeasibleError):
            exact_counts("footrule", 15)

    def test_counts_validation(self):
        with pytest.raises(ValueError):
            DistanceCounts("footrule", 3, {0: 1, 2: 2})


class TestExactLogZ:
    def test_enumerated_value(self):
        c = exact_counts("footrule", 3)
        assert exact_logz(c, 3.0) == pytest.approx(
            math.log(1 + 2 * math.exp(-2) + 3 * math.exp(-4)), abs=1e-12
        )
        assert exact_logz(c, 3.0) == pytest.approx(0.28191, abs=1e-4)

    def test_alpha_zero_is_log_factorial(self):
        for metric in METRICS:
            for n in (2, 4, 6):
                assert exact_logz(exact_counts(metric, n), 0.0) == pytest.approx(
                    math.lgamma(n + 1), abs=1e-12
                )

    def test_degenerate_single_permutation(self):
        assert exact_logz(DistanceCounts("footrule", 1, {0: 1}), 2.0) == 0.0


class TestClosedForm:
    def test_kendall_n2(self):
        assert closed_form_logz("kendall", 2, 0.0) == pytest.approx(math.log(2))
        for a in (0.3, 1.0, 5.0):
            assert closed_form_logz("kendall", 2, a) == pytest.approx(
                math.log(1 + math.exp(-a / 2)), abs=1e-12
            )

    def test_cayley_alpha_zero(self):
        assert closed_form_logz("cayley", 3, 0.0) == pytest.approx(math.log(6))

    def test_unsupported_metric(self):
        with pytest.raises(ValueError):
            closed_form_logz("footrule", 4, 1.0)

    @pytest.mark.parametrize("metric", ["kendall", "cayley", "hamming"])
    @pytest.mark.parametrize("alpha", [0.1, 1.0, 5.0, 20.0])
    def test_matches_exact_counts(self, metric, alpha):
        for n in range(2, 8):
            assert closed_form_logz(metric, n, alpha) == pytest.approx(
                exact_logz(exact_counts(metric, n), alpha), abs=1e-10
            )


class TestImportanceSampling:
    def test_alpha_zero_exact(self):
        t = is_logz("footrule", 5, [0.0], n_samples=100, seed=1)
        assert t.logz[0] == pytest.approx(math.lgamma(6), abs=1e-12)
        assert t.stderr[0] == pytest.approx(0.0, abs=1e-12)

    def test_converges_to_enumeration(self):
        t = is_logz("footrule", 3, [1.0], n_samples=10**5, seed=2)
        exact = math.log(1 + 2 * math.exp(-2 / 3) + 3 * math.exp(-4 / 3))
        assert abs(t.logz[0] - exact) < 3 * t.stderr[0] + 1e-9
        assert math.exp(exact) == pytest.approx(2.81762, abs=1e-4)

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError):
            is_logz("footrule", 5, [], n_samples=10)

    def test_all_metrics_run(self):
        for metric in METRICS:
            t = is_logz(metric, 5, [0.0, 1.0], n_samples=2000, seed=3)
            assert t.method == "importance_sampling"
            assert t.logz[1] < t.logz[0]


class TestBuildTable:
    def test_dispatch(self):
        assert build_table("kendall", 12).method == "closed_form"
        assert build_table("footrule", 12).method == "exact"
        t = build_table("footrule", 30, n_samples=2000, seed=0)
        assert t.method == "importance_sampling"

    def test_monotone_and_convex(self):
        for metric, n in (("footrule", 6), ("kendall", 8)):
            t = build_table(metric, n)
            assert t.logz[0] == pytest.approx(math.lgamma(n + 1), abs=1e-9)
            diffs = np.diff(t.logz)
            assert np.all(diffs <= 1e-12)
            assert np.all(np.diff(diffs) >= -1e-8)

    def test_direct_evaluation_off_grid(self):
        t = build_table("footrule", 6)
        a = 1.2345  # not a grid point
        assert t.at(a) == pytest.approx(exact_logz(exact_counts("footrule", 6), a))

    def test_is_grid_clamp(self):
        t = build_table("footrule", 16, alpha_max=5.0, n_samples=2000, seed=1)
        with pytest.raises(AlphaOutOfRangeError):
            t.at(6.0)

    def test_invalid_grid_params(self):
        with pytest.raises(ValueError):
            build_table("footrule", 5, alpha_max=0.0)

    def test_interpolation_error_shrinks_under_refinement(self):
        exact = build_table("footrule", 10)
        coarse = is_logz("footrule", 10, np.arange(0, 10.5, 0.5), 10**5, seed=5)
        fine = is_logz("footrule", 10, np.arange(0, 10.05, 0.1), 10**5, seed=5)
        # same seed -> identical draws, so coarse vs fine isolates the
        # interpolation component from the Monte Carlo error
        for a in (0.77, 3.33):
            assert abs(coarse.at(a) - fine.at(a)) < 0.05
            assert abs(fine.at(a) - exact.at(a)) < 3 * fine.stderr.max() + 0.01


class TestSerialization:
    @pytest.mark.parametrize(
        "metric,n", [("footrule", 6), ("kendall", 9), ("footrule", 16)]
    )
    def test_roundtrip(self, tmp_path, metric, n):
        t = build_table(metric, n, alpha_max=8.0, n_samples=2000, seed=7)
        path = tmp_path / "table.txt"
        t.save(path)
        back = LogZTable.load(path)
        assert back.metric == t.metric and back.n == t.n and back.method == t.method
        assert np.allclose(back.grid, t.grid)
        assert np.allclose(back.logz, t.logz)
        for a in (0.0, 1.5, 4.0):
            assert back.at(a) == pytest.approx(t.at(a), abs=1e-9)
