import math

import numpy as np
import pytest

from src.stats import (
    normal_quantile, normal_two_sided_p, t_interval, t_quantile, t_two_sided_p, wilcoxon_signed_rank,
)


def test_t_quantile_table_value():
    assert t_quantile(0.975, 2) == pytest.approx(4.3027, abs=1e-4)


def test_t_interval_for_three_differences():
    lower, upper = t_interval(2.0, 1.0 / math.sqrt(3), 2)
    assert lower == pytest.approx(-0.4845, abs=1e-3)
    assert upper == pytest.approx(4.4845, abs=1e-3)


def test_t_p_value_at_critical_point():
    assert t_two_sided_p(4.302652729911275, 2) == pytest.approx(0.05, abs=1e-9)


def test_t_p_value_edges():
    assert t_two_sided_p(0.0, 10) == pytest.approx(1.0)
    assert t_two_sided_p(math.inf, 10) == 0.0
    assert math.isnan(t_two_sided_p(float("nan"), 10))


def test_normal_helpers():
    assert normal_two_sided_p(1.959963984540054) == pytest.approx(0.05, abs=1e-12)
    assert normal_quantile(0.975) == pytest.approx(1.959963984540054)


class TestWilcoxon:
    def test_five_positive_differences(self):
        w_plus, p, method = wilcoxon_signed_rank([1, 2, 3, 4, 5])
        assert w_plus == 15
        assert p == pytest.approx(0.0625)
        assert method == "exact"

    def test_symmetric_differences(self):
        _, p, _ = wilcoxon_signed_rank([-2, -1, 1, 2])
        assert p == pytest.approx(1.0)

    def test_zeros_are_dropped(self):
        assert wilcoxon_signed_rank([0, 0, 1, 2, 3, 4, 5])[1] == pytest.approx(0.0625)

    def test_all_zero(self):
        assert wilcoxon_signed_rank([0, 0, 0]) == (0.0, 1.0, "exact")

    def test_tied_ranks_exact(self):
        # |d| = 1,1,2: ranks 1.5,1.5,3, all sign patterns equally likely
        _, p, method = wilcoxon_signed_rank([1, -1, 2])
        assert method == "exact"
        assert 0.0 < p <= 1.0

    def test_large_sample_uses_normal_approximation(self):
        rng = np.random.default_rng(4)
        diffs = rng.normal(0.5, 1.0, 60)
        _, p, method = wilcoxon_signed_rank(diffs)
        assert method == "normal"
        assert p < 0.05

    def test_exact_and_normal_agree_roughly_at_the_threshold(self):
        rng = np.random.default_rng(9)
        diffs = rng.normal(0.2, 1.0, 25)
        _, exact_p, method = wilcoxon_signed_rank(diffs)
        assert method == "exact"
        n = 25
        w_plus = wilcoxon_signed_rank(diffs)[0]
        z = (abs(w_plus - n * (n + 1) / 4) - 0.5) / math.sqrt(n * (n + 1) * (2 * n + 1) / 24)
        assert exact_p == pytest.approx(normal_two_sided_p(z), abs=0.02)
