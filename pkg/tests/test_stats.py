import math

import numpy as np
import pytest
from scipy import special, stats

from odece.stats import betainc, paired_t_test, rankdata, spearman, t_cdf


def test_degenerate_cases():
    assert paired_t_test([1, 2, 3], [0, 1, 2], "a_greater") == 0.0
    assert paired_t_test([1, 2, 3], [0, 1, 2], "b_greater") == 1.0
    assert paired_t_test([1, 2, 3], [1, 2, 3]) == 0.5


def test_hand_computed_example():
    a = [2.1, 1.9, 2.2, 2.0]
    b = [1.0, 1.1, 0.9, 1.2]
    d = np.subtract(a, b)
    t = d.mean() / (d.std(ddof=1) / 2.0)
    # Closed-form Student-t CDF for 3 degrees of freedom.
    x = t / math.sqrt(3)
    cdf = 0.5 + (x / (1 + x * x) + math.atan(x)) / math.pi
    assert paired_t_test(a, b) == pytest.approx(1 - cdf, abs=1e-6)


def test_against_scipy(rng):
    for _ in range(200):
        n = rng.integers(2, 30)
        a, b = rng.normal(size=n), rng.normal(size=n) + rng.normal()
        for alt, sp in (("a_greater", "greater"), ("b_greater", "less")):
            assert paired_t_test(a, b, alt) == pytest.approx(stats.ttest_rel(a, b, alternative=sp).pvalue, abs=1e-10)


def test_betainc_against_scipy(rng):
    for _ in range(500):
        a, b, x = rng.uniform(0.05, 50), rng.uniform(0.05, 50), rng.uniform()
        assert betainc(a, b, x) == pytest.approx(special.betainc(a, b, x), abs=1e-12)
    assert t_cdf(0.0, 5) == 0.5


def test_errors():
    with pytest.raises(ValueError):
        paired_t_test([1, 2], [1, 2, 3])
    with pytest.raises(ValueError):
        paired_t_test([1], [2])


def test_spearman():
    assert spearman([1, 2, 3, 4], [10, 20, 30, 40]) == pytest.approx(1.0)
    assert spearman([1, 2, 3, 4], [4, 3, 2, 1]) == pytest.approx(-1.0)
    assert rankdata([3, 1, 3]).tolist() == [2.5, 1.0, 2.5]
    x, y = np.random.default_rng(2).normal(size=(2, 30))
    assert spearman(x, y) == pytest.approx(stats.spearmanr(x, y).statistic)
