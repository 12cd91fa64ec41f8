import math

import numpy as np
import pytest

from wellbeing_policy.errors import DomainError, UndefinedCorrelationError
from wellbeing_policy.stats import correlation_p_value, correlation_test, pearson_r, t_two_sided_p

from oracles import P_VALUE_TABLE, PEARSON_1234_100


def test_identical_vectors_give_one():
    x = np.array([0.3, 1.0, 2.5, 7.0, -1.0])
    assert pearson_r(x, x) == pytest.approx(1.0, abs=1e-15)


def test_anticorrelated():
    x = np.arange(10.0)
    assert pearson_r(x, 3.0 - x) == pytest.approx(-1.0, abs=1e-15)


def test_pearson_oracle():
    assert pearson_r([1, 2, 3, 4], [1, 2, 3, 100]) == pytest.approx(PEARSON_1234_100, abs=1e-14)


def test_pearson_is_clamped():
    rng = np.random.default_rng(0)
    x = rng.random(50) * 1e8
    assert -1.0 <= pearson_r(x, x * 3.0 + 1e-9) <= 1.0


def test_pearson_rejects_constant_and_short():
    with pytest.raises(UndefinedCorrelationError):
        pearson_r([1, 1, 1, 1], [1, 2, 3, 4])
    with pytest.raises(DomainError):
        pearson_r([1, 2], [2, 3])
    with pytest.raises(DomainError):
        pearson_r([1, 2, 3], [1, 2])


@pytest.mark.parametrize("n,r,p", P_VALUE_TABLE)
def test_p_value_table(n, r, p):
    assert correlation_p_value(r, n) == pytest.approx(p, abs=1e-6)


def test_p_value_relative_precision_in_the_tail():
    # far beyond the 1e-6 contract; in the extreme tail the float rounding
    # of r itself dominates, so only moderate p are checked relatively
    for n, r, p in P_VALUE_TABLE:
        if p < 1e-30:
            continue
        assert correlation_p_value(r, n) == pytest.approx(p, rel=1e-9, abs=1e-300)


def test_null_correlation_has_p_one():
    assert correlation_p_value(0.0, 421) == 1.0


def test_perfect_correlation_is_exact_zero():
    res = correlation_test(1.0, 20)
    assert res.p_value == 0.0 and res.exact and math.isinf(res.t_stat)
    assert correlation_test(-1.0, 5).t_stat == -math.inf


def test_p_value_domain():
    with pytest.raises(DomainError):
        correlation_p_value(0.5, 2)
    with pytest.raises(DomainError):
        correlation_p_value(1.5, 10)
    with pytest.raises(DomainError):
        t_two_sided_p(1.0, 0)


def test_t_p_vectorized():
    p = t_two_sided_p(np.array([0.0, 1.96, -1.96]), 1e6)
    assert p[0] == 1.0
    assert p[1] == pytest.approx(0.05, abs=1e-4)
    assert p[1] == p[2]
