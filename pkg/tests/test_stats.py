import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from statsmodels.stats.diagnostic import normal_ad

from solgas.errors import Degenerate, NonPositiveInput, TooFewSamples
from solgas.stats import (
    anderson_darling,
    bootstrap_stderr,
    complex_scatter,
    gaussian_fit,
    log_linear_fit,
    normality_test,
    power_law_fit,
)


def test_gaussian_fit_hand_values():
    f = gaussian_fit([1, 1, 1])
    assert (f.mean, f.sigma, f.degenerate) == (1, 0, True)
    f = gaussian_fit([0, 2])
    assert (f.mean, f.sigma) == (1, 1)
    with pytest.raises(TooFewSamples):
        gaussian_fit([1])


def test_gaussian_fit_prng():
    x = np.random.default_rng(1).standard_normal(10**5)
    f = gaussian_fit(x)
    assert abs(f.mean) < 0.01 and abs(f.sigma - 1) < 0.01


@settings(max_examples=30, deadline=None)
@given(shift=st.floats(-1e3, 1e3), scale=st.floats(1e-3, 1e3))
def test_gaussian_fit_equivariance(shift, scale):
    x = np.random.default_rng(2).standard_normal(50)
    a, b = gaussian_fit(x), gaussian_fit(scale * x + shift)
    assert b.mean == pytest.approx(scale * a.mean + shift, abs=1e-9 * (1 + abs(shift)))
    assert b.sigma == pytest.approx(scale * a.sigma, rel=1e-9)


def test_ad_matches_statsmodels():
    rng = np.random.default_rng(3)
    for x in [rng.normal(size=200), rng.uniform(size=80), rng.exponential(size=40)]:
        a2, p = anderson_darling(x)
        ref_a2, ref_p = normal_ad(x)
        assert a2 == pytest.approx(ref_a2, rel=1e-10)
        assert p == pytest.approx(ref_p, rel=1e-9, abs=1e-12)


def test_normality_calibration_and_power():
    rng = np.random.default_rng(4)
    normal_pass = sum(normality_test(rng.normal(size=500)) > 0.01 for _ in range(100))
    uniform_reject = sum(normality_test(rng.uniform(size=500)) < 0.01 for _ in range(100))
    assert normal_pass >= 95
    assert uniform_reject >= 95


def test_normality_errors():
    with pytest.raises(Degenerate):
        normality_test(np.ones(40))
    with pytest.raises(TooFewSamples):
        normality_test(np.arange(10.0))


def test_power_law_exact():
    ns = np.array([50, 100, 200, 400])
    f = power_law_fit(ns, 1.0 / ns)
    assert f.alpha == pytest.approx(1, abs=1e-12)
    assert f.constant == pytest.approx(1, rel=1e-12)
    assert f.r_squared == pytest.approx(1, abs=1e-12)
    f = power_law_fit(ns, 0.129 * ns**-0.5)
    assert f.alpha == pytest.approx(0.5, abs=1e-12)
    assert f.constant == pytest.approx(0.129, rel=1e-12)


def test_power_law_noise():
    rng = np.random.default_rng(5)
    ns = np.array([50, 100, 200, 400, 800])
    for _ in range(20):
        s = 0.178 / ns * (1 + 0.05 * rng.standard_normal(ns.size))
        assert abs(power_law_fit(ns, s).alpha - 1) < 0.1


@settings(max_examples=30, deadline=None)
@given(k=st.floats(1e-6, 1e6))
def test_power_law_scale_equivariance(k):
    ns = [10, 20, 40, 80]
    s = np.array([0.3, 0.17, 0.09, 0.051])
    a, b = power_law_fit(ns, s), power_law_fit(ns, k * s)
    assert b.alpha == pytest.approx(a.alpha, abs=1e-12)
    assert b.constant == pytest.approx(k * a.constant, rel=1e-12)


def test_power_law_errors():
    with pytest.raises(NonPositiveInput):
        power_law_fit([1, 2, 3], [1, 0, 1])
    with pytest.raises(NonPositiveInput):
        power_law_fit([0, 2, 3], [1, 1, 1])
    with pytest.raises(TooFewSamples):
        power_law_fit([1, 2], [1, 1])
    with pytest.raises(ValueError):
        power_law_fit([1, 2, 3], [1, 1])


def test_log_linear_fit():
    ns = np.array([100, 200, 400, 800])
    p, q, r2 = log_linear_fit(ns, 1.5 + 0.7 * np.log(ns))
    assert (p, q, r2) == pytest.approx((0.7, 1.5, 1.0), abs=1e-12)


def test_complex_scatter_and_bootstrap():
    v = np.array([1 + 1j, -1 - 1j])
    assert complex_scatter(v) == pytest.approx(np.sqrt(2))
    rng = np.random.default_rng(6)
    z = rng.normal(size=400) + 1j * rng.normal(size=400)
    se = bootstrap_stderr(z, resamples=300, seed=1)
    # scatter ~ sqrt(2); its standard error is about sqrt(2)/(2 sqrt(n))
    assert 0.5 * np.sqrt(2) / (2 * 20) < se < 2 * np.sqrt(2) / (2 * 20)
    assert bootstrap_stderr(z, resamples=50, seed=3) == bootstrap_stderr(z, resamples=50, seed=3)
