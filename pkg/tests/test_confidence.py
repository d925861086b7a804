import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from logbandits.confidence import (ConfidenceParams, CoverageInstance, coverage_monte_carlo,
                                   burnin_check, faury_eta, faury_gamma, gamma_d,
                                   variance_sandwich_holds, width_faury, width_li17, width_thm1,
                                   xi_sq)
from logbandits.core import LogisticDataset, fisher_info, link_mu_dot
from logbandits.errors import InvalidConfig, NullSpaceWarning, TooFewSamples


def test_gamma_d_values():
    assert_allclose(gamma_d(ConfidenceParams(math.exp(-1), 1, 1)), 2 + math.log(18), rtol=1e-14)
    assert_allclose(gamma_d(ConfidenceParams(0.05, 10, 4)), 4 + math.log(1440), rtol=1e-14)
    # the quoted approximation 11.2725 is a display rounding of 11.27240
    assert abs(gamma_d(ConfidenceParams(0.05, 10, 4)) - 11.2725) < 5e-4
    assert gamma_d(ConfidenceParams(0.05, 11, 4)) > gamma_d(ConfidenceParams(0.05, 10, 4))
    assert gamma_d(ConfidenceParams(0.01, 10, 4)) > gamma_d(ConfidenceParams(0.05, 10, 4))


def test_params_reject_large_delta():
    with pytest.raises(InvalidConfig):
        ConfidenceParams(0.5, 1, 1)


def test_xi_sq(rng):
    assert_allclose(xi_sq(np.array([[1.0, 0.0]]), np.diag([4.0, 0.0])), 0.25)
    X = rng.normal(size=(10, 3))
    H = X.T @ X
    assert_allclose(xi_sq(2 * X, H), 4 * xi_sq(X, H), rtol=1e-12)
    Hinv = np.linalg.inv(H)
    brute = max(float(x @ Hinv @ x) for x in X)
    assert abs(xi_sq(X, H) - brute) <= 1e-10


def test_width_thm1_formula():
    # uniform design on {e1, e2}, t = 400, theta* = 0 -> H = 50 I
    H = 200 * 0.25 * np.eye(2)
    delta = 0.1
    p = ConfidenceParams(delta, 2, 2)
    w = width_thm1(np.array([1.0, 0.0]), H, p)
    assert_allclose(w.half_width, 3.5 * math.sqrt(1 / 50) * math.sqrt(math.log(2 * 4 / delta)),
                    rtol=1e-14)
    we = width_thm1(np.array([1.0, 0.0]), H, p, empirical=True)
    assert_allclose(we.half_width / w.half_width, 5.2 / 3.5, rtol=1e-14)


def test_width_thm1_null_space():
    H = np.diag([3.0, 0.0])
    p = ConfidenceParams(0.1, 1, 2)
    with pytest.warns(NullSpaceWarning):
        w = width_thm1(np.array([0.0, 1.0]), H, p)
    assert w.half_width == 0.0 and w.null_space
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        w2 = width_thm1(np.array([1.0, 0.0]), H, p)
    assert not w2.null_space


def test_width_thm1_burnin_flag():
    arms = np.eye(2)
    p = ConfidenceParams(0.1, 2, 2)
    assert width_thm1(arms[0], 1e6 * np.eye(2), p, design_arms=arms).burnin_satisfied
    assert not width_thm1(arms[0], np.eye(2), p, design_arms=arms).burnin_satisfied
    assert width_thm1(arms[0], np.eye(2), p).burnin_satisfied is None


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.floats(-5, 5).filter(lambda c: abs(c) > 1e-6))
def test_width_homogeneous(seed, c):
    r = np.random.default_rng(seed)
    X = r.normal(size=(6, 3))
    H = X.T @ X
    x = r.normal(size=3)
    p = ConfidenceParams(0.05, 6, 3)
    assert_allclose(width_thm1(c * x, H, p).half_width, abs(c) * width_thm1(x, H, p).half_width,
                    rtol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31))
def test_width_nonincreasing_and_burnin_monotone(seed):
    r = np.random.default_rng(seed)
    X = r.normal(size=(5, 3)) / 2
    th = r.normal(size=3)
    data = LogisticDataset.from_samples(X, np.zeros(5, dtype=int))
    H = fisher_info(data, th)
    extra = X[r.integers(5)]
    H2 = H + link_mu_dot(extra @ th) * np.outer(extra, extra)
    p = ConfidenceParams(0.05, 5, 3)
    x = r.normal(size=3)
    assert width_thm1(x, H2, p).half_width <= width_thm1(x, H, p).half_width * (1 + 1e-10)
    # scaling up the Fisher matrix (copies of existing points) never breaks burn-in
    if burnin_check(X, H, p):
        assert burnin_check(X, 2 * H, p)


def test_width_li17():
    w = width_li17(np.array([1.0, 0.0]), np.eye(2), 1.0, math.exp(-1))
    assert_allclose(w.half_width, 1.0)
    w2 = width_li17(np.array([1.0, 0.0]), np.eye(2), 0.5, math.exp(-1))
    assert_allclose(w2.half_width, 2.0)


def test_li_over_thm1_grows_exponentially():
    # unit-ball family: arms e1, e2 with theta* = S e1; width along e1
    ratios = []
    for S in (0.0, 1.0, 2.0, 3.0):
        theta = np.array([S, 0.0])
        X = np.eye(2)
        data = LogisticDataset(X, np.array([500, 500]), np.zeros(2))
        H = fisher_info(data, theta)
        V = X.T @ np.diag([500.0, 500.0]) @ X
        kappa = link_mu_dot(S)
        p = ConfidenceParams(0.05, 2, 2)
        x = np.array([1.0, 0.0])
        ratios.append(width_li17(x, V, kappa, 0.05).half_width / width_thm1(x, H, p).half_width)
    r = np.array(ratios)
    assert np.all(np.diff(r) > 0)
    # 1/kappa over 1/sqrt(kappa) grows like e^{S/2}
    assert r[-1] / r[0] >= math.exp(3.0 / 2.0) / 2


def test_faury_gamma_arithmetic_and_precondition():
    d, T, S, delta = 5, 1000, 2.0, 0.05
    expect = 3 * math.sqrt(2 * S + 1) * (math.sqrt(d) * math.log(T * (2 * S + 1) / (2 * d))
                                         + math.sqrt(math.log(1 / delta)))
    assert abs(faury_gamma(d, T, S, delta) - expect) <= 1e-10
    faury_gamma(d, 4 * d, S, delta)
    with pytest.raises(TooFewSamples):
        faury_gamma(d, 4 * d - 1, S, delta)
    assert_allclose(faury_eta(d, S, delta), (d + math.log(1 / delta)) / (S + 0.5))


def test_faury_monotone_in_s():
    H = np.diag([100.0, 100.0])
    x = np.array([1.0, 0.0])
    ws = [width_faury(x, H, s, 100, 0.05).half_width for s in (0.5, 1.0, 2.0, 4.0)]
    assert np.all(np.diff(ws) > 0)


def test_variance_sandwich_holds():
    H = np.diag([2.0, 3.0])
    assert variance_sandwich_holds(H * 2.0, H)
    assert not variance_sandwich_holds(H * 2.3, H)
    assert not variance_sandwich_holds(np.diag([2.0, 3.0 / 2.3]), H)


def _coverage_instance(theta, t=2000):
    X = np.eye(2)
    return CoverageInstance(X, np.array([t // 2, t // 2]), theta, np.array([1.0, 0.0]), "cov-d2")


@pytest.mark.slow
def test_coverage_theta_zero():
    res = coverage_monte_carlo(_coverage_instance(np.zeros(2)), 0.1, 2000, seed=7)
    assert res.failure_rate_true <= 0.1
    assert res.burnin_satisfied


def test_coverage_small_cases():
    inst = _coverage_instance(np.array([0.5, -0.5]))
    res = coverage_monte_carlo(inst, 0.1, 1, seed=1)
    assert res.failure_rate_true in (0.0, 1.0)
    a = coverage_monte_carlo(inst, 0.1, 50, seed=3)
    b = coverage_monte_carlo(inst, 0.1, 50, seed=3, jobs=4)
    assert a == b
    assert set(a.csv_row()) == set(a.CSV_COLUMNS)
    with pytest.raises(InvalidConfig):
        coverage_monte_carlo(inst, 0.1, 0, seed=3)
