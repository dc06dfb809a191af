import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import curve_fit

from modesplit.errors import FitDiverged
from modesplit.fitting import covariance, levenberg_marquardt


def model(x, a, k, c):
    return a * np.exp(-k * x) + c


def jac(x, p):
    a, k, c = p
    e = np.exp(-k * x)
    return np.column_stack([e, -a * x * e, np.ones_like(x)])


def test_matches_curve_fit_on_noisy_data():
    rng = np.random.default_rng(1)
    x = np.linspace(0, 5, 80)
    y = model(x, 2.0, 1.3, 0.4) + rng.normal(0, 0.02, x.size)
    res = levenberg_marquardt(lambda p: model(x, *p) - y, lambda p: jac(x, p), [1.0, 1.0, 0.0])
    popt, pcov = curve_fit(model, x, y, p0=[1.0, 1.0, 0.0])
    assert np.allclose(res.params, popt, rtol=1e-7)
    assert np.allclose(res.stderr, np.sqrt(np.diag(pcov)), rtol=1e-4)
    assert res.converged


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 5.0), st.floats(0.3, 3.0), st.floats(-1.0, 1.0))
def test_noiseless_recovery(a, k, c):
    x = np.linspace(0, 4, 60)
    y = model(x, a, k, c)
    res = levenberg_marquardt(lambda p: model(x, *p) - y, lambda p: jac(x, p),
                              [a * 1.2, k * 0.8, c + 0.1], x_scale=[1, 1, 1])
    assert np.allclose(res.params, [a, k, c], rtol=1e-6, atol=1e-9)


def test_linear_covariance_is_textbook():
    # for a linear model (J^T J)^-1 s^2 is the OLS covariance
    rng = np.random.default_rng(2)
    X = np.column_stack([np.ones(50), np.linspace(0, 1, 50)])
    r = rng.normal(size=50)
    cov = covariance(X, r)
    expected = np.linalg.inv(X.T @ X) * (r @ r) / 48
    assert np.allclose(cov, expected, rtol=1e-10)


def test_iteration_cap_raises():
    x = np.linspace(0, 4, 60)
    y = model(x, 2.0, 1.0, 0.0)
    with pytest.raises(FitDiverged):
        levenberg_marquardt(lambda p: model(x, *p) - y, lambda p: jac(x, p), [0.1, 5.0, 3.0],
                            max_iter=2, xtol=1e-300, ftol=0.0)


def test_infeasible_start_region_is_avoided():
    x = np.linspace(0, 4, 60)
    y = model(x, 2.0, 1.0, 0.0)
    res = levenberg_marquardt(lambda p: model(x, *p) - y, lambda p: jac(x, p), [1.0, 0.5, 0.0],
                              feasible=lambda p: p[1] > 0)
    assert res.params[1] > 0 and res.params[1] == pytest.approx(1.0, rel=1e-8)
