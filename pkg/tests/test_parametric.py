import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose
from scipy import integrate, optimize, stats

from survodds.dataset import SurvivalData
from survodds.exceptions import DomainError
from survodds.parametric import (FAMILIES, density, fit_parametric, hazard, information_criteria, loglik,
                                 survival_function)
from survodds.synth import SynthSpec, generate_cohort

from oracles import central_gradient, central_jacobian

PARAMS = {"lambda": 2.0, "gamma": 3.0}


def weibull_cohort(seed=5, n=2000, rate=None):
    spec = SynthSpec(n=n, mode="abstract", seed=seed, baseline={"family": "weibull", "lambda": 10.0, "gamma": 1.5},
                     censoring={"kind": "exponential", "rate": rate} if rate else {"kind": "none"})
    return generate_cohort(spec)


@pytest.mark.parametrize("family", FAMILIES)
def test_survival_at_zero(family):
    assert survival_function(family, PARAMS, 0.0) == 1.0


def test_loglogistic_values():
    assert survival_function("loglogistic", {"lambda": 7.3, "gamma": 2.2}, 7.3) == 0.5
    assert survival_function("loglogistic", PARAMS, 4.0) == pytest.approx(1 / 9, rel=1e-15)


def test_invalid_parameters():
    with pytest.raises(DomainError):
        survival_function("weibull", {"lambda": -1.0, "gamma": 1.0}, 1.0)
    with pytest.raises(DomainError):
        survival_function("gompertz", PARAMS, 1.0)


@pytest.mark.parametrize("family", FAMILIES)
def test_density_is_minus_survival_derivative(family):
    grid = np.linspace(0.2, 8.0, 40)
    h = 1e-6
    num = -(survival_function(family, PARAMS, grid + h) - survival_function(family, PARAMS, grid - h)) / (2 * h)
    assert_allclose(density(family, PARAMS, grid), num, rtol=1e-6)


def test_hazard_shapes():
    grid = np.linspace(0.05, 10, 400)
    hz = hazard("loglogistic", PARAMS, grid)
    peak = int(np.argmax(hz))
    assert 0 < peak < len(grid) - 1
    assert np.all(np.diff(hz[:peak + 1]) > 0) and np.all(np.diff(hz[peak:]) < 0)
    assert np.all(np.diff(hazard("weibull", PARAMS, grid)) > 0)
    assert np.all(np.diff(hazard("weibull", {"lambda": 2.0, "gamma": 0.5}, grid)) < 0)


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("seed", range(3))
def test_loglik_derivatives(family, seed):
    rng = np.random.default_rng(seed)
    t = rng.weibull(1.3, 30) * 5
    e = (rng.random(30) < 0.7).astype(int)
    theta = rng.normal(size=1 if family == "exponential" else 2) * 0.3 + [1.5, 0.2][:1 if family == "exponential" else 2]
    _, g, h = loglik(family, theta, t, e)
    assert_allclose(g, central_gradient(lambda th: loglik(family, th, t, e)[0], theta), rtol=1e-6, atol=1e-8)
    assert_allclose(h, central_jacobian(lambda th: loglik(family, th, t, e)[1], theta), rtol=1e-6, atol=1e-7)


def test_exponential_closed_form():
    rng = np.random.default_rng(1)
    t = rng.exponential(4.0, 500)
    fit = fit_parametric(SurvivalData.from_arrays(t, np.ones(500, int)), "exponential")
    assert fit.params["lambda"] == pytest.approx(t.mean(), rel=1e-8)
    # censored closed form: total time / events
    e = (rng.random(500) < 0.6).astype(int)
    fit = fit_parametric(SurvivalData.from_arrays(t, e), "exponential")
    assert fit.params["lambda"] == pytest.approx(t.sum() / e.sum(), rel=1e-8)


def censoring_rate_for(fraction, lam=10.0, gamma=1.5):
    """Exponential censoring rate r with P(C < T) = fraction for a Weibull T."""
    def frac(r):
        return integrate.quad(lambda t: r * math.exp(-r * t - (t / lam) ** gamma), 0, math.inf)[0]
    return optimize.brentq(lambda r: frac(r) - fraction, 1e-6, 10.0)


def test_weibull_recovery():
    data = weibull_cohort(rate=censoring_rate_for(0.25))
    assert 1 - data.event.mean() == pytest.approx(0.25, abs=0.03)
    fit = fit_parametric(data, "weibull")
    assert fit.converged
    assert fit.params["lambda"] == pytest.approx(10.0, rel=0.1)
    assert fit.params["gamma"] == pytest.approx(1.5, rel=0.1)


def test_weibull_nesting():
    data = weibull_cohort(seed=2, n=300, rate=0.03)
    exp_fit = fit_parametric(data, "exponential")
    wb = fit_parametric(data, "weibull")
    at_gamma_one = loglik("weibull", [math.log(exp_fit.params["lambda"]), 0.0], data.time, data.event)[0]
    assert at_gamma_one == pytest.approx(exp_fit.loglik, rel=1e-12)
    assert wb.loglik >= exp_fit.loglik


def test_information_criteria():
    assert information_criteria(0.0, 0, 10) == (0.0, 0.0)
    aic, bic = information_criteria(-100.0, 2, math.e ** 2)
    assert aic == pytest.approx(204.0, abs=1e-12) and bic == pytest.approx(204.0, abs=1e-12)
    a1, b1 = information_criteria(-50.0, 3, 100)
    a2, b2 = information_criteria(-50.0, 4, 100)
    assert a2 > a1 and b2 > b1


def test_fit_export():
    fit = fit_parametric(weibull_cohort(n=200), "loglogistic")
    d = fit.to_dict()
    assert {"family", "params", "loglik", "aic", "bic", "converged"} <= set(d)
    assert d["aic"] == pytest.approx(2 * 2 - 2 * fit.loglik, abs=1e-10)
    assert d["bic"] == pytest.approx(math.log(200) * 2 - 2 * fit.loglik, abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(FAMILIES), st.floats(0.1, 50), st.floats(0.2, 5),
       st.lists(st.floats(0, 500), min_size=2, max_size=20))
def test_survival_properties(family, lam, gam, ts):
    t = np.sort(np.array(ts))
    s = survival_function(family, {"lambda": lam, "gamma": gam}, t)
    assert np.all((s >= 0) & (s <= 1))
    assert np.all(np.diff(s) <= 1e-15)
    assert survival_function(family, {"lambda": lam, "gamma": gam}, 1e30 * lam) < 1e-3


def test_ks_of_synth_baseline():
    spec = SynthSpec(n=10000, mode="abstract", seed=9, baseline={"family": "loglogistic", "lambda": 3.0, "gamma": 2.0})
    t = generate_cohort(spec).time
    d = stats.kstest(t, lambda x: 1 - survival_function("loglogistic", {"lambda": 3.0, "gamma": 2.0}, x)).statistic
    assert d < 0.02
