"""Parametric survival families fitted by censored maximum likelihood."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ._optim import GRAD_TOL, MAX_ITER, newton_maximize
from .dataset import SurvivalData
from .exceptions import DegenerateDataError, DomainError

FAMILIES = ("exponential", "weibull", "loglogistic")
N_PARAMS = {"exponential": 1, "weibull": 2, "loglogistic": 2}


def _check_family(family):
    if family not in FAMILIES:
        raise DomainError(f"unknown family {family!r}; expected one of {FAMILIES}")


def _check_params(family, scale, shape):
    if not scale > 0:
        raise DomainError("scale parameter must be positive")
    if family != "exponential" and not shape > 0:
        raise DomainError("shape parameter must be positive")


def survival_function(family, params, t):
    """S(t) for the given family.

    log-logistic: ``1 / (1 + (t/lambda)**gamma)``; Weibull:
    ``exp(-(t/lambda)**gamma)``; exponential is Weibull with gamma = 1.
    `params` is a mapping with ``lambda`` and (except exponential) ``gamma``.
    """
    _check_family(family)
    scale = float(params["lambda"])
    shape = 1.0 if family == "exponential" else float(params["gamma"])
    _check_params(family, scale, shape)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DomainError("t must be nonnegative")
    z = (t_arr / scale) ** shape
    out = 1.0 / (1.0 + z) if family == "loglogistic" else np.exp(-z)
    return float(out) if out.ndim == 0 else out


def density(family, params, t):
    _check_family(family)
    scale = float(params["lambda"])
    shape = 1.0 if family == "exponential" else float(params["gamma"])
    _check_params(family, scale, shape)
    t_arr = np.asarray(t, dtype=float)
    z = (t_arr / scale) ** shape
    base = shape / scale * (t_arr / scale) ** (shape - 1.0)
    out = base / (1.0 + z) ** 2 if family == "loglogistic" else base * np.exp(-z)
    return float(out) if out.ndim == 0 else out


def hazard(family, params, t):
    return density(family, params, t) / survival_function(family, params, t)


def loglik(family, theta, time, event):
    """Censored log-likelihood and derivatives in ``theta = (log lambda[, log gamma])``.

    Writing ``s = gamma * (log t - log lambda)``, each subject contributes
    ``event * (log gamma + s - log t) - G(s)`` with ``G = exp`` for Weibull
    and ``G = (1 + event) * log1p(exp)`` for log-logistic.
    """
    _check_family(family)
    theta = np.asarray(theta, dtype=float).reshape(-1)
    time = np.asarray(time, dtype=float)
    delta = np.asarray(event, dtype=float)
    y = np.log(time)
    u = theta[0]
    v = 0.0 if family == "exponential" else theta[1]
    gamma = math.exp(v)
    s = gamma * (y - u)

    if family == "loglogistic":
        sp = np.logaddexp(0.0, s)
        sig = expit(s)
        g = (1.0 + delta) * sp
        g1 = (1.0 + delta) * sig
        g2 = (1.0 + delta) * sig * (1.0 - sig)
    else:
        es = np.exp(s)
        g = g1 = g2 = es

    value = float(np.sum(delta * (v + s - y) - g))
    du = float(np.sum(gamma * (g1 - delta)))
    duu = float(np.sum(-gamma * gamma * g2))
    if family == "exponential":
        return value, np.array([du]), np.array([[duu]])
    dv = float(np.sum(delta * (1.0 + s) - g1 * s))
    duv = float(np.sum(gamma * (g1 - delta) + gamma * g2 * s))
    dvv = float(np.sum(s * (delta - g1) - g2 * s * s))
    return value, np.array([du, dv]), np.array([[duu, duv], [duv, dvv]])


def information_criteria(loglik, k, n):
    """``aic = 2k - 2 loglik``, ``bic = log(n) k - 2 loglik`` (natural log)."""
    if k < 0 or n < 1:
        raise DomainError("need k >= 0 and n >= 1")
    return 2.0 * k - 2.0 * loglik, math.log(n) * k - 2.0 * loglik


@dataclass(frozen=True)
class ParametricFit:
    family: str
    params: dict
    loglik: float
    aic: float
    bic: float
    converged: bool
    n: int
    n_events: int
    iterations: int = 0
    message: str = ""

    @property
    def k(self):
        return N_PARAMS[self.family]

    def survival(self, t):
        return survival_function(self.family, self.params, t)

    def to_dict(self):
        return {
            "family": self.family,
            "params": dict(self.params),
            "loglik": self.loglik,
            "aic": self.aic,
            "bic": self.bic,
            "converged": self.converged,
            "n": self.n,
            "n_events": self.n_events,
        }


def fit_parametric(samples, family, tol=GRAD_TOL, max_iter=MAX_ITER):
    """Censored maximum-likelihood fit of one family.

    Optimizes over (log lambda, log gamma) by Newton-Raphson, starting from
    lambda = median observed time and gamma = 1.
    """
    _check_family(family)
    if isinstance(samples, SurvivalData):
        time, event = samples.time, samples.event
    else:
        time, event = (np.asarray(a) for a in samples)
    time = np.asarray(time, dtype=float)
    event = np.asarray(event, dtype=int)
    if np.any(time <= 0):
        raise DomainError("survival times must be positive")
    n_events = int(event.sum())
    if n_events == 0:
        raise DegenerateDataError("parametric fit needs at least one event")
    if n_events < 2 and family != "exponential":
        raise DegenerateDataError(f"{family} fit needs at least two events")

    x0 = [math.log(float(np.median(time)))]
    if family != "exponential":
        x0.append(0.0)
    res = newton_maximize(lambda th: loglik(family, th, time, event), x0, tol=tol,
                          max_iter=max_iter)
    params = {"lambda": math.exp(res.x[0])}
    if family != "exponential":
        params["gamma"] = math.exp(res.x[1])
    k = N_PARAMS[family]
    aic, bic = information_criteria(res.value, k, len(time))
    return ParametricFit(family, params, float(res.value), aic, bic, res.converged,
                         len(time), n_events, res.iterations, res.message)
