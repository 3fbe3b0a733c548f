"""Log odds of survival: horizon labels, logistic regression, scores and histograms.

The modeled probability ``p`` is the probability of SURVIVING to the
horizon, so higher log odds mean a better prognosis. The death-risk
framing is the negated score (:func:`death_log_odds`).
"""

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ._optim import GRAD_TOL, MAX_ITER, information_degenerate, newton_maximize
from .dataset import EventPolicy, design_matrix
from .exceptions import DegenerateDataError, DomainError, SeparationError

DEFAULT_HORIZON = 60.0
DIVERGENCE_BOUND = 50.0


def binarize_outcome(records, horizon_months=DEFAULT_HORIZON, policy=EventPolicy.OVERALL):
    """Survival-to-horizon labels.

    Returns ``(labels, mask)``: label 1 when follow-up reaches the horizon
    before any event, 0 when the event came first, and -1 (``mask`` False)
    for subjects censored before the horizon.
    """
    if not horizon_months > 0:
        raise DomainError("horizon must be positive")
    policy = EventPolicy.coerce(policy)
    labels = np.full(len(records), -1, dtype=int)
    for i, rec in enumerate(records):
        if rec.survival_months >= horizon_months:
            labels[i] = 1
        elif policy.is_event(rec.outcome):
            labels[i] = 0
    mask = labels >= 0
    if not mask.any():
        raise DegenerateDataError(f"no subject is determinate at {horizon_months} months")
    return labels, mask


def logistic_loglik(features, labels, coef, ridge=0.0):
    """Bernoulli log-likelihood of ``coef = (intercept, beta...)`` with gradient and Hessian.

    A nonzero `ridge` subtracts ``ridge/2 * |beta|^2`` (intercept unpenalized).
    """
    x = np.asarray(features, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    y = np.asarray(labels, dtype=float)
    coef = np.asarray(coef, dtype=float)
    design = np.column_stack([np.ones(len(x)), x])
    eta = design @ coef
    # log p = -log(1+e^-eta), log(1-p) = -log(1+e^eta)
    value = float(np.sum(y * -np.logaddexp(0.0, -eta) + (1.0 - y) * -np.logaddexp(0.0, eta)))
    p = expit(eta)
    grad = design.T @ (y - p)
    hess = -(design * (p * (1.0 - p))[:, None]).T @ design
    if ridge:
        pen = np.ones(len(coef))
        pen[0] = 0.0
        value -= 0.5 * ridge * float(np.sum(pen * coef * coef))
        grad = grad - ridge * pen * coef
        hess = hess - ridge * np.diag(pen)
    return value, grad, hess


@dataclass(frozen=True)
class LogisticFit:
    intercept: float
    beta: np.ndarray
    covariance: np.ndarray
    loglik: float
    n_used: int
    horizon_months: float
    converged: bool
    covariate_names: tuple = ()
    ridge: float = 0.0
    iterations: int = 0
    n_excluded: int = 0
    message: str = ""

    @property
    def standard_errors(self):
        """Standard errors of ``(intercept, beta...)``."""
        return np.sqrt(np.diag(self.covariance))

    def to_dict(self):
        return {
            "kind": "logistic",
            "intercept": self.intercept,
            "beta": [float(b) for b in self.beta],
            "covariance": [[float(v) for v in row] for row in self.covariance],
            "loglik": self.loglik,
            "n_used": self.n_used,
            "n_excluded": self.n_excluded,
            "horizon_months": self.horizon_months,
            "converged": self.converged,
            "covariate_names": list(self.covariate_names),
            "ridge": self.ridge,
        }

    @classmethod
    def from_dict(cls, d):
        p = len(d["beta"])
        cov = d.get("covariance") or np.zeros((p + 1, p + 1))
        return cls(
            intercept=float(d["intercept"]),
            beta=np.asarray(d["beta"], dtype=float),
            covariance=np.asarray(cov, dtype=float).reshape(p + 1, p + 1),
            loglik=float(d.get("loglik", math.nan)),
            n_used=int(d.get("n_used", 0)),
            horizon_months=float(d.get("horizon_months", DEFAULT_HORIZON)),
            converged=bool(d.get("converged", True)),
            covariate_names=tuple(d["covariate_names"]),
            ridge=float(d.get("ridge", 0.0)),
            n_excluded=int(d.get("n_excluded", 0)),
        )


def logistic_fit(features, labels, covariate_names=None, horizon_months=DEFAULT_HORIZON,
                 ridge=0.0, tol=GRAD_TOL, max_iter=MAX_ITER, divergence_bound=DIVERGENCE_BOUND):
    """Maximum-likelihood logistic regression by iteratively reweighted least squares.

    Each IRLS step is the Newton step on the Bernoulli log-likelihood;
    features are standardized internally and the fit is reported on the
    original scale, covariance being the inverse observed information.

    Raises
    ------
    DegenerateDataError
        Only one label class, a constant feature, or singular normal equations.
    SeparationError
        Coefficients diverge (perfect or quasi-perfect separation).
    """
    x = np.asarray(features, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    y = np.asarray(labels, dtype=float).reshape(-1)
    n, p = x.shape
    names = tuple(covariate_names) if covariate_names else tuple(f"x{j}" for j in range(p))
    if len(y) != n:
        raise DomainError("features and labels must have the same length")
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise DomainError("labels must be 0 or 1")
    if y.sum() == 0 or y.sum() == n:
        raise DegenerateDataError("logistic fit needs at least one of each label")

    center = x.mean(axis=0)
    scale = x.std(axis=0)
    constant = [names[j] for j in range(p) if not scale[j] > 1e-12 * max(1.0, abs(center[j]))]
    if constant:
        raise DegenerateDataError(f"constant column: {', '.join(constant)}", constant)
    z = (x - center) / scale
    if p and np.linalg.matrix_rank(np.column_stack([np.ones(n), z])) < p + 1:
        raise DegenerateDataError(f"singular weighted normal equations; check columns {', '.join(names)}",
                                  names)

    def objective(c):
        return logistic_loglik(z, y, c, ridge)

    start = np.zeros(p + 1)
    start[0] = math.log(y.mean() / (1.0 - y.mean()))
    res = newton_maximize(objective, start, tol=tol, max_iter=max_iter, bound=divergence_bound)
    fitted = expit(np.column_stack([np.ones(n), z]) @ res.x)
    separated = np.all(np.where(y == 1, fitted, 1.0 - fitted) > 1.0 - 1e-10)
    if res.message == "diverged" or (ridge == 0 and (separated or information_degenerate(res.hessian))):
        raise SeparationError("coefficients diverge: labels are (quasi-)perfectly separated", names)

    try:
        cov_z = np.linalg.inv(-res.hessian)
    except np.linalg.LinAlgError:
        raise DegenerateDataError("singular weighted normal equations at the optimum", names) from None
    # original-scale coefficients are a linear map of the standardized ones
    jac = np.eye(p + 1)
    jac[1:, 1:] = np.diag(1.0 / scale)
    jac[0, 1:] = -center / scale
    coef = jac @ res.x
    cov = jac @ cov_z @ jac.T
    cov = (cov + cov.T) / 2.0
    return LogisticFit(float(coef[0]), coef[1:], cov, float(res.value), n, float(horizon_months),
                       res.converged, names, float(ridge), res.iterations, 0, res.message)


def fit_log_odds(records, covariates, horizon_months=DEFAULT_HORIZON, policy=EventPolicy.OVERALL,
                 ridge=0.0):
    """Binarize at the horizon, drop indeterminate/incomplete records, fit."""
    labels, mask = binarize_outcome(records, horizon_months, policy)
    included = [r for r, m in zip(records, mask) if m]
    x, info = design_matrix(included, covariates)
    y = labels[mask][info.rows]
    if len(y) == 0:
        raise DegenerateDataError("no complete records determinate at the horizon")
    fit = logistic_fit(x, y, info.names, horizon_months, ridge)
    return LogisticFit(fit.intercept, fit.beta, fit.covariance, fit.loglik, fit.n_used,
                       fit.horizon_months, fit.converged, fit.covariate_names, fit.ridge,
                       fit.iterations, len(records) - len(y), fit.message)


def log_odds_score(fit, covariate_vector):
    """``(log_odds, probability)`` of survival to the fit's horizon."""
    x = np.asarray(covariate_vector, dtype=float).reshape(-1)
    if len(x) != len(fit.beta):
        raise DomainError(f"covariate vector has length {len(x)}, model expects {len(fit.beta)}")
    log_odds = fit.intercept + float(np.dot(fit.beta, x))
    return log_odds, float(expit(log_odds))


def death_log_odds(fit, covariate_vector):
    """Log odds of death before the horizon: the negated survival score."""
    return -log_odds_score(fit, covariate_vector)[0]


@dataclass(frozen=True)
class LogOddsHistogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    mean: float
    sd: float
    scores: np.ndarray
    ids: tuple = ()

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["bin_lower", "bin_upper", "count"])
        for lo, hi, c in zip(self.bin_edges[:-1], self.bin_edges[1:], self.counts):
            writer.writerow([repr(float(lo)), repr(float(hi)), int(c)])
        return buf.getvalue()


def histogram(scores, bins=20, ids=()):
    scores = np.asarray(scores, dtype=float)
    if len(scores) == 0:
        raise DegenerateDataError("no scores to bin")
    if bins < 1:
        raise DomainError("bins must be >= 1")
    counts, edges = np.histogram(scores, bins=bins, range=(scores.min(), scores.max())
                                 if scores.max() > scores.min() else None)
    return LogOddsHistogram(edges, counts, float(scores.mean()), float(scores.std()), scores, tuple(ids))


def log_odds_distribution(fit, records, policy=EventPolicy.OVERALL, bins=20):
    """Score every subject determinate at the fit's horizon and bin the log odds.

    Bins are equal-width over [min, max]; ``sd`` is the population standard
    deviation.
    """
    _, mask = binarize_outcome(records, fit.horizon_months, policy)
    included = [r for r, m in zip(records, mask) if m]
    x, info = design_matrix(included, fit.covariate_names)
    if len(x) == 0:
        raise DegenerateDataError("no included subject has complete covariates")
    scores = fit.intercept + x @ fit.beta
    return histogram(scores, bins, [included[i].id for i in info.rows])
