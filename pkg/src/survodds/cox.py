"""Cox proportional-hazards regression by partial likelihood."""

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ._optim import GRAD_TOL, MAX_ITER, information_degenerate, newton_maximize
from .dataset import LABELS, SurvivalData, format_p
from .exceptions import DegenerateDataError, DomainError, NotConvergedError, SeparationError

TIES_METHODS = ("efron", "breslow")
DIVERGENCE_BOUND = 50.0
Z_95 = 1.96


class _RiskSets:
    """Time-sorted layout of a cohort, reused across likelihood evaluations."""

    def __init__(self, time, event, x, ties_method):
        if ties_method not in TIES_METHODS:
            raise DomainError(f"ties_method must be one of {TIES_METHODS}")
        order = np.argsort(time, kind="mergesort")
        self.time = time[order]
        self.event = event[order].astype(bool)
        self.x = x[order]
        n = len(time)
        ev_idx = np.flatnonzero(self.event)
        if len(ev_idx) == 0:
            raise DegenerateDataError("partial likelihood undefined without events")
        ev_times = self.time[ev_idx]
        uniq, start_in_ev, counts = np.unique(ev_times, return_index=True, return_counts=True)
        # first position of each event time among all subjects = start of its risk set
        self.risk_start = np.searchsorted(self.time, uniq, side="left")
        self.ev_idx = ev_idx
        self.group_start = start_in_ev
        self.counts = counts
        # one row per event: which tied group it belongs to and its Efron fraction l/d
        self.ev_group = np.repeat(np.arange(len(uniq)), counts)
        rank_in_group = np.arange(len(ev_idx)) - np.repeat(start_in_ev, counts)
        if ties_method == "efron":
            self.frac = rank_in_group / np.repeat(counts, counts).astype(float)
        else:
            self.frac = np.zeros(len(ev_idx))
        self.n = n

    def evaluate(self, beta):
        x = self.x
        eta = x @ beta
        shift = float(np.max(eta))
        w = np.exp(eta - shift)
        wx = w[:, None] * x
        wxx = wx[:, :, None] * x[:, None, :]
        s0 = np.cumsum(w[::-1])[::-1]
        s1 = np.cumsum(wx[::-1], axis=0)[::-1]
        s2 = np.cumsum(wxx[::-1], axis=0)[::-1]

        ev = self.ev_idx
        d0 = np.add.reduceat(w[ev], self.group_start)
        d1 = np.add.reduceat(wx[ev], self.group_start, axis=0)
        d2 = np.add.reduceat(wxx[ev], self.group_start, axis=0)

        g = self.ev_group
        rs = self.risk_start[g]
        f = self.frac
        phi0 = s0[rs] - f * d0[g]
        phi1 = s1[rs] - f[:, None] * d1[g]
        phi2 = s2[rs] - f[:, None, None] * d2[g]

        value = float(eta[ev].sum() - np.sum(np.log(phi0) + shift))
        ratio = phi1 / phi0[:, None]
        grad = x[ev].sum(axis=0) - ratio.sum(axis=0)
        hess = -(phi2 / phi0[:, None, None]).sum(axis=0) + ratio.T @ ratio
        return value, grad, hess


def _arrays(samples):
    if not isinstance(samples, SurvivalData):
        raise DomainError("samples must be a SurvivalData instance")
    return samples.time, samples.event, samples.covariates


def partial_loglik(samples, beta, ties_method="efron"):
    """Log partial likelihood with its gradient and Hessian at `beta`.

    Efron's correction spreads tied events over partially depleted risk
    sets; Breslow's uses the full risk set for every tied event. With no
    tied event times the two coincide exactly.
    """
    time, event, x = _arrays(samples)
    beta = np.asarray(beta, dtype=float).reshape(-1)
    if len(beta) != x.shape[1]:
        raise DomainError(f"beta has length {len(beta)}, expected {x.shape[1]}")
    return _RiskSets(time, event, x, ties_method).evaluate(beta)


@dataclass(frozen=True)
class CoxFit:
    beta: np.ndarray
    covariance: np.ndarray
    loglik_null: float
    loglik_full: float
    n: int
    n_events: int
    iterations: int
    converged: bool
    ties_method: str
    covariate_names: tuple
    message: str = ""
    gradient_max: float = 0.0

    @property
    def standard_errors(self):
        return np.sqrt(np.diag(self.covariance))

    def to_dict(self):
        return {
            "kind": "cox",
            "beta": [float(b) for b in self.beta],
            "covariance": [[float(v) for v in row] for row in self.covariance],
            "loglik_null": self.loglik_null,
            "loglik_full": self.loglik_full,
            "n": self.n,
            "n_events": self.n_events,
            "ties_method": self.ties_method,
            "converged": self.converged,
            "covariate_names": list(self.covariate_names),
            "iterations": self.iterations,
        }

    @classmethod
    def from_dict(cls, d):
        p = len(d["beta"])
        cov = d.get("covariance") or np.zeros((p, p))
        return cls(
            beta=np.asarray(d["beta"], dtype=float),
            covariance=np.asarray(cov, dtype=float).reshape(p, p),
            loglik_null=float(d.get("loglik_null", math.nan)),
            loglik_full=float(d.get("loglik_full", math.nan)),
            n=int(d.get("n", 0)),
            n_events=int(d.get("n_events", 0)),
            iterations=int(d.get("iterations", 0)),
            converged=bool(d.get("converged", True)),
            ties_method=d.get("ties_method", "efron"),
            covariate_names=tuple(d["covariate_names"]),
        )


def _collinear_columns(z, names):
    """Columns lying in the span of the remaining ones."""
    bad = []
    for j in range(z.shape[1]):
        others = np.delete(z, j, axis=1)
        if others.shape[1] == 0:
            continue
        coef, *_ = np.linalg.lstsq(others, z[:, j], rcond=None)
        resid = z[:, j] - others @ coef
        if np.linalg.norm(resid) < 1e-8 * math.sqrt(len(z)):
            bad.append(names[j])
    return bad


def cox_fit(samples, ties_method="efron", tol=GRAD_TOL, max_iter=MAX_ITER,
            divergence_bound=DIVERGENCE_BOUND):
    """Maximize the partial likelihood by Newton-Raphson from beta = 0.

    Covariates are centered and scaled internally; coefficients and the
    covariance (inverse observed information) are reported on the original
    covariate scale.

    Raises
    ------
    DegenerateDataError
        Fewer than two events, a constant column, or exactly collinear columns.
    SeparationError
        A standardized coefficient exceeds `divergence_bound` (monotone likelihood).
    """
    time, event, x = _arrays(samples)
    names = samples.covariate_names
    p = x.shape[1]
    if p == 0:
        raise DegenerateDataError("Cox model needs at least one covariate")
    n_events = int(event.sum())
    if n_events < 2:
        raise DegenerateDataError(f"Cox model needs at least two events, got {n_events}")

    center = x.mean(axis=0)
    scale = x.std(axis=0)
    constant = [names[j] for j in range(p) if not scale[j] > 1e-12 * max(1.0, abs(center[j]))]
    if constant:
        raise DegenerateDataError(f"constant column: {', '.join(constant)}", constant)
    z = (x - center) / scale
    if np.linalg.matrix_rank(z) < p:
        bad = _collinear_columns(z, names)
        raise DegenerateDataError(f"singular design, collinear columns: {', '.join(bad)}", bad)

    risk = _RiskSets(time, event, z, ties_method)
    loglik_null = risk.evaluate(np.zeros(p))[0]
    res = newton_maximize(risk.evaluate, np.zeros(p), tol=tol, max_iter=max_iter,
                          bound=divergence_bound)
    if res.message == "diverged" or information_degenerate(res.hessian):
        big = [names[j] for j in np.flatnonzero(np.abs(res.x) >= 0.5 * np.max(np.abs(res.x)))]
        raise SeparationError(
            f"coefficients diverging (monotone likelihood) for: {', '.join(big)}", big)

    try:
        cov_z = np.linalg.inv(-res.hessian)
    except np.linalg.LinAlgError:
        raise DegenerateDataError("singular information matrix at the optimum", names) from None
    cov_z = (cov_z + cov_z.T) / 2.0
    beta = res.x / scale
    cov = cov_z / np.outer(scale, scale)
    return CoxFit(
        beta=beta,
        covariance=cov,
        loglik_null=float(loglik_null),
        loglik_full=float(res.value),
        n=len(time),
        n_events=n_events,
        iterations=res.iterations,
        converged=res.converged,
        ties_method=ties_method,
        covariate_names=tuple(names),
        message=res.message,
        gradient_max=float(np.max(np.abs(res.gradient))),
    )


@dataclass(frozen=True)
class HazardRatioRow:
    variable: str
    coefficient: float
    hazard_ratio: float
    se: float
    z: float
    p_value: float
    ci_lower: float
    ci_upper: float


@dataclass(frozen=True)
class HazardRatioTable:
    rows: list

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)

    def to_csv(self):
        """Display table: 3 decimals, p-values below 0.001 shown as ``< 0.001``."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["variable", "coefficient", "hazard_ratio", "p_value", "ci_lower", "ci_upper"])
        for r in self.rows:
            writer.writerow([LABELS.get(r.variable, r.variable), f"{r.coefficient:.3f}",
                             f"{r.hazard_ratio:.3f}", format_p(r.p_value),
                             f"{r.ci_lower:.3f}", f"{r.ci_upper:.3f}"])
        return buf.getvalue()


def hazard_ratios(fit, z=Z_95):
    """Hazard ratios exp(coef) with Wald p-values and 95% limits."""
    if not fit.converged:
        raise NotConvergedError(f"fit did not converge ({fit.message or 'no diagnostics'})")
    rows = []
    for name, b, se in zip(fit.covariate_names, fit.beta, fit.standard_errors):
        b, se = float(b), float(se)
        zstat = b / se if se > 0 else math.inf
        p = float(2.0 * stats.norm.sf(abs(zstat)))
        rows.append(HazardRatioRow(name, b, math.exp(b), se, zstat, p,
                                   math.exp(b - z * se), math.exp(b + z * se)))
    return HazardRatioTable(rows)


@dataclass(frozen=True)
class BaselineHazard:
    """Breslow cumulative baseline hazard (covariates all zero)."""

    times: np.ndarray
    increments: np.ndarray

    @property
    def cumulative(self):
        return np.cumsum(self.increments)

    def __call__(self, t):
        k = np.searchsorted(self.times, t, side="right")
        return float(self.cumulative[k - 1]) if k > 0 else 0.0


def breslow_baseline(fit, samples):
    if not fit.converged:
        raise NotConvergedError("baseline hazard needs a converged fit")
    time, event, x = _arrays(samples)
    eta = x @ fit.beta
    shift = float(np.max(eta)) if len(eta) else 0.0
    w = np.exp(eta - shift)
    order = np.argsort(time, kind="mergesort")
    t_sorted, w_sorted, e_sorted = time[order], w[order], event[order]
    ev_times, deaths = np.unique(t_sorted[e_sorted == 1], return_counts=True)
    if len(ev_times) == 0:
        return BaselineHazard(np.empty(0), np.empty(0))
    s0 = np.cumsum(w_sorted[::-1])[::-1]
    risk = s0[np.searchsorted(t_sorted, ev_times, side="left")]
    return BaselineHazard(ev_times, deaths / risk * math.exp(-shift))


@dataclass(frozen=True)
class TestResult:
    statistic: float
    df: int
    p_value: float
    available: bool = True
    reason: str = ""

    def to_dict(self):
        if not self.available:
            return {"statistic": None, "df": self.df, "p_value": None, "reason": self.reason}
        return {"statistic": self.statistic, "df": self.df, "p_value": self.p_value}


@dataclass(frozen=True)
class GofReport:
    likelihood_ratio: TestResult
    wald: TestResult
    score: TestResult

    def to_dict(self):
        return {"likelihood_ratio": self.likelihood_ratio.to_dict(),
                "wald": self.wald.to_dict(),
                "score": self.score.to_dict()}


def _chi2_result(stat, df):
    stat = max(float(stat), 0.0)
    return TestResult(stat, df, float(stats.chi2.sf(stat, df)))


def gof_tests(fit, samples):
    """Likelihood-ratio, Wald and score tests of beta = 0, each on p df."""
    if not fit.converged:
        raise NotConvergedError("goodness-of-fit tests need a converged fit")
    p = len(fit.beta)
    lr = _chi2_result(2.0 * (fit.loglik_full - fit.loglik_null), p)
    try:
        wald_stat = float(fit.beta @ np.linalg.solve(fit.covariance, fit.beta))
        wald = _chi2_result(wald_stat, p)
    except np.linalg.LinAlgError:
        wald = TestResult(math.nan, p, math.nan, False, "singular covariance")

    time, event, x = _arrays(samples)
    scale = x.std(axis=0)
    scale[scale == 0] = 1.0
    z = (x - x.mean(axis=0)) / scale
    _, u, h = _RiskSets(time, event, z, fit.ties_method).evaluate(np.zeros(p))
    info = -h
    try:
        if np.linalg.matrix_rank(info) < p:
            raise np.linalg.LinAlgError
        score = _chi2_result(float(u @ np.linalg.solve(info, u)), p)
    except np.linalg.LinAlgError:
        score = TestResult(math.nan, p, math.nan, False, "singular information at beta = 0")
    return GofReport(lr, wald, score)


def predict_risk(fit, covariate_vector):
    """Linear predictor and relative hazard exp(linear predictor)."""
    x = np.asarray(covariate_vector, dtype=float).reshape(-1)
    if len(x) != len(fit.beta):
        raise DomainError(f"covariate vector has length {len(x)}, model expects {len(fit.beta)}")
    lp = float(np.dot(fit.beta, x))
    return lp, math.exp(lp)
