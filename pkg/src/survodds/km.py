"""Kaplan-Meier product-limit estimation and the log-rank test."""

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .exceptions import ConfigurationError, DegenerateDataError, DomainError

Z_95 = 1.96
CURVE_COLUMNS = ("time", "at_risk", "deaths", "survival", "se", "ci_lower", "ci_upper")


def _time_event(samples):
    if isinstance(samples, tuple) and len(samples) == 2:
        time, event = samples
    else:
        time, event = samples.time, samples.event
    time = np.asarray(time, dtype=float).reshape(-1)
    event = np.asarray(event, dtype=int).reshape(-1)
    if len(time) != len(event):
        raise DomainError("time and event must have the same length")
    if np.any(time <= 0):
        raise DomainError("survival times must be positive")
    return time, event


@dataclass(frozen=True)
class KMCurve:
    """Product-limit survival estimate evaluated at the distinct event times.

    ``se_greenwood`` is NaN once the risk set has been exhausted by a final
    event (the estimate is exactly 0 there and Greenwood's sum diverges).
    """

    event_times: np.ndarray
    survival: np.ndarray
    at_risk: np.ndarray
    deaths: np.ndarray
    se_greenwood: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    n: int
    n_events: int
    last_time: float

    def __len__(self):
        return len(self.event_times)

    def rows(self):
        for k in range(len(self)):
            yield {
                "time": float(self.event_times[k]),
                "at_risk": int(self.at_risk[k]),
                "deaths": int(self.deaths[k]),
                "survival": float(self.survival[k]),
                "se": _maybe(self.se_greenwood[k]),
                "ci_lower": float(self.ci_lower[k]),
                "ci_upper": float(self.ci_upper[k]),
            }

    def to_dict(self):
        return {key: [row[key] for row in self.rows()] for key in CURVE_COLUMNS}

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CURVE_COLUMNS)
        for row in self.rows():
            writer.writerow(["" if row[c] is None else repr(row[c]) for c in CURVE_COLUMNS])
        return buf.getvalue()


def _maybe(x):
    x = float(x)
    return None if math.isnan(x) else x


def km_fit(samples, z=Z_95):
    """Kaplan-Meier estimate with Greenwood standard errors.

    Confidence limits use the complementary log-log transform, so they stay
    inside [0, 1]. Subjects censored at an event time are counted in that
    time's risk set (events are processed before censorings).

    Parameters
    ----------
    samples : SurvivalData or (time, event) tuple
    z : float
        Normal quantile for the pointwise band.
    """
    time, event = _time_event(samples)
    if len(time) == 0:
        raise DegenerateDataError("cannot fit a survival curve to zero samples")
    order = np.argsort(time, kind="mergesort")
    time, event = time[order], event[order]
    uniq, first = np.unique(time, return_index=True)
    at_risk_all = len(time) - first
    deaths_all = np.add.reduceat(event, first)
    keep = deaths_all > 0
    t = uniq[keep]
    n_i = at_risk_all[keep].astype(int)
    d_i = deaths_all[keep].astype(int)

    survival = np.cumprod(1.0 - d_i / n_i)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(n_i > d_i, d_i / (n_i * (n_i - d_i).astype(float)), np.inf)
    greenwood = np.cumsum(terms)
    finite = np.isfinite(greenwood)
    se = np.full(len(t), np.nan)
    se[finite] = survival[finite] * np.sqrt(greenwood[finite])

    lower = np.zeros(len(t))
    upper = np.zeros(len(t))
    inside = finite & (survival > 0) & (survival < 1)
    log_s = np.log(survival[inside])
    sigma = np.sqrt(greenwood[inside]) / np.abs(log_s)
    lower[inside] = survival[inside] ** np.exp(z * sigma)
    upper[inside] = survival[inside] ** np.exp(-z * sigma)
    exact_one = finite & (survival >= 1)
    lower[exact_one] = upper[exact_one] = 1.0

    return KMCurve(t, survival, n_i, d_i, se, np.clip(lower, 0, 1), np.clip(upper, 0, 1),
                   len(time), int(event.sum()), float(time[-1]))


def survival_at(curve, t, with_flag=False):
    """Right-continuous evaluation of the step function.

    With ``with_flag=True`` returns ``(value, extrapolated)`` where
    ``extrapolated`` marks times past the last observed follow-up.
    """
    if t < 0 or math.isnan(t):
        raise DomainError("t must be nonnegative")
    k = np.searchsorted(curve.event_times, t, side="right")
    value = 1.0 if k == 0 else float(curve.survival[k - 1])
    if with_flag:
        return value, bool(t > curve.last_time)
    return value


class StratifiedCurves(dict):
    """Mapping group -> KMCurve; ``omitted`` lists requested groups with no members."""

    def __init__(self, curves, omitted=()):
        super().__init__(curves)
        self.omitted = list(omitted)


def _group_order(labels, groups):
    if groups is not None:
        return list(groups)
    return sorted(set(labels), key=lambda g: (str(type(g)), g if isinstance(g, (int, float)) else str(g)))


def km_stratified(samples, group_labels, groups=None, z=Z_95):
    """Fit one curve per group. Requested groups with no members are omitted and reported."""
    time, event = _time_event(samples)
    labels = list(group_labels)
    if len(labels) != len(time):
        raise DomainError("need exactly one group label per sample")
    labels_arr = np.array(labels, dtype=object)
    curves, omitted = {}, []
    for g in _group_order(labels, groups):
        mask = labels_arr == g
        if not mask.any():
            omitted.append(g)
            continue
        curves[g] = km_fit((time[mask], event[mask]), z=z)
    return StratifiedCurves(curves, omitted)


@dataclass(frozen=True)
class LogRankResult:
    chi_square: float
    degrees_of_freedom: int
    p_value: float
    groups: list
    observed: np.ndarray
    expected: np.ndarray
    variance: np.ndarray = field(repr=False)

    def to_dict(self):
        return {
            "chi_square": self.chi_square,
            "degrees_of_freedom": self.degrees_of_freedom,
            "p_value": self.p_value,
            "groups": [str(g) for g in self.groups],
            "observed": [float(x) for x in self.observed],
            "expected": [float(x) for x in self.expected],
        }


def logrank_test(samples, group_labels):
    """k-sample log-rank test.

    Observed-minus-expected event counts per group are accumulated over
    the distinct event times and normalized by the hypergeometric
    covariance; the statistic is chi-square with ``groups - 1`` df.
    """
    time, event = _time_event(samples)
    labels = list(group_labels)
    if len(labels) != len(time):
        raise DomainError("need exactly one group label per sample")
    groups = _group_order(labels, None)
    if len(groups) < 2:
        raise ConfigurationError("log-rank test needs at least two nonempty groups")
    if event.sum() == 0:
        raise DegenerateDataError("log-rank statistic undefined without events")

    labels_arr = np.array(labels, dtype=object)
    event_times = np.unique(time[event == 1])
    at_risk = np.empty((len(groups), len(event_times)))
    deaths = np.empty((len(groups), len(event_times)))
    for a, g in enumerate(groups):
        mask = labels_arr == g
        t_g = np.sort(time[mask])
        e_g = np.sort(time[mask & (event == 1)])
        at_risk[a] = len(t_g) - np.searchsorted(t_g, event_times, side="left")
        deaths[a] = (np.searchsorted(e_g, event_times, side="right")
                     - np.searchsorted(e_g, event_times, side="left"))
    n_t = at_risk.sum(axis=0)
    d_t = deaths.sum(axis=0)

    observed = deaths.sum(axis=1)
    expected = (at_risk * (d_t / n_t)).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(n_t > 1, d_t * (n_t - d_t) / (n_t - 1.0), 0.0)
    frac = at_risk / n_t
    k = len(groups)
    variance = np.empty((k, k))
    for a in range(k):
        for b in range(k):
            delta = 1.0 if a == b else 0.0
            variance[a, b] = np.sum(factor * frac[a] * (delta - frac[b]))

    diff = (observed - expected)[: k - 1]
    v = variance[: k - 1, : k - 1]
    chi_square = float(diff @ np.linalg.pinv(v) @ diff)
    chi_square = max(chi_square, 0.0)
    df = k - 1
    p_value = float(stats.chi2.sf(chi_square, df))
    return LogRankResult(chi_square, df, p_value, groups, observed, expected, variance)
