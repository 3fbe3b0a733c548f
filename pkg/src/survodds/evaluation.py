"""Discrimination (Harrell's C) and information-criterion model ranking."""

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateDataError, DomainError
from .parametric import information_criteria


@dataclass(frozen=True)
class ConcordanceResult:
    c_index: float
    concordant: int
    discordant: int
    tied_risk: int
    comparable_pairs: int

    def to_dict(self):
        return dict(self.__dict__)


def concordance_index(times, events, risk_scores):
    """Harrell's concordance index.

    A pair is comparable when the subject with the shorter time had an
    event. Equal times count only when exactly one of the two is an event,
    the event subject being taken as earlier. The pair is concordant when
    the earlier subject has the higher risk score; equal scores count 1/2.
    """
    t = np.asarray(times, dtype=float).reshape(-1)
    e = np.asarray(events, dtype=int).reshape(-1)
    r = np.asarray(risk_scores, dtype=float).reshape(-1)
    if not len(t) == len(e) == len(r):
        raise DomainError("times, events and risk_scores must have equal length")

    concordant = discordant = tied = 0
    for i in np.flatnonzero(e == 1):
        later = (t > t[i]) | ((t == t[i]) & (e == 0))
        others = r[later]
        concordant += int(np.sum(r[i] > others))
        discordant += int(np.sum(r[i] < others))
        tied += int(np.sum(r[i] == others))
    pairs = concordant + discordant + tied
    if pairs == 0:
        raise DegenerateDataError("no comparable pairs")
    return ConcordanceResult((concordant + 0.5 * tied) / pairs, concordant, discordant, tied, pairs)


@dataclass(frozen=True)
class RankedModel:
    label: str
    loglik: float
    k: int
    n: int
    aic: float
    bic: float
    delta_aic: float
    rank: int
    bic_rank: int
    note: str = ""


RANKING_COLUMNS = ("label", "loglik", "k", "aic", "bic", "delta_aic", "rank", "bic_rank", "note")


def compare_models(models):
    """Rank ``(label, loglik, k, n[, note])`` entries by AIC, ascending.

    Ties in AIC are broken by label so the ordering never depends on input
    order. ``bic_rank`` uses the same tie rule on BIC.
    """
    entries = [tuple(m) for m in models]
    if not entries:
        raise DomainError("need at least one model to compare")
    ns = {int(m[3]) for m in entries}
    if len(ns) > 1:
        raise DomainError(f"models fitted on different sample sizes {sorted(ns)}; BIC not comparable")
    scored = []
    for m in entries:
        label, ll, k, n = m[:4]
        note = m[4] if len(m) > 4 else ""
        aic, bic = information_criteria(float(ll), int(k), int(n))
        scored.append((str(label), float(ll), int(k), int(n), aic, bic, note))
    by_aic = sorted(range(len(scored)), key=lambda i: (_key(scored[i][4]), scored[i][0], i))
    by_bic = sorted(range(len(scored)), key=lambda i: (_key(scored[i][5]), scored[i][0], i))
    bic_rank = {idx: pos + 1 for pos, idx in enumerate(by_bic)}
    best = scored[by_aic[0]][4]
    out = []
    for pos, idx in enumerate(by_aic):
        label, ll, k, n, aic, bic, note = scored[idx]
        out.append(RankedModel(label, ll, k, n, aic, bic, aic - best, pos + 1, bic_rank[idx], note))
    return out


def _key(x):
    return math.inf if math.isnan(x) else x


def ranking_to_csv(ranking):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RANKING_COLUMNS)
    for m in ranking:
        writer.writerow([m.label, repr(m.loglik), m.k, repr(m.aic), repr(m.bic),
                         repr(m.delta_aic), m.rank, m.bic_rank, m.note])
    return buf.getvalue()
