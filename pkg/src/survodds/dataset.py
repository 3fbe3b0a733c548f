"""Cohort file parsing, event policies, design matrices and group summaries."""

import csv
import enum
import io
import math
from dataclasses import dataclass, field, fields
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy import stats

from .exceptions import ConfigurationError, DomainError, ParseError, SchemaError

COLUMNS = (
    "id",
    "age_years",
    "tumor_size_mm",
    "er_status",
    "her2_status",
    "hormone_therapy",
    "radiotherapy",
    "chemotherapy",
    "surgery",
    "survival_months",
    "outcome",
)

BINARY_COLUMNS = ("er_status", "her2_status", "hormone_therapy", "radiotherapy", "chemotherapy")
REQUIRED_CELLS = ("id", "survival_months", "outcome")

SURGERY_VALUES = ("mastectomy", "breast_conserving", "none")
OUTCOMES = ("died_breast_cancer", "died_other", "alive")

# Modeling covariates, in hazard-ratio table row order.
COVARIATES = (
    "age_years",
    "tumor_size_mm",
    "er_status",
    "her2_status",
    "hormone_therapy",
    "radiotherapy",
    "chemotherapy",
    "mastectomy_flag",
)

LABELS = {
    "age_years": "Age (years)",
    "tumor_size_mm": "Tumor size (mm)",
    "er_status": "ER status",
    "her2_status": "HER2 status",
    "hormone_therapy": "Hormone therapy",
    "radiotherapy": "Radiotherapy",
    "chemotherapy": "Chemotherapy",
    "mastectomy_flag": "Mastectomy",
}

GROUP_LABELS = {
    "died_breast_cancer": "Died of breast cancer",
    "died_other": "Died of other causes",
    "alive": "Alive",
}

_TRUE = {"1", "true", "pos", "positive"}
_FALSE = {"0", "false", "neg", "negative"}
_RANGES = {"age_years": (0.0, 130.0), "tumor_size_mm": (0.0, 500.0)}


@dataclass(frozen=True)
class PatientRecord:
    """One validated cohort row. Covariate fields are ``None`` when the cell was blank."""

    id: str
    age_years: Optional[float]
    tumor_size_mm: Optional[float]
    er_status: Optional[int]
    her2_status: Optional[int]
    hormone_therapy: Optional[int]
    radiotherapy: Optional[int]
    chemotherapy: Optional[int]
    surgery: Optional[str]
    survival_months: float
    outcome: str

    @property
    def missing(self):
        """Names of fields left blank in the source file."""
        return tuple(f.name for f in fields(self) if getattr(self, f.name) is None)

    @property
    def mastectomy_flag(self):
        if self.surgery is None:
            return None
        return int(self.surgery == "mastectomy")

    def value(self, name):
        """Look up a modeling variable, including the derived ``mastectomy_flag``."""
        if name == "mastectomy_flag":
            return self.mastectomy_flag
        return getattr(self, name)


class EventPolicy(str, enum.Enum):
    """Maps outcome classes to an event indicator."""

    OVERALL = "overall"
    CAUSE_SPECIFIC = "cause_specific"

    @classmethod
    def coerce(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).replace("-", "_").lower())
        except ValueError:
            raise ConfigurationError(f"unknown event policy {value!r}") from None

    def is_event(self, outcome):
        if self is EventPolicy.OVERALL:
            return outcome in ("died_breast_cancer", "died_other")
        return outcome == "died_breast_cancer"


class SurvivalSample(NamedTuple):
    time: float
    event: int
    covariates: tuple
    covariate_names: tuple


@dataclass(frozen=True)
class SurvivalData:
    """Column-oriented collection of :class:`SurvivalSample` rows.

    Iterating yields one ``SurvivalSample`` per subject; estimators work
    on the arrays directly.
    """

    time: np.ndarray
    event: np.ndarray
    covariates: np.ndarray
    covariate_names: tuple = ()
    ids: tuple = ()
    n_excluded: int = 0

    def __post_init__(self):
        time = np.asarray(self.time, dtype=float).reshape(-1)
        event = np.asarray(self.event, dtype=int).reshape(-1)
        cov = np.asarray(self.covariates, dtype=float)
        if cov.size == 0:
            cov = cov.reshape(len(time), len(self.covariate_names))
        if cov.ndim == 1:
            cov = cov.reshape(-1, 1)
        if len(event) != len(time) or cov.shape[0] != len(time):
            raise DomainError("time, event and covariates must have the same length")
        if cov.shape[1] != len(self.covariate_names):
            raise DomainError("covariate_names does not match the covariate matrix width")
        if np.any(time <= 0) or not np.all(np.isfinite(time)):
            raise DomainError("survival times must be positive and finite")
        if not np.all(np.isin(event, (0, 1))):
            raise DomainError("event indicators must be 0 or 1")
        ids = tuple(self.ids) if self.ids else tuple(str(i) for i in range(len(time)))
        for name, arr in (("time", time), ("event", event), ("covariates", cov)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "covariate_names", tuple(self.covariate_names))
        object.__setattr__(self, "ids", ids)

    @classmethod
    def from_arrays(cls, time, event, covariates=None, covariate_names=None, ids=()):
        time = np.asarray(time, dtype=float)
        if covariates is None:
            covariates = np.zeros((len(time), 0))
        covariates = np.asarray(covariates, dtype=float)
        if covariates.ndim == 1:
            covariates = covariates.reshape(-1, 1)
        if covariate_names is None:
            covariate_names = tuple(f"x{j}" for j in range(covariates.shape[1]))
        return cls(time, event, covariates, tuple(covariate_names), tuple(ids))

    def __len__(self):
        return len(self.time)

    def __iter__(self):
        for t, e, x in zip(self.time, self.event, self.covariates):
            yield SurvivalSample(float(t), int(e), tuple(float(v) for v in x), self.covariate_names)

    @property
    def n_events(self):
        return int(self.event.sum())

    def subset(self, mask):
        mask = np.asarray(mask)
        idx = np.flatnonzero(mask) if mask.dtype == bool else mask
        return SurvivalData(self.time[idx], self.event[idx], self.covariates[idx],
                            self.covariate_names, tuple(self.ids[i] for i in idx))

    def with_covariates(self, covariates, names):
        return SurvivalData(self.time, self.event, covariates, tuple(names), self.ids)


@dataclass(frozen=True)
class RowReject:
    row: int
    reason: str


class ParseResult(NamedTuple):
    records: list
    rejects: list


class _BadCell(Exception):
    pass


def _parse_float(text, name):
    try:
        value = float(text)
    except ValueError:
        raise _BadCell(f"{name}: cannot parse {text!r}") from None
    if not math.isfinite(value):
        raise _BadCell(f"{name}: cannot parse {text!r}")
    return value


def _parse_binary(text, name):
    key = text.strip().lower()
    if key in _TRUE:
        return 1
    if key in _FALSE:
        return 0
    raise _BadCell(f"{name}: cannot parse {text!r}")


def parse_cell(name, text):
    """Parse one raw cell; returns ``None`` for blanks. Raises ``DomainError`` when unparseable."""
    try:
        return _parse_cell(name, text)
    except _BadCell as exc:
        raise DomainError(str(exc)) from None


def _parse_cell(name, text):
    text = "" if text is None else text.strip()
    if text == "":
        return None
    if name == "id":
        return text
    if name in BINARY_COLUMNS or name == "mastectomy_flag":
        return _parse_binary(text, name)
    if name == "surgery":
        key = text.lower()
        if key not in SURGERY_VALUES:
            raise _BadCell(f"surgery: cannot parse {text!r}")
        return key
    if name == "outcome":
        key = text.lower()
        if key not in OUTCOMES:
            raise _BadCell(f"outcome: cannot parse {text!r}")
        return key
    return _parse_float(text, name)


def _check_range(name, value):
    if value is None:
        return None
    if name in _RANGES:
        lo, hi = _RANGES[name]
        if not lo < value < hi:
            return f"{name} out of range"
    if name == "survival_months":
        if value < 0:
            return "survival_months out of range"
        if value == 0:
            return "survival_months must be positive"
    return None


def parse_cohort(data, strict=False):
    """Parse a cohort CSV into validated records.

    Parameters
    ----------
    data : bytes or str
        UTF-8 CSV text whose header contains every name in ``COLUMNS``.
    strict : bool
        Reject rows with blank cells and raise :class:`ParseError` on the
        first unparseable cell. The default keeps blank covariates as
        ``None`` and rejects rows whose cells cannot be parsed.

    Returns
    -------
    ParseResult
        ``records`` in file order and ``rejects`` carrying the 1-based file
        line number and the reason.
    """
    text = data.decode("utf-8-sig") if isinstance(data, (bytes, bytearray)) else data
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None:
        raise SchemaError("empty input: header row missing")
    header = [h.strip() for h in header]
    for col in COLUMNS:
        if col not in header:
            raise SchemaError(f"missing mandatory column: {col}", column=col)
    index = {col: header.index(col) for col in COLUMNS}

    records, rejects = [], []
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) < len(header):
            row = row + [""] * (len(header) - len(row))
        values = {}
        reason = None
        for col in COLUMNS:
            try:
                values[col] = _parse_cell(col, row[index[col]])
            except _BadCell as exc:
                if strict:
                    raise ParseError(f"line {line_no}: {exc}") from None
                reason = str(exc)
                break
            if values[col] is None and (strict or col in REQUIRED_CELLS):
                reason = f"{col} missing"
                break
            reason = _check_range(col, values[col])
            if reason:
                break
        if reason:
            rejects.append(RowReject(line_no, reason))
            continue
        records.append(PatientRecord(**values))
    return ParseResult(records, rejects)


def _format_cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_cohort(records):
    """Serialize records to CSV text that :func:`parse_cohort` reads back unchanged."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for rec in records:
        writer.writerow([_format_cell(getattr(rec, col)) for col in COLUMNS])
    return buf.getvalue()


@dataclass(frozen=True)
class DesignInfo:
    names: tuple
    columns: dict
    rows: np.ndarray
    excluded: np.ndarray


def design_matrix(records, covariate_spec):
    """Encode the named covariates as a float matrix.

    Records missing any requested field are left out (complete-case);
    their positions are listed in ``info.excluded``.
    """
    names = tuple(covariate_spec)
    unknown = [n for n in names if n not in COVARIATES]
    if unknown:
        raise ConfigurationError(f"unknown covariate(s): {', '.join(unknown)}")
    if len(set(names)) != len(names):
        raise ConfigurationError("duplicate covariate in spec")
    rows, excluded, matrix = [], [], []
    for i, rec in enumerate(records):
        vals = [rec.value(n) for n in names]
        if any(v is None for v in vals):
            excluded.append(i)
            continue
        rows.append(i)
        matrix.append([float(v) for v in vals])
    x = np.asarray(matrix, dtype=float).reshape(len(rows), len(names))
    info = DesignInfo(names, {n: j for j, n in enumerate(names)},
                      np.asarray(rows, dtype=int), np.asarray(excluded, dtype=int))
    return x, info


def apply_event_policy(records, policy=EventPolicy.OVERALL, covariates=()):
    """Turn records into analysis-ready (time, event, covariates) data.

    Times pass through unchanged. Under ``overall`` any death is an event;
    under ``cause_specific`` deaths from other causes are censored at their
    death time.
    """
    policy = EventPolicy.coerce(policy)
    x, info = design_matrix(records, covariates)
    kept = [records[i] for i in info.rows]
    time = np.array([r.survival_months for r in kept], dtype=float)
    event = np.array([int(policy.is_event(r.outcome)) for r in kept], dtype=int)
    return SurvivalData(time, event, x, info.names, tuple(r.id for r in kept),
                        n_excluded=len(info.excluded))


CONTINUOUS_SUMMARY = ("age_years", "tumor_size_mm")
SUMMARY_LABELS = {
    "age_years": "Age (years)",
    "tumor_size_mm": "Tumor size (mm)",
    "er_status": "ER Positive (%)",
    "her2_status": "HER2 Positive (%)",
    "hormone_therapy": "Hormone therapy (%)",
    "radiotherapy": "Radiotherapy (%)",
    "chemotherapy": "Chemotherapy (%)",
    "mastectomy_flag": "Mastectomy (%)",
}
BINARY_SUMMARY = ("er_status", "her2_status", "hormone_therapy", "radiotherapy",
                  "chemotherapy", "mastectomy_flag")


@dataclass
class VariableSummary:
    name: str
    kind: str
    by_group: dict
    p_value: float
    test: str
    n_missing: int = 0


@dataclass
class CohortSummary:
    group_sizes: dict
    variables: list
    empty_groups: list = field(default_factory=list)

    @property
    def n(self):
        return sum(self.group_sizes.values())

    def table(self):
        """Rows of display strings laid out as an outcome-group comparison table."""
        groups = [g for g in OUTCOMES if g not in self.empty_groups]
        header = ["Variable"] + [f"{GROUP_LABELS[g]} (n = {self.group_sizes[g]})" for g in groups]
        header.append("P-value")
        rows = [header]
        for var in self.variables:
            cells = [SUMMARY_LABELS[var.name]]
            for g in groups:
                s = var.by_group.get(g)
                if s is None:
                    cells.append("")
                elif var.kind == "continuous":
                    cells.append(f"{fmt_number(s['median'])} ({fmt_number(s['q1'])} - {fmt_number(s['q3'])})")
                else:
                    cells.append(f"{fmt_number(100.0 * s['proportion'])}%")
            cells.append(format_p(var.p_value))
            rows.append(cells)
        return rows

    def to_dict(self):
        return {
            "n": self.n,
            "group_sizes": dict(self.group_sizes),
            "empty_groups": list(self.empty_groups),
            "variables": [
                {"name": v.name, "kind": v.kind, "test": v.test, "p_value": _json_float(v.p_value),
                 "n_missing": v.n_missing,
                 "by_group": {g: {k: _json_float(x) for k, x in s.items()} for g, s in v.by_group.items()}}
                for v in self.variables
            ],
        }


def _json_float(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def fmt_number(x):
    """One decimal place at most, trailing zero dropped: 62.0 -> '62', 4.44 -> '4.4'."""
    text = f"{x:.1f}"
    if text.endswith(".0"):
        text = text[:-2]
    return "0" if text == "-0" else text


def format_p(p):
    if p is None or (isinstance(p, float) and math.isnan(p)):
        return "NA"
    if p < 0.001:
        return "< 0.001"
    return f"{p:.3f}"


def quartiles(values):
    """Median and type-7 (linear interpolation) quartiles."""
    q1, med, q3 = np.percentile(np.asarray(values, dtype=float), [25, 50, 75])
    return float(med), float(q1), float(q3)


def _kruskal_p(samples):
    pooled = np.concatenate(samples)
    if np.all(pooled == pooled[0]):
        return 1.0
    return float(stats.kruskal(*samples).pvalue)


def _chi_square_p(samples):
    table = np.array([[np.sum(s == 1), np.sum(s == 0)] for s in samples], dtype=float)
    if np.any(table.sum(axis=0) == 0):
        return 1.0
    return float(stats.chi2_contingency(table, correction=False)[1])


def summarize(records: Sequence[PatientRecord]) -> CohortSummary:
    """Per-outcome-group summaries with cross-group p-values.

    Continuous variables get median (Q1 - Q3) and a Kruskal-Wallis test;
    binary ones get the proportion positive and a Pearson chi-square test.
    All groups present are compared jointly.
    """
    groups = {g: [r for r in records if r.outcome == g] for g in OUTCOMES}
    sizes = {g: len(rs) for g, rs in groups.items()}
    empty = [g for g in OUTCOMES if sizes[g] == 0]
    variables = []
    for name in CONTINUOUS_SUMMARY + BINARY_SUMMARY:
        kind = "continuous" if name in CONTINUOUS_SUMMARY else "binary"
        by_group, samples, n_missing = {}, [], 0
        for g in OUTCOMES:
            vals = [r.value(name) for r in groups[g]]
            present = np.array([v for v in vals if v is not None], dtype=float)
            n_missing += len(vals) - len(present)
            if len(present) == 0:
                continue
            samples.append(present)
            if kind == "continuous":
                med, q1, q3 = quartiles(present)
                by_group[g] = {"n": len(present), "median": med, "q1": q1, "q3": q3}
            else:
                by_group[g] = {"n": len(present), "proportion": float(present.mean())}
        if len(samples) < 2:
            p, test = float("nan"), "none"
        elif kind == "continuous":
            p, test = _kruskal_p(samples), "kruskal-wallis"
        else:
            p, test = _chi_square_p(samples), "pearson-chi-square"
        variables.append(VariableSummary(name, kind, by_group, p, test, n_missing))
    return CohortSummary(sizes, variables, empty)
