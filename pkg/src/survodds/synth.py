"""Seeded synthetic cohorts with known proportional-hazards ground truth.

Every subject ``i`` draws from its own PCG64 stream seeded by
``SeedSequence(seed, spawn_key=(i,))``, so a cohort does not depend on
generation order and can be produced in parallel chunks.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import BINARY_COLUMNS, COVARIATES, PatientRecord, SurvivalData
from .exceptions import ConfigurationError

BASELINES = ("exponential", "weibull", "loglogistic")
CENSORING = ("none", "uniform", "exponential")

# Used in record mode for any schema field the spec leaves unspecified.
DEFAULT_GENERATORS = {
    "age_years": {"dist": "uniform", "lo": 40.0, "hi": 80.0},
    "tumor_size_mm": {"dist": "uniform", "lo": 10.0, "hi": 50.0},
    **{name: {"dist": "bernoulli", "p": 0.5} for name in BINARY_COLUMNS},
    "mastectomy_flag": {"dist": "bernoulli", "p": 0.5},
}

_HALF_ULP = 2.0 ** -54


@dataclass(frozen=True)
class SynthSpec:
    n: int
    true_beta: dict = field(default_factory=dict)
    baseline: dict = field(default_factory=lambda: {"family": "exponential", "lambda": 1.0})
    censoring: dict = field(default_factory=lambda: {"kind": "none"})
    covariates: dict = field(default_factory=dict)
    seed: int = 0
    other_cause_fraction: float = 0.0
    mode: str = "records"

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, int) or self.n < 1:
            raise ConfigurationError("n must be a positive integer")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2 ** 64:
            raise ConfigurationError("seed must be an integer in [0, 2**64)")
        if self.mode not in ("records", "abstract"):
            raise ConfigurationError("mode must be 'records' or 'abstract'")
        fam = self.baseline.get("family")
        if fam not in BASELINES:
            raise ConfigurationError(f"baseline family must be one of {BASELINES}")
        if not self.baseline.get("lambda", 0) > 0:
            raise ConfigurationError("baseline lambda must be positive")
        if fam != "exponential" and not self.baseline.get("gamma", 0) > 0:
            raise ConfigurationError("baseline gamma must be positive")
        kind = self.censoring.get("kind")
        if kind not in CENSORING:
            raise ConfigurationError(f"censoring kind must be one of {CENSORING}")
        if kind == "uniform" and not self.censoring.get("max", 0) > 0:
            raise ConfigurationError("uniform censoring needs max > 0")
        if kind == "exponential" and not self.censoring.get("rate", 0) > 0:
            raise ConfigurationError("exponential censoring needs rate > 0")
        if not 0.0 <= self.other_cause_fraction <= 1.0:
            raise ConfigurationError("other_cause_fraction must lie in [0, 1]")
        for name, gen in self.covariates.items():
            _check_generator(name, gen, self.mode)
        for name in self.true_beta:
            if self.mode == "abstract" and name not in self.covariates:
                raise ConfigurationError(f"true_beta names unknown covariate {name!r}")
            if self.mode == "records" and name not in COVARIATES:
                raise ConfigurationError(f"true_beta names unknown covariate {name!r}")

    @property
    def covariate_names(self):
        if self.mode == "records":
            return COVARIATES
        return tuple(self.covariates)

    def generator(self, name):
        gen = self.covariates.get(name)
        return gen if gen is not None else DEFAULT_GENERATORS[name]

    def beta_vector(self):
        return np.array([float(self.true_beta.get(n, 0.0)) for n in self.covariate_names])

    def to_dict(self):
        return {
            "n": self.n,
            "true_beta": dict(self.true_beta),
            "baseline": dict(self.baseline),
            "censoring": dict(self.censoring),
            "covariates": {k: dict(v) for k, v in self.covariates.items()},
            "seed": self.seed,
            "other_cause_fraction": self.other_cause_fraction,
            "mode": self.mode,
        }

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigurationError("synth spec must be a JSON object")
        known = {"n", "true_beta", "baseline", "censoring", "covariates", "seed",
                 "other_cause_fraction", "mode"}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown synth spec keys: {', '.join(sorted(unknown))}")
        if "n" not in d:
            raise ConfigurationError("synth spec needs n")
        return cls(**d)


def _check_generator(name, gen, mode):
    if mode == "records" and name not in COVARIATES:
        raise ConfigurationError(f"unknown covariate {name!r}")
    dist = gen.get("dist")
    if dist == "bernoulli":
        if not 0.0 <= gen.get("p", -1) <= 1.0:
            raise ConfigurationError(f"{name}: bernoulli p must lie in [0, 1]")
        if mode == "records" and name in ("age_years", "tumor_size_mm"):
            raise ConfigurationError(f"{name} must use a uniform generator")
    elif dist == "uniform":
        lo, hi = gen.get("lo"), gen.get("hi")
        if lo is None or hi is None or not lo < hi:
            raise ConfigurationError(f"{name}: uniform needs lo < hi")
        if mode == "records":
            if name not in ("age_years", "tumor_size_mm"):
                raise ConfigurationError(f"{name} is binary and needs a bernoulli generator")
            upper = 130.0 if name == "age_years" else 500.0
            if lo <= 0 or hi >= upper:
                raise ConfigurationError(f"{name}: uniform range outside (0, {upper:g})")
    else:
        raise ConfigurationError(f"{name}: unknown distribution {dist!r}")


def _draw_covariate(gen, u):
    if gen["dist"] == "bernoulli":
        return 1.0 if u < gen["p"] else 0.0
    return gen["lo"] + (gen["hi"] - gen["lo"]) * u


def inverse_baseline(baseline, u):
    """Time t with baseline survival S0(t) = u, for u in (0, 1]."""
    lam = baseline["lambda"]
    fam = baseline["family"]
    if fam == "exponential":
        return -lam * math.log(u)
    gamma = baseline["gamma"]
    if fam == "weibull":
        return lam * (-math.log(u)) ** (1.0 / gamma)
    return lam * ((1.0 - u) / u) ** (1.0 / gamma)


def _subject(spec, index, names, beta):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(spec.seed, spawn_key=(index,))))
    u = rng.random(len(names) + 3) + _HALF_ULP  # strictly inside (0, 1)
    x = np.array([_draw_covariate(spec.generator(nm), u[j]) for j, nm in enumerate(names)])
    lp = float(x @ beta)
    # S(t | x) = S0(t) ** exp(lp)  =>  S0(t) = u ** exp(-lp)
    t_event = inverse_baseline(spec.baseline, u[len(names)] ** math.exp(-lp))
    kind = spec.censoring["kind"]
    u_c = u[len(names) + 1]
    if kind == "none":
        t_cens = math.inf
    elif kind == "uniform":
        t_cens = spec.censoring["max"] * u_c
    else:
        t_cens = -math.log(u_c) / spec.censoring["rate"]
    event = t_event <= t_cens
    t_obs = t_event if event else t_cens
    if not t_obs > 0:
        t_obs = 5e-324
    other = event and u[len(names) + 2] < spec.other_cause_fraction
    return x, t_obs, int(event), other


def generate_cohort(spec):
    """Draw a cohort: records in ``records`` mode, :class:`SurvivalData` in ``abstract`` mode.

    Event times come from inverse-transform sampling of the baseline
    survival raised to ``exp(beta . x)``; censoring is independent; the
    observed time is the minimum of the two.
    """
    names = spec.covariate_names
    beta = spec.beta_vector()
    rows = [_subject(spec, i, names, beta) for i in range(spec.n)]
    width = len(str(spec.n - 1))
    ids = tuple(f"S{i:0{width}d}" for i in range(spec.n))

    if spec.mode == "abstract":
        x = np.array([r[0] for r in rows]).reshape(spec.n, len(names))
        return SurvivalData(np.array([r[1] for r in rows]), np.array([r[2] for r in rows]),
                            x, names, ids)

    records = []
    for rid, (x, t, event, other) in zip(ids, rows):
        vals = dict(zip(names, x))
        outcome = "alive" if not event else ("died_other" if other else "died_breast_cancer")
        records.append(PatientRecord(
            id=rid,
            age_years=float(vals["age_years"]),
            tumor_size_mm=float(vals["tumor_size_mm"]),
            er_status=int(vals["er_status"]),
            her2_status=int(vals["her2_status"]),
            hormone_therapy=int(vals["hormone_therapy"]),
            radiotherapy=int(vals["radiotherapy"]),
            chemotherapy=int(vals["chemotherapy"]),
            surgery="mastectomy" if vals["mastectomy_flag"] else "breast_conserving",
            survival_months=float(t),
            outcome=outcome,
        ))
    return records
