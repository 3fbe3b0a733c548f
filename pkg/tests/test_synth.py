import math

import numpy as np
import pytest
from scipy import stats

from survodds.dataset import apply_event_policy, summarize, write_cohort
from survodds.exceptions import ConfigurationError
from survodds.synth import SynthSpec, generate_cohort, inverse_baseline


def test_no_censoring_all_events():
    recs = generate_cohort(SynthSpec(n=50, seed=1))
    assert all(r.outcome != "alive" for r in recs)


def test_exp1_mean():
    data = generate_cohort(SynthSpec(n=10000, seed=2, mode="abstract"))
    assert data.time.mean() == pytest.approx(1.0, abs=0.05)


def test_same_seed_identical():
    spec = SynthSpec(n=200, seed=42, true_beta={"age_years": 0.03},
                     censoring={"kind": "uniform", "max": 5.0})
    assert write_cohort(generate_cohort(spec)) == write_cohort(generate_cohort(spec))
    other = SynthSpec(**{**spec.to_dict(), "seed": 43})
    assert write_cohort(generate_cohort(spec)) != write_cohort(generate_cohort(other))


def test_subject_streams_independent_of_n():
    small = generate_cohort(SynthSpec(n=10, seed=5, mode="abstract"))
    large = generate_cohort(SynthSpec(n=100, seed=5, mode="abstract"))
    assert np.array_equal(small.time, large.time[:10])


@pytest.mark.parametrize("family,gamma", [("exponential", 1.0), ("weibull", 2.0), ("loglogistic", 1.5)])
def test_ks_distance(family, gamma):
    base = {"family": family, "lambda": 2.0, "gamma": gamma}
    t = generate_cohort(SynthSpec(n=10000, seed=3, mode="abstract", baseline=base)).time
    u = np.linspace(0.001, 0.999, 50)
    assert np.all(np.diff([inverse_baseline(base, v) for v in u]) < 0)
    if family == "loglogistic":
        cdf = lambda x: 1 - 1 / (1 + (x / 2.0) ** gamma)
    else:
        cdf = lambda x: 1 - np.exp(-(x / 2.0) ** gamma)
    assert stats.kstest(t, cdf).statistic < 0.02


def test_censoring_fraction_closed_form():
    lam, rate = 10.0, 0.05
    spec = SynthSpec(n=5000, seed=4, mode="abstract", baseline={"family": "exponential", "lambda": lam},
                     censoring={"kind": "exponential", "rate": rate})
    data = generate_cohort(spec)
    expected = rate / (rate + 1 / lam)
    assert 1 - data.event.mean() == pytest.approx(expected, abs=0.03)


def test_invalid_specs():
    with pytest.raises(ConfigurationError):
        SynthSpec(n=0)
    with pytest.raises(ConfigurationError):
        SynthSpec.from_dict({"n": 5, "colour": "red"})
    with pytest.raises(ConfigurationError):
        SynthSpec(n=5, covariates={"her2_status": {"dist": "uniform", "lo": 0, "hi": 1}})
    with pytest.raises(ConfigurationError):
        SynthSpec(n=5, censoring={"kind": "uniform"})


def test_marginals_reproduced():
    rates = {"er_status": 0.77, "her2_status": 0.20, "hormone_therapy": 0.5, "radiotherapy": 0.49,
             "chemotherapy": 0.21, "mastectomy_flag": 0.62}
    covs = {k: {"dist": "bernoulli", "p": p} for k, p in rates.items()}
    covs["age_years"] = {"dist": "uniform", "lo": 40.0, "hi": 80.0}
    recs = generate_cohort(SynthSpec(n=3000, seed=8, covariates=covs, other_cause_fraction=0.4,
                                     censoring={"kind": "uniform", "max": 3.0}))
    assert {r.outcome for r in recs} == {"alive", "died_breast_cancer", "died_other"}
    summary = summarize(recs)
    assert len(summary.group_sizes) == 3
    n = len(recs)
    for name, p in rates.items():
        observed = np.mean([r.value(name) for r in recs])
        assert abs(observed - p) < 4 * math.sqrt(p * (1 - p) / n)
    ages = np.array([r.age_years for r in recs])
    assert np.median(ages) == pytest.approx(60.0, abs=1.5)
    assert len(apply_event_policy(recs)) == n
