import numpy as np
import pytest

from survodds.dataset import PatientRecord, SurvivalData


def make_record(id="P1", age_years=60.0, tumor_size_mm=20.0, er_status=1, her2_status=0,
                hormone_therapy=0, radiotherapy=0, chemotherapy=0, surgery="breast_conserving",
                survival_months=12.0, outcome="alive"):
    return PatientRecord(id, age_years, tumor_size_mm, er_status, her2_status, hormone_therapy,
                         radiotherapy, chemotherapy, surgery, survival_months, outcome)


def random_survival(seed, n=30, p=2, distinct=False, tie_grid=None):
    """Small random censored cohort with `p` normal covariates."""
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, p))
    t = rng.exponential(10.0, size=n) * np.exp(-0.3 * x[:, 0])
    if tie_grid:
        t = np.ceil(t / tie_grid) * tie_grid
    elif distinct:
        t = t + 1e-9 * np.arange(n)
    e = (rng.random(n) < 0.7).astype(int)
    e[0] = e[1] = 1
    return SurvivalData.from_arrays(t, e, x, [f"x{j}" for j in range(p)])


@pytest.fixture
def record():
    return make_record


SYNTH_SPEC = {
    "n": 400, "seed": 42,
    "true_beta": {"age_years": 0.04, "tumor_size_mm": 0.01, "her2_status": 0.45, "chemotherapy": 0.5},
    "baseline": {"family": "weibull", "lambda": 900.0, "gamma": 1.2},
    "censoring": {"kind": "uniform", "max": 200.0},
    "covariates": {"her2_status": {"dist": "bernoulli", "p": 0.2},
                   "chemotherapy": {"dist": "bernoulli", "p": 0.25}},
    "other_cause_fraction": 0.4,
}


def run_pipeline(main, workdir, spec=SYNTH_SPEC):
    """synth, then summarize/km/cox/compare/score into one output directory."""
    import json

    workdir.mkdir(parents=True, exist_ok=True)
    spec_path = workdir / "spec.json"
    spec_path.write_text(json.dumps(spec))
    out = workdir / "out"
    cohort = str(out / "cohort.csv")
    codes = [main(["--out-dir", str(out), "synth", "--spec", str(spec_path)])]
    for cmd in (["summarize"], ["km", "--strata", "age_years", "--cut", "60"], ["cox"], ["compare"],
                ["score", "--model", str(out / "cox_fit.json"), "--patients", cohort]):
        codes.append(main(["--input", cohort, "--out-dir", str(out)] + cmd))
    return codes, out


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[key])
