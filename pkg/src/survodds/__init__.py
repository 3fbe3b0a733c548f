"""Censored time-to-event analysis for clinical cohorts.

Kaplan-Meier curves and log-rank tests, Cox regression, parametric
survival fits with AIC/BIC, concordance, and log-odds-of-survival models.
"""

from .cox import (CoxFit, breslow_baseline, cox_fit, gof_tests, hazard_ratios, partial_loglik,
                  predict_risk)
from .dataset import (EventPolicy, PatientRecord, SurvivalData, SurvivalSample, apply_event_policy,
                      design_matrix, parse_cohort, summarize, write_cohort)
from .evaluation import compare_models, concordance_index
from .km import KMCurve, km_fit, km_stratified, logrank_test, survival_at
from .logodds import (LogisticFit, binarize_outcome, log_odds_distribution, log_odds_score,
                      logistic_fit)
from .parametric import ParametricFit, fit_parametric, information_criteria, survival_function
from .synth import SynthSpec, generate_cohort

__all__ = [
    "CoxFit", "breslow_baseline", "cox_fit", "gof_tests", "hazard_ratios", "partial_loglik",
    "predict_risk", "EventPolicy", "PatientRecord", "SurvivalData", "SurvivalSample",
    "apply_event_policy", "design_matrix", "parse_cohort", "summarize", "write_cohort",
    "compare_models", "concordance_index", "KMCurve", "km_fit", "km_stratified", "logrank_test",
    "survival_at", "LogisticFit", "binarize_outcome", "log_odds_distribution", "log_odds_score",
    "logistic_fit", "ParametricFit", "fit_parametric", "information_criteria", "survival_function",
    "SynthSpec", "generate_cohort",
]
