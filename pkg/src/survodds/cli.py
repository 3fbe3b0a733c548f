"""Command-line pipeline: summarize, km, cox, compare, logodds, score, synth.

Exit codes: 0 success, 2 input/schema/configuration error, 3 empty or
degenerate data, 4 convergence failure, 5 model/patient covariate mismatch.
"""

import argparse
import csv
import hashlib
import io
import json
import math
import platform
import sys
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np
from scipy.special import expit

from . import svg
from .cox import CoxFit, breslow_baseline, cox_fit, gof_tests, hazard_ratios, predict_risk
from .dataset import (COVARIATES, LABELS, EventPolicy, apply_event_policy, parse_cell,
                      parse_cohort, summarize, write_cohort)
from .evaluation import compare_models, concordance_index, ranking_to_csv
from .exceptions import (ConfigurationError, DegenerateDataError, DomainError, NotConvergedError,
                         ParseError, SchemaError, SeparationError, SurvivalError)
from .km import km_stratified, logrank_test, survival_at
from .logodds import (DEFAULT_HORIZON, LogisticFit, fit_log_odds, histogram, log_odds_distribution,
                      log_odds_score)
from .parametric import FAMILIES, fit_parametric, information_criteria
from .synth import SynthSpec, generate_cohort

EXIT_OK, EXIT_INPUT, EXIT_EMPTY, EXIT_CONVERGENCE, EXIT_MISMATCH = 0, 2, 3, 4, 5
DEFAULT_LOGODDS_COVARIATES = ("age_years", "tumor_size_mm", "her2_status")
DEFAULT_CUT_RULE = {"age_years": "lt"}


class CommandError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


@dataclass
class RunConfig:
    command: str
    input: str = None
    policy: EventPolicy = EventPolicy.OVERALL
    out_dir: Path = Path("out")
    figures: bool = True
    strict: bool = False
    covariates: tuple = COVARIATES
    ties: str = "efron"
    horizon: float = DEFAULT_HORIZON
    seed: int = None
    options: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)

    def write(self, name, text):
        path = self.out_dir / name
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        self.outputs.append(name)
        return path


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def dumps(obj):
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _rows_to_csv(rows):
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _read_bytes(path):
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise CommandError(f"cannot read {path}: {exc.strerror}", EXIT_INPUT) from None


def _load_records(cfg):
    if not cfg.input:
        raise CommandError("--input is required for this command", EXIT_INPUT)
    result = parse_cohort(_read_bytes(cfg.input), strict=cfg.strict)
    for rej in result.rejects:
        print(f"warning: line {rej.row} rejected: {rej.reason}", file=sys.stderr)
    cfg.options["rejected_rows"] = len(result.rejects)
    if not result.records:
        raise CommandError("cohort is empty after parsing", EXIT_EMPTY)
    return result.records


def _fmt3(x):
    return f"{x:.3f}"


def cmd_summarize(cfg):
    records = _load_records(cfg)
    summary = summarize(records)
    for g in summary.empty_groups:
        print(f"note: outcome group {g} has no records and is left out of comparisons", file=sys.stderr)
    cfg.write("summary.csv", _rows_to_csv(summary.table()))
    cfg.write("summary.json", dumps(summary.to_dict()))


def _strata(records, variable, cut, rule):
    if variable in ("age_years", "tumor_size_mm", "survival_months"):
        if cut is None:
            raise CommandError(f"numeric strata variable {variable} needs --cut", EXIT_INPUT)
        rule = rule or DEFAULT_CUT_RULE.get(variable, "le")
        low, high = ("<", ">=") if rule == "lt" else ("<=", ">")
        cut_txt = f"{cut:g}"
        labels = []
        for r in records:
            v = r.value(variable)
            if v is None:
                labels.append(None)
            elif (v < cut) if rule == "lt" else (v <= cut):
                labels.append(f"{variable} {low} {cut_txt}")
            else:
                labels.append(f"{variable} {high} {cut_txt}")
        order = [f"{variable} {low} {cut_txt}", f"{variable} {high} {cut_txt}"]
        return labels, order
    if variable in COVARIATES or variable == "surgery":
        labels = [None if r.value(variable) is None else f"{variable}={r.value(variable)}" for r in records]
        order = sorted({lab for lab in labels if lab is not None})
        return labels, order
    raise CommandError(f"unknown strata variable {variable!r}", EXIT_INPUT)


def _slug(text):
    out = text.replace("<=", "le").replace(">=", "ge").replace("<", "lt").replace(">", "gt")
    return "".join(ch if ch.isalnum() or ch in "._-" else "_" for ch in out).replace("__", "_")


TREATMENT_PANELS = ("radiotherapy", "hormone_therapy", "chemotherapy")


def cmd_km(cfg):
    records = _load_records(cfg)
    variable = cfg.options["strata"]
    if variable == "treatments":
        for name in TREATMENT_PANELS:
            _km_panel(cfg, records, name, f"km_{name}_")
    else:
        _km_panel(cfg, records, variable, "km_")


def _km_panel(cfg, records, variable, prefix):
    labels, order = _strata(records, variable, cfg.options.get("cut"), cfg.options.get("cut_rule"))
    keep = [i for i, lab in enumerate(labels) if lab is not None]
    if len(keep) < len(records):
        print(f"note: {len(records) - len(keep)} records missing {variable} left out", file=sys.stderr)
    recs = [records[i] for i in keep]
    labs = [labels[i] for i in keep]
    if not recs:
        raise CommandError(f"no records with {variable}", EXIT_EMPTY)
    data = apply_event_policy(recs, cfg.policy)
    curves = km_stratified(data, labs, groups=order)
    for g in curves.omitted:
        print(f"note: stratum {g} is empty", file=sys.stderr)

    report = {"strata_variable": variable, "policy": cfg.policy.value, "horizon_months": cfg.horizon,
              "strata": {}}
    for g, curve in curves.items():
        cfg.write(f"km_{_slug(g)}.csv", curve.to_csv())
        value, extrapolated = survival_at(curve, cfg.horizon, with_flag=True)
        report["strata"][g] = {"n": curve.n, "events": curve.n_events,
                               "survival_at_horizon": value, "extrapolated": extrapolated}
    cfg.write(f"{prefix}curves.json", dumps({g: c.to_dict() for g, c in curves.items()}))
    p_value = None
    if len(curves) >= 2 and data.n_events > 0:
        lr = logrank_test(data, labs)
        report["logrank"] = lr.to_dict()
        p_value = lr.p_value
    else:
        reason = "single stratum" if len(curves) < 2 else "no events"
        report["logrank"] = {"skipped": reason}
        print(f"note: log-rank test skipped ({reason})", file=sys.stderr)
    cfg.write(f"{prefix}logrank.json", dumps(report))
    if cfg.figures:
        follow_up = {g: data.time[np.array([lab == g for lab in labs])] for g in curves}
        title = f"Kaplan-Meier survival by {LABELS.get(variable, variable)}"
        name = "km.svg" if prefix == "km_" else f"{prefix.rstrip('_')}.svg"
        cfg.write(name, svg.km_figure(dict(curves), follow_up, title=title, p_value=p_value))


def _model_data(cfg, records):
    data = apply_event_policy(records, cfg.policy, cfg.covariates)
    if data.n_excluded:
        print(f"note: {data.n_excluded} records with missing covariates excluded", file=sys.stderr)
    if len(data) == 0:
        raise CommandError("no complete records for the requested covariates", EXIT_EMPTY)
    return data


def cmd_cox(cfg):
    records = _load_records(cfg)
    data = _model_data(cfg, records)
    if data.n_events < 2:
        raise CommandError(f"Cox model needs at least two events, got {data.n_events}", EXIT_EMPTY)
    fit = cox_fit(data, ties_method=cfg.ties)
    if not fit.converged:
        print(dumps({"diagnostics": fit.message, "iterations": fit.iterations,
                     "gradient_max": fit.gradient_max}), file=sys.stderr)
        raise CommandError("Cox fit did not converge", EXIT_CONVERGENCE)
    table = hazard_ratios(fit)
    cfg.write("cox_hazard_ratios.csv", table.to_csv())
    cfg.write("cox_fit.json", dumps(fit.to_dict()))
    gof = gof_tests(fit, data)
    cidx = concordance_index(data.time, data.event, data.covariates @ fit.beta)
    aic, bic = information_criteria(fit.loglik_full, len(fit.beta), fit.n)
    base = breslow_baseline(fit, data)
    cfg.write("cox_gof.json", dumps({
        "tests": gof.to_dict(),
        "concordance": cidx.to_dict(),
        "partial_likelihood_aic": aic,
        "partial_likelihood_bic": bic,
        "coefficients": [r.__dict__ for r in table],
        "n": fit.n, "n_events": fit.n_events, "n_excluded": data.n_excluded,
        "iterations": fit.iterations,
    }))
    cfg.write("cox_baseline_hazard.csv", _rows_to_csv(
        [("time", "cumulative_hazard")]
        + [(repr(float(t)), repr(float(h))) for t, h in zip(base.times, base.cumulative)]))
    if cfg.figures:
        rows = [(LABELS.get(r.variable, r.variable), r.hazard_ratio, r.ci_lower, r.ci_upper) for r in table]
        cfg.write("cox_forest.svg", svg.forest_plot(rows, title="Forest plot of hazard ratios"))


def cmd_compare(cfg):
    records = _load_records(cfg)
    families = cfg.options["families"]
    covariates = cfg.covariates if "cox" in families else ()
    data = apply_event_policy(records, cfg.policy, covariates)
    if len(data) == 0 or data.n_events == 0:
        raise CommandError("no events to fit", EXIT_EMPTY)
    entries, details = [], {}
    for fam in families:
        if fam == "cox":
            label = "cox (partial)"
            try:
                fit = cox_fit(data, ties_method=cfg.ties)
                note = "partial likelihood" + ("" if fit.converged else "; not converged")
                entries.append((label, fit.loglik_full, len(fit.beta), fit.n, note))
                details[label] = {"loglik": fit.loglik_full, "converged": fit.converged,
                                  "likelihood": "partial", "covariates": list(fit.covariate_names)}
            except (DegenerateDataError, SeparationError) as exc:
                entries.append((label, math.nan, len(covariates), len(data), f"failed: {exc}"))
                details[label] = {"converged": False, "error": str(exc)}
            continue
        try:
            fit = fit_parametric(data, fam)
            note = "" if fit.converged else "not converged"
            entries.append((fam, fit.loglik, fit.k, fit.n, note))
            details[fam] = fit.to_dict()
        except DegenerateDataError as exc:
            entries.append((fam, math.nan, 2 if fam != "exponential" else 1, len(data), f"failed: {exc}"))
            details[fam] = {"converged": False, "error": str(exc)}
    ranking = compare_models(entries)
    cfg.write("compare.csv", ranking_to_csv(ranking))
    cfg.write("compare.json", dumps({"fits": details, "n": len(data), "n_events": data.n_events,
                                     "ranking": [m.__dict__ for m in ranking]}))


def cmd_logodds(cfg):
    records = _load_records(cfg)
    fit = fit_log_odds(records, cfg.covariates, cfg.horizon, cfg.policy, cfg.options.get("ridge", 0.0))
    if not fit.converged:
        raise CommandError(f"logistic fit did not converge ({fit.message})", EXIT_CONVERGENCE)
    print(f"note: {fit.n_excluded} records excluded (censored before {cfg.horizon:g} months "
          f"or missing covariates)", file=sys.stderr)
    cfg.write("logodds_fit.json", dumps(fit.to_dict()))
    hist = log_odds_distribution(fit, records, cfg.policy, cfg.options.get("bins", 20))
    cfg.write("logodds_histogram.csv", hist.to_csv())
    rows = [("id", "log_odds", "probability")]
    for rid, lo in zip(hist.ids, hist.scores):
        rows.append((rid, repr(float(lo)), repr(float(expit(lo)))))
    cfg.write("logodds_scores.csv", _rows_to_csv(rows))
    if cfg.figures:
        cfg.write("logodds_histogram.svg", svg.histogram_figure(hist.bin_edges, hist.counts))


def _load_model(path):
    try:
        d = json.loads(_read_bytes(path).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CommandError(f"model file {path} is not valid JSON: {exc}", EXIT_INPUT) from None
    kind = d.get("kind") if isinstance(d, dict) else None
    try:
        if kind == "cox":
            return CoxFit.from_dict(d)
        if kind == "logistic":
            return LogisticFit.from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise CommandError(f"model file {path} is malformed: {exc}", EXIT_INPUT) from None
    raise CommandError(f"model file {path}: unknown model kind {kind!r}", EXIT_INPUT)


def _read_patients(path):
    text = _read_bytes(path).decode("utf-8-sig")
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None:
        return [], []
    header = [h.strip() for h in header]
    return header, [row for row in reader if any(cell.strip() for cell in row)]


def cmd_score(cfg):
    model = _load_model(cfg.options["model"])
    header, rows = _read_patients(cfg.options["patients"])
    names = model.covariate_names
    derive_mastectomy = "mastectomy_flag" not in header and "surgery" in header
    missing = [n for n in names if n not in header and not (n == "mastectomy_flag" and derive_mastectomy)]
    if header and missing:
        raise CommandError(f"patient file lacks model covariates: {', '.join(missing)}", EXIT_MISMATCH)
    col = {h: j for j, h in enumerate(header)}
    is_logistic = isinstance(model, LogisticFit)

    def cell(row, name):
        j = col.get(name)
        return row[j] if j is not None and j < len(row) else ""

    out = [("id", "log_odds", "probability", "label_used") if is_logistic
           else ("id", "linear_predictor", "relative_hazard")]
    scores, ids = [], []
    for k, row in enumerate(rows, start=2):
        rid = cell(row, "id") or str(k - 1)
        try:
            vals = []
            for n in names:
                if n == "mastectomy_flag" and derive_mastectomy:
                    s = parse_cell("surgery", cell(row, "surgery"))
                    v = None if s is None else int(s == "mastectomy")
                else:
                    v = parse_cell(n, cell(row, n))
                vals.append(v)
        except DomainError as exc:
            raise CommandError(f"line {k}: {exc}", EXIT_INPUT) from None
        if any(v is None for v in vals):
            print(f"warning: line {k} has missing covariates, not scored", file=sys.stderr)
            continue
        if is_logistic:
            lo, prob = log_odds_score(model, vals)
            out.append((rid, repr(lo), repr(prob), _label_used(cell, row, model.horizon_months, cfg.policy)))
            scores.append(lo)
            ids.append(rid)
        else:
            lp, rh = predict_risk(model, vals)
            out.append((rid, repr(lp), repr(rh)))
    cfg.write("scores.csv", _rows_to_csv(out))
    if is_logistic and scores:
        hist = histogram(scores, cfg.options.get("bins", 20), ids)
        cfg.write("scores_histogram.csv", hist.to_csv())
        if cfg.figures:
            cfg.write("scores_histogram.svg", svg.histogram_figure(hist.bin_edges, hist.counts))


def _label_used(cell, row, horizon, policy):
    try:
        months = parse_cell("survival_months", cell(row, "survival_months"))
        outcome = parse_cell("outcome", cell(row, "outcome"))
    except DomainError:
        return ""
    if months is None or outcome is None:
        return ""
    if months >= horizon:
        return "1"
    return "0" if policy.is_event(outcome) else ""


def cmd_synth(cfg):
    try:
        raw = json.loads(_read_bytes(cfg.options["spec"]).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CommandError(f"invalid synth spec: {exc}", EXIT_INPUT) from None
    if cfg.seed is not None and isinstance(raw, dict):
        raw["seed"] = cfg.seed
    try:
        spec = SynthSpec.from_dict(raw)
    except TypeError as exc:
        raise CommandError(f"invalid synth spec: {exc}", EXIT_INPUT) from None
    cfg.seed = spec.seed
    cohort = generate_cohort(spec)
    if spec.mode == "records":
        cfg.write("cohort.csv", write_cohort(cohort))
    else:
        rows = [("id", "time", "event") + cohort.covariate_names]
        for rid, s in zip(cohort.ids, cohort):
            rows.append((rid, repr(s.time), s.event) + tuple(repr(v) for v in s.covariates))
        cfg.write("cohort.csv", _rows_to_csv(rows))
    cfg.write("ground_truth.json", dumps(spec.to_dict()))


COMMANDS = {
    "summarize": cmd_summarize,
    "km": cmd_km,
    "cox": cmd_cox,
    "compare": cmd_compare,
    "logodds": cmd_logodds,
    "score": cmd_score,
    "synth": cmd_synth,
}


def _csv_list(text):
    return tuple(item.strip() for item in text.split(",") if item.strip())


def build_parser():
    parser = argparse.ArgumentParser(prog="survodds", description=__doc__.splitlines()[0])
    parser.add_argument("--input", help="cohort CSV file")
    parser.add_argument("--policy", choices=["overall", "cause-specific"], default="overall",
                        help="which deaths count as events (default: overall)")
    parser.add_argument("--out-dir", default="out", help="output directory (default: out)")
    parser.add_argument("--no-figures", action="store_true", help="skip SVG output")
    parser.add_argument("--strict", action="store_true",
                        help="reject rows with blank cells; abort on unparseable cells")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("summarize", help="outcome-group summary table")

    p = sub.add_parser("km", help="Kaplan-Meier curves by stratum with a log-rank test")
    p.add_argument("--strata", required=True, help="stratifying variable, e.g. her2_status or age_years; "
                   "'treatments' draws one panel per treatment")
    p.add_argument("--cut", type=float, help="cut point for a numeric strata variable")
    p.add_argument("--cut-rule", choices=["lt", "le"],
                   help="low stratum is x < cut (lt) or x <= cut (le); default lt for age, le otherwise")
    p.add_argument("--horizon", type=float, default=DEFAULT_HORIZON,
                   help="read-off time for survival_at_horizon (months)")

    p = sub.add_parser("cox", help="Cox proportional-hazards model")
    p.add_argument("--covariates", type=_csv_list, default=COVARIATES)
    p.add_argument("--ties", choices=["efron", "breslow"], default="efron")

    p = sub.add_parser("compare", help="AIC/BIC comparison of parametric families and Cox")
    p.add_argument("--families", type=_csv_list, default=FAMILIES + ("cox",),
                   help="comma list from exponential,weibull,loglogistic,cox")
    p.add_argument("--covariates", type=_csv_list, default=COVARIATES, help="covariates of the Cox row")
    p.add_argument("--ties", choices=["efron", "breslow"], default="efron")

    p = sub.add_parser("logodds", help="logistic model of survival to a horizon")
    p.add_argument("--covariates", type=_csv_list, default=DEFAULT_LOGODDS_COVARIATES)
    p.add_argument("--horizon", type=float, default=DEFAULT_HORIZON)
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--ridge", type=float, default=0.0, help="ridge penalty, separation rescue only")

    p = sub.add_parser("score", help="score patients with a saved cox or logistic model")
    p.add_argument("--model", required=True, help="cox_fit.json or logodds_fit.json")
    p.add_argument("--patients", required=True, help="CSV with id and the model's covariates")
    p.add_argument("--bins", type=int, default=20)

    p = sub.add_parser("synth", help="generate a synthetic cohort from a JSON spec")
    p.add_argument("--spec", required=True, help="synth spec JSON")
    p.add_argument("--seed", type=int, help="override the spec's seed")
    return parser


def _config(args):
    cfg = RunConfig(command=args.command, input=args.input,
                    policy=EventPolicy.coerce(args.policy), out_dir=Path(args.out_dir),
                    figures=not args.no_figures, strict=args.strict)
    for name in ("covariates", "ties", "horizon", "seed"):
        if hasattr(args, name) and getattr(args, name) is not None:
            setattr(cfg, name, getattr(args, name))
    for name in ("strata", "cut", "cut_rule", "families", "bins", "ridge", "model", "patients", "spec"):
        if hasattr(args, name):
            cfg.options[name] = getattr(args, name)
    if args.command in ("cox", "compare", "logodds"):
        if not cfg.covariates:
            raise CommandError("covariate spec must be nonempty", EXIT_INPUT)
        unknown = [c for c in cfg.covariates if c not in COVARIATES]
        if unknown:
            raise CommandError(f"unknown covariate(s): {', '.join(unknown)}", EXIT_INPUT)
    if args.command == "compare":
        bad = [f for f in cfg.options["families"] if f not in FAMILIES + ("cox",)]
        if bad or not cfg.options["families"]:
            raise CommandError(f"unknown families: {', '.join(bad) or '(none given)'}", EXIT_INPUT)
    if "bins" in cfg.options and cfg.options["bins"] < 1:
        raise CommandError("--bins must be >= 1", EXIT_INPUT)
    return cfg


def _version(dist):
    try:
        return metadata.version(dist)
    except metadata.PackageNotFoundError:
        return "unknown"


def _manifest(cfg, args):
    inputs = {}
    for key in ("input", "model", "patients", "spec"):
        path = getattr(args, key, None)
        if path:
            inputs[key] = {"file": Path(path).name,
                           "sha256": hashlib.sha256(Path(path).read_bytes()).hexdigest()}
    flags = {k: v for k, v in sorted(vars(args).items())
             if k not in ("out_dir", "input", "model", "patients", "spec")}
    return {
        "command": cfg.command,
        "inputs": inputs,
        "flags": flags,
        "versions": {"survodds": _version("artifact"), "numpy": np.__version__,
                     "scipy": _version("scipy"), "python": platform.python_version()},
        "seeds": [] if cfg.seed is None else [cfg.seed],
        "outputs": sorted(cfg.outputs),
    }


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config(args)
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg)
        cfg.write("run_manifest.json", dumps(_manifest(cfg, args)))
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ParseError, ConfigurationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SeparationError, NotConvergedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except DegenerateDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except SurvivalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
