"""Command-line entry point: ``irdecoherence run|check|schema``.

Exit status: 0 success, 2 invalid configuration, 3 unbounded model,
4 numerical failure (including failed invariant checks).  Errors are
reported as one JSON object on stderr and no artifacts are written.
"""
import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import oracle, position, superselection, velocity
from .errors import ConfigInvalid, ModelError, NumericalFailure, Unbounded
from .io import ArtifactWriter, json_text
from .phase_space import WeylLabel
from .scenario import SCHEMA, Scenario
from .spectral import Boundedness, boundedness_check, coupling_norm_sq, ir_classify

OUTPUT_DIR_ENV = "IRDECOHERENCE_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "irdecoherence-out"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNBOUNDED = 3
EXIT_NUMERICAL = 4

SPECTRAL_TOL = 1e-6
CROSS_CHECK_TOL = 1e-4
RICHARDSON_WARN = 1e-6


@dataclass
class RunReport:
    checks: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def check(self, name, value, tol, ok=None):
        ok = bool(value <= tol) if ok is None else bool(ok)
        self.checks.append({"name": name, "value": value, "tolerance": tol, "passed": ok})
        return ok

    @property
    def passed(self):
        return all(c["passed"] for c in self.checks)


def classify(scn):
    """Boundedness and infrared class of a scenario without running it."""
    J = scn.form_factor()
    model = "velocity" if scn.kind == "velocity" else "position"
    bd = boundedness_check(J, model, scn.omega0)
    return {"model": scn.kind, "coupling_norm_sq": coupling_norm_sq(J),
            "bound": 1.0 if model == "velocity" else scn.omega0 ** 2,
            "boundedness": bd.value, "ir": ir_classify(J).value,
            "sigma": J.sigma, "tabulated": J.tabulated}


def _curve_checks(report, curve, label, tag, kind):
    report.check(f"{tag}.abs_chi_in_unit_interval", 0.0, 0.0,
                 ok=np.all((curve.abs_chi >= 0) & (curve.abs_chi <= 1)))
    report.check(f"{tag}.envelope_non_decreasing", 0.0, 0.0,
                 ok=np.all(np.diff(curve.envelope_phi) >= 0))
    if kind == "velocity":
        report.check(f"{tag}.momentum_conserved", float(np.max(np.abs(curve.b_t - label.b))), 0.0)


def _oracle_times(times, sys_, max_points):
    recurrence = 2 * math.pi / float(np.max(sys_.widths))
    usable = times[(times > 0) & (times <= 0.5 * recurrence)]
    if len(usable) > max_points:
        usable = usable[np.linspace(0, len(usable) - 1, max_points).round().astype(int)]
    return usable


def _velocity_oracle_values(sys_, model, label, ts, env):
    """``(analytic, oracle)`` arrays for ``a(t)`` and ``|chi|``."""
    rows = []
    for t in ts:
        vec = oracle.propagate(sys_, oracle.initial_vector(sys_, label), t)
        ana_label, ana_chi = velocity.reduced_weyl(model, label, t, env)
        rows.append((ana_label.a, vec[0], ana_chi, math.exp(-oracle.oracle_exponent(sys_, vec, env))))
    rows = np.array(rows)
    return {"a_t": (rows[:, 0], rows[:, 1]), "abs_chi": (rows[:, 2], rows[:, 3])}


def _order(err_coarse, err_fine):
    if err_coarse > 1e-14 and err_fine > 1e-14:
        return math.log2(err_coarse / err_fine)
    return None


def _run_oracle(scn, J, model_obj, label, times, env, settings, report):
    kind = scn.kind
    n = int(settings["n"])
    sys_ = oracle.build(J, kind, n, settings["grid_scheme"], omega0=scn.omega0)
    ts = _oracle_times(times, sys_, int(settings["max_points"]))
    if len(ts) < len(times[times > 0]):
        report.warnings.append(f"oracle restricted to t <= half the recurrence time of N={n}")
    if len(ts) == 0:
        report.warnings.append("no time points inside the oracle validity window")
        return []
    if kind == "velocity":
        fine = _velocity_oracle_values(sys_, model_obj, label, ts, env)
        coarse_sys = oracle.build(J, kind, max(n // 2, 4), settings["grid_scheme"])
        coarse = _velocity_oracle_values(coarse_sys, model_obj, label, ts, env)
    else:
        cmps = [oracle.oracle_chi(sys_, label, t, env) for t in ts]
        fine = {"abs_chi": (np.array([c.analytic for c in cmps]), np.array([c.oracle for c in cmps]))}
        coarse = None
    out = []
    for name, (ana, orc) in fine.items():
        err = np.abs(ana - orc)
        i = int(np.argmax(err))
        order = None
        if coarse is not None:
            order = _order(float(np.abs(np.subtract(*coarse[name])).max()), float(err.max()))
        out.append(oracle.OracleComparison(name, float(ana[i]), float(orc[i]), float(err[i]), n, order))
        report.check(f"oracle.{name}.max_abs_diff", float(err[i]), float(settings["tolerance"]))
    return [dict(c.to_dict(), t_points=[float(t) for t in ts]) for c in out]


def run_scenario(scn, oracle_modes=None, threads=None, strict=False):
    """Compute every artifact of ``scn``; returns ``(artifacts, report)``.

    ``artifacts`` maps file names to text.  Raises :class:`ModelError`
    subclasses on invalid or unbounded models.
    """
    J = scn.form_factor()
    env = scn.environment()
    times = scn.times()
    labels = scn.labels()
    report = RunReport()
    files = {}
    prefix = scn.name
    if J.tabulated and J.sigma is None:
        report.warnings.append("small-frequency exponent of the tabulated profile is indeterminate")

    if scn.kind == "velocity":
        model_obj = velocity.VelocityModel.build(J, scn.doc["model"].get("alpha_sq"))
        curves = [velocity.decoherence_curve(model_obj, lab, times, env, workers=threads)
                  for lab in labels]
    else:
        m = scn.doc["model"]
        model_obj = position.FriedrichsOperator.build(J, scn.omega0, m.get("n_modes", 2000),
                                                      m.get("grid_scheme", "midpoint"))
        curves = [position.decoherence_curve(model_obj, lab, times, env) for lab in labels]
        sd = position.spectral_density(model_obj)
        report.check("spectral.mass", abs(sd.mass - 1.0), SPECTRAL_TOL)
        report.check("spectral.first_moment", abs(sd.first_moment - scn.omega0 ** 2), SPECTRAL_TOL)
        t_cross = np.linspace(0.0, min(50.0, float(times[-1])), 51)
        report.check("spectral.c00_cross_check",
                     float(np.max(np.abs(position.c00_diag(model_obj, t_cross)
                                         - sd.cos_transform(t_cross)))), CROSS_CHECK_TOL)
        if not sd.extrapolation_error <= RICHARDSON_WARN:
            report.warnings.append(
                f"boundary-value extrapolation error {sd.extrapolation_error:.3g} above {RICHARDSON_WARN:g}")
        files[f"{prefix}_spectral_density.csv"] = sd.to_csv()
        files[f"{prefix}_spectral_density.json"] = json_text(sd.metadata())

    for k, (lab, curve) in enumerate(zip(labels, curves)):
        _curve_checks(report, curve, lab, f"curve{k}", scn.kind)
        files[f"{prefix}_curve{k}.csv"] = curve.to_csv()
        files[f"{prefix}_curve{k}.json"] = curve.to_json()

    ss = scn.superselection
    if ss:
        A = superselection.WeylCombination(
            [(complex(*t["c"]) if isinstance(t.get("c"), list) else t.get("c", 1.0),
              WeylLabel(t["a"], t["b"])) for t in ss["terms"]])
        I1 = superselection.MomentumInterval(*ss["I1"])
        I2 = superselection.MomentumInterval(*ss["I2"])
        table = superselection.superselection_sweep(A, I1, I2, model_obj, times, env)
        report.check("superselection.bound_non_increasing", 0.0, 0.0,
                     ok=np.all(np.diff(table.per_term_bound) <= 1e-15 * A.c_total))
        files[f"{prefix}_superselection.csv"] = table.to_csv()
        files[f"{prefix}_superselection.json"] = table.to_json()

    settings = scn.oracle
    if oracle_modes is not None:
        settings = dict(settings, enabled=True, n=int(oracle_modes))
    if settings["enabled"]:
        comparisons = _run_oracle(scn, J, model_obj, labels[0], times, env, settings, report)
        files[f"{prefix}_oracle.json"] = json_text(comparisons)

    summary = {"scenario": scn.doc, "classification": classify(scn), "checks": report.checks,
               "warnings": report.warnings, "strict": strict, "files": sorted(files)}
    if strict and report.warnings:
        report.check("strict.no_warnings", float(len(report.warnings)), 0.0)
    summary["passed"] = report.passed
    files[f"{prefix}_report.json"] = json_text(summary)
    return files, report


def _error(status, exc, stream):
    payload = {"status": status, "error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ConfigInvalid):
        payload["field"] = exc.field
    stream.write(json_text(payload))
    return status


def _status_for(exc):
    if isinstance(exc, ConfigInvalid):
        return EXIT_CONFIG
    if isinstance(exc, Unbounded):
        return EXIT_UNBOUNDED
    return EXIT_NUMERICAL


def cmd_run(args, stdout, stderr):
    try:
        scn = Scenario.from_file(args.scenario)
        files, report = run_scenario(scn, args.oracle_modes, args.threads, args.strict)
        if not report.passed:
            failed = [c for c in report.checks if not c["passed"]]
            raise NumericalFailure("invariant checks failed: "
                                   + ", ".join(c["name"] for c in failed))
    except (ModelError, FloatingPointError, np.linalg.LinAlgError) as exc:
        return _error(_status_for(exc), exc, stderr)
    out_dir = (args.output_dir or scn.output_dir or os.environ.get(OUTPUT_DIR_ENV)
               or DEFAULT_OUTPUT_DIR)
    writer = ArtifactWriter(out_dir)
    for name, text in files.items():
        writer.add_text(name, text)
    for path in writer.commit():
        stdout.write(f"{path}\n")
    return EXIT_OK


def cmd_check(args, stdout, stderr):
    try:
        scn = Scenario.from_file(args.scenario)
        summary = classify(scn)
    except ModelError as exc:
        return _error(_status_for(exc), exc, stderr)
    summary["valid"] = True
    stdout.write(json_text(summary))
    return EXIT_OK


def cmd_schema(args, stdout, stderr):
    stdout.write(json.dumps(SCHEMA, indent=2) + "\n")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="irdecoherence",
        description="Reduced dynamics and decoherence of a particle coupled to a massless Bose field")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario and write curves, tables and reports")
    run.add_argument("scenario", help="scenario JSON file")
    run.add_argument("--output-dir", default=None,
                     help=f"output directory (default: scenario output.dir, ${OUTPUT_DIR_ENV}, "
                          f"or ./{DEFAULT_OUTPUT_DIR})")
    run.add_argument("--oracle-modes", type=int, default=None, metavar="N",
                     help="enable the finite-mode oracle with N modes")
    run.add_argument("--threads", type=int, default=None, metavar="K",
                     help="worker threads for time-grid evaluation")
    run.add_argument("--strict", action="store_true", help="treat warnings as errors")
    run.set_defaults(func=cmd_run)
    check = sub.add_parser("check", help="validate a scenario and classify its model")
    check.add_argument("scenario")
    check.set_defaults(func=cmd_check)
    schema = sub.add_parser("schema", help="print the scenario JSON schema")
    schema.set_defaults(func=cmd_schema)
    return parser


def main(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    return args.func(args, stdout, stderr)


if __name__ == "__main__":
    sys.exit(main())
