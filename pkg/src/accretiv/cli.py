"""Command line front end.

    accretiv <command> --config job.toml [--out DIR] [--sweep name=lo:hi:steps]
                       [--tol RTOL] [--threshold name=value]

Exit codes: 0 pass / accretive, 1 fail / not accretive, 2 input error,
3 internal invariant violation, 4 inconclusive.  ``ACCRETIV_THREADS`` caps
the BLAS/OpenMP thread pools; it must be set before numpy is imported, so
this module applies it first thing.
"""

from __future__ import annotations

import os

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")
if os.environ.get("ACCRETIV_THREADS"):
    for _v in _THREAD_VARS:
        os.environ[_v] = os.environ["ACCRETIV_THREADS"]

import argparse  # noqa: E402
import csv  # noqa: E402
import io  # noqa: E402
import json  # noqa: E402
import sys  # noqa: E402
import tempfile  # noqa: E402
from pathlib import Path  # noqa: E402

import numpy as np  # noqa: E402

from . import (accretivity, catalog, coefficients, config, expr, fieldio, hodge,  # noqa: E402
               one_dim, schrodinger, trace)
from .grid import GridError, GridSpec  # noqa: E402

EXIT_PASS, EXIT_FAIL, EXIT_INPUT, EXIT_INVARIANT, EXIT_INCONCLUSIVE = 0, 1, 2, 3, 4
VERDICT_EXIT = {"accretive": EXIT_PASS, "not-accretive": EXIT_FAIL, "inconclusive": EXIT_INCONCLUSIVE}

INPUT_ERRORS = (config.ConfigError, fieldio.FieldFormatError, expr.ExprError, GridError,
                coefficients.CoefficientError, trace.TraceError, hodge.HodgeError,
                one_dim.OneDimError)


class InputError(ValueError):
    pass


class InvariantError(RuntimeError):
    pass


# ------------------------------------------------------------------ output


def _atomic_write(path: Path, data: str | bytes) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "wb") as fh:
        fh.write(data.encode() if isinstance(data, str) else data)
    os.replace(tmp, path)
    return path


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _json_text(doc) -> str:
    return json.dumps(accretivity._finite(doc), indent=2, default=accretivity._jsonable) + "\n"


class Run:
    """Output directory plus the resolved config shared by every command."""

    def __init__(self, args, job: config.JobConfig | None):
        self.job = job
        out = args.out or (job.options.get("out") if job else None) or "accretiv-out"
        self.out = Path(out)
        self.tol = args.tol if args.tol is not None else (job.options.get("tol") if job else None)
        self.thresholds = dict(job.options.get("thresholds", {})) if job else {}
        for spec in args.threshold or ():
            k, v = config.parse_assignment(spec)
            self.thresholds[k] = v
        self.sweep = config.parse_sweep(args.sweep) if args.sweep else None
        if self.sweep is None and job and job.options.get("sweep"):
            self.sweep = config.parse_sweep(job.options["sweep"])
        self.files: dict[str, str] = {}

    def field(self, name: str, values, grid: GridSpec) -> str:
        p = fieldio.write_field(self._path(f"{name}.afld"), values, grid.extents)
        self.files[name] = str(p)
        return str(p)

    def text(self, name: str, data: str) -> str:
        p = _atomic_write(self._path(name), data)
        self.files[name] = str(p)
        return str(p)

    def _path(self, name: str) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        return self.out / name

    def report(self, command: str, verdict: str, body: dict, params=None) -> dict:
        doc = {"command": command, "verdict": verdict, **body,
               "files": dict(self.files),
               "config": self.job.resolved(params) if self.job else None}
        self.text(f"{command}.json", _json_text(doc))
        return doc


def _emit(lines) -> None:
    sys.stdout.write("\n".join(lines) + "\n")


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


# ---------------------------------------------------------------- commands


def cmd_reduce(run: Run) -> int:
    cs = run.job.build()
    red = coefficients.reduce(cs)
    g = red.grid
    run.field("P", red.P, g)
    run.field("btilde", red.btilde, g)
    run.field("sigma", red.sigma, g)
    m, M = coefficients.ellipticity_bounds(red.P)
    body = {"ellipticity_m": m, "ellipticity_M": M,
            "max_abs_sigma": float(np.abs(red.sigma).max()),
            "max_abs_btilde": float(np.abs(red.btilde).max()),
            "max_abs_P_minus_I": float(np.abs(red.P - np.eye(g.ndim)).max()),
            "atoms": {"p": [(a.at, a.weight) for a in red.p_atoms],
                      "btilde": [(a.at, a.weight) for a in red.btilde_atoms],
                      "sigma": [(a.at, a.weight) for a in red.sigma_atoms]}}
    verdict = "elliptic" if m > 0 else "degenerate"
    run.report("reduce", verdict, body)
    _emit([f"{k}: {_fmt(v)}" for k, v in body.items() if k != "atoms"]
          + [f"verdict: {verdict}"] + [f"wrote {p}" for p in run.files.values()])
    return EXIT_PASS


def _combine(direct, prop1) -> str:
    """Joint verdict of the two routes; raises on a real disagreement."""
    if "inconclusive" in (direct.verdict, prop1.verdict):
        return "inconclusive"
    if direct.verdict != prop1.verdict:
        raise InvariantError(
            f"direct test says {direct.verdict} (lambda_min = {direct.lambda_min:.6g}), "
            f"commutator test says {prop1.verdict} (form lambda_min = {prop1.form_lambda_min}, "
            f"theta = {prop1.theta})")
    return direct.verdict


def _check_once(run: Run, params: dict, tag: str = ""):
    cs = run.job.build(params)
    direct, prop1 = accretivity.check(cs, bounds=bool(run.job.options.get("bounds", False)), rtol=run.tol)
    try:
        verdict = _combine(direct, prop1)
        error = None
    except InvariantError as exc:
        verdict, error = "inconclusive", str(exc)
    for rep, name in ((direct, "direct"), (prop1, "prop1")):
        for k, w in rep.witnesses.items():
            run.field(f"witness_{name}_{k}{tag}", w, cs.grid)
    return verdict, direct, prop1, error


def cmd_check(run: Run) -> int:
    if run.sweep is None:
        verdict, direct, prop1, error = _check_once(run, {})
        body = {"direct": direct.summary(), "prop1": prop1.summary(), "error": error}
        run.report("check", verdict, body)
        _emit(["[direct]", direct.to_text().rstrip(), "[prop1]", prop1.to_text().rstrip(),
               f"verdict: {verdict}"] + [f"wrote {p}" for p in run.files.values()])
        if error:
            _emit([f"invariant violation: {error}"])
            return EXIT_INVARIANT
        return VERDICT_EXIT[verdict]
    name, values = run.sweep
    run.job.check_bound([name])
    rows, errors = [], []
    for k, val in enumerate(values):
        verdict, direct, prop1, error = _check_once(run, {name: float(val)}, tag=f"_{k}")
        rows.append([float(val), verdict, direct.lambda_min, prop1.theta, prop1.form_lambda_min])
        if error:
            errors.append(f"{name} = {val:g}: {error}")
    header = [name, "verdict", "lambda_min", "theta", "form_lambda_min"]
    run.text("sweep.csv", _csv_text(header, rows))
    verdicts = [r[1] for r in rows]
    overall = ("inconclusive" if "inconclusive" in verdicts else
               "not-accretive" if "not-accretive" in verdicts else "accretive")
    run.report("check", overall, {"sweep": {"parameter": name, "header": header, "rows": rows},
                                  "errors": errors}, params={name: [float(v) for v in values]})
    _emit([_table(header, rows), f"verdict: {overall}"] + [f"wrote {p}" for p in run.files.values()])
    if errors:
        _emit([f"invariant violation: {e}" for e in errors])
        return EXIT_INVARIANT
    return VERDICT_EXIT[overall]


def _table(header, rows) -> str:
    cells = [list(map(str, header))] + [[_fmt(v) for v in r] for r in rows]
    widths = [max(len(r[k]) for r in cells) for k in range(len(header))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells)


def _coeffs_1d(run: Run) -> one_dim.Coeffs1D:
    if run.job.grid.ndim != 1:
        raise InputError("this command needs a one-dimensional grid")
    return one_dim.Coeffs1D.from_coefficients(run.job.build())


def _riccati_csv(cert: one_dim.RiccatiCertificate) -> str:
    rows = [[float(x), float(f), "", ""] for x, f in zip(cert.x, cert.f)]
    rows += [["", "", float(x), float(m)] for x, m in zip(cert.margin_x, cert.margin)]
    return _csv_text(["x_f", "f", "x_margin", "margin"], rows)


def cmd_check1d(run: Run) -> int:
    c1 = _coeffs_1d(run)
    rep = one_dim.check_accretive_1d(c1, run.tol)
    body = {"report": rep.summary()}
    lines = [rep.to_text().rstrip()]
    if rep.verdict == "accretive":
        try:
            cert = one_dim.riccati_from_groundstate(c1)
            path = run.text("riccati_certificate.csv", _riccati_csv(cert))
            body["certificate"] = {"path": path, "provenance": cert.provenance,
                                   "min_margin": cert.min_margin, "tolerance": cert.tolerance,
                                   "passed": cert.passed, **cert.info}
            lines.append(f"certificate: {path} (min margin {cert.min_margin:.6g}, "
                         f"{'passed' if cert.passed else 'failed'})")
        except one_dim.OneDimError as exc:
            body["certificate"] = {"error": str(exc)}
            lines.append(f"certificate: none ({exc})")
    for k, w in rep.witnesses.items():
        run.field(f"witness_{k}", w, c1.grid)
    run.report("check1d", rep.verdict, body)
    _emit(lines + [f"verdict: {rep.verdict}"] + [f"wrote {p}" for p in run.files.values()])
    return VERDICT_EXIT[rep.verdict]


def cmd_riccati(run: Run) -> int:
    c1 = _coeffs_1d(run)
    f0 = run.job.options.get("f0")
    res = one_dim.riccati_search(c1, None if f0 is None else [float(f0)])
    body = {"survived": res.survived, "f0": res.f0, "blowup_at": res.blowup_at, "steps": res.steps}
    lines = [f"{k}: {_fmt(v)}" for k, v in body.items()]
    passed = False
    if res.certificate is not None:
        cert = res.certificate
        path = run.text("riccati_certificate.csv", _riccati_csv(cert))
        passed = res.survived and cert.passed
        body["certificate"] = {"path": path, "min_margin": cert.min_margin,
                               "tolerance": cert.tolerance, "passed": cert.passed, **cert.info}
        lines.append(f"certificate: {path} (min margin {cert.min_margin:.6g}, "
                     f"tolerance {cert.tolerance:.3g})")
    verdict = "pass" if passed else "fail"
    run.report("riccati", verdict, body)
    _emit(lines + [f"verdict: {verdict}"])
    return EXIT_PASS if passed else EXIT_FAIL


RESIDUAL_RTOL = 1e-8


def cmd_hodge(run: Run) -> int:
    cs = run.job.build()
    if cs.grid.ndim < 2:
        raise InputError("the Hodge decomposition needs n >= 2")
    red = coefficients.reduce(cs)
    eps = float(run.job.options.get("epsilon", 1.0))
    rep = hodge.check_smallness(red, eps, run.thresholds or None)
    parts = hodge.hodge_decompose(red.btilde, red.grid)
    run.field("f", parts.f, red.grid)
    run.field("G", parts.G, red.grid)
    if parts.g is not None:
        run.field("g", parts.g, red.grid)
    else:
        run.field("psi", parts.psi, red.grid)
    body = rep.summary()
    body["mean"] = parts.mean
    scale = max(float(np.abs(red.btilde).max()), 1.0)
    verdict = rep.direct_verdict
    lines = [f"{k}: {_fmt(v)}" for k, v in body.items() if k != "thresholds"]
    if rep.residual > RESIDUAL_RTOL * scale:
        run.report("hodge", "inconclusive", body)
        _emit(lines + [f"invariant violation: reconstruction residual {rep.residual:.3e}"])
        return EXIT_INVARIANT
    run.report("hodge", verdict, body)
    _emit(lines + [f"verdict: {verdict}"] + [f"wrote {p}" for p in run.files.values()])
    return VERDICT_EXIT[verdict]


def _bmo_field(run: Run) -> tuple[np.ndarray, str]:
    opts, grid = run.job.options, run.job.grid
    if "field" in opts:
        path = Path(opts["field"])
        if run.job.source and not path.is_absolute():
            path = run.job.source.parent / path
        vals = fieldio.read_field(path, grid).values
        what = str(path)
    elif "field_expr" in opts:
        vals = expr.eval_on_grid(opts["field_expr"], grid, run.job.params)
        what = expr.pretty(expr.parse(opts["field_expr"]))
    else:
        red = coefficients.reduce(run.job.build())
        vals = hodge.hodge_decompose(red.btilde, grid).g
        if vals is None:
            raise InputError("without 'field' or 'field_expr' the bmo command needs n = 2")
        what = "stream function of btilde"
    vals = np.asarray(vals)
    if vals.shape != grid.shape:
        raise InputError(f"bmo needs a scalar field, got shape {vals.shape}")
    if np.iscomplexobj(vals):
        if np.abs(vals.imag).max() > 1e-12 * max(np.abs(vals).max(), 1.0):
            raise InputError("bmo needs a real field")
        vals = vals.real
    return vals, what


def cmd_bmo(run: Run) -> int:
    vals, what = _bmo_field(run)
    est = hodge.bmo_norm(vals, int(run.job.options.get("min_cube", 2)))
    body = {"field": what, "bmo": est.value, "level": est.level,
            "corner": list(est.corner), "side": list(est.side)}
    limit = run.thresholds.get("bmo")
    verdict = "measured" if limit is None else ("pass" if est.value <= limit else "fail")
    run.report("bmo", verdict, body)
    _emit([f"{k}: {_fmt(v)}" for k, v in body.items()] + [f"verdict: {verdict}"])
    return EXIT_FAIL if verdict == "fail" else EXIT_PASS


TRACE_CONDITIONS = ("c", "c2", "c3", "c4", "c5", "green")


def _measure(run: Run) -> trace.DyadicMeasure:
    spec = dict(run.job.options.get("measure", {}))
    grid = run.job.grid
    kind = spec.pop("kind", "lebesgue")
    lower = tuple(spec.pop("lower", grid.lower))
    upper = tuple(spec.pop("upper", grid.upper))
    depth = spec.pop("depth", None)
    if depth is None:
        depth = int(round(np.log2(grid.points[0])))
        if any(p != 2 ** depth for p in grid.points):
            raise InputError("measure depth not given and the grid is not 2^D per axis")
    base = run.job.source.parent if run.job.source else Path.cwd()
    if kind == "lebesgue":
        mu = trace.DyadicMeasure.lebesgue(depth, lower, upper)
    elif kind == "point":
        mu = trace.DyadicMeasure.point(depth, spec.pop("at"), float(spec.pop("mass", 1.0)), lower, upper)
    elif kind == "csv":
        mu = trace.DyadicMeasure.from_csv(base / spec.pop("path"), depth, lower, upper)
    elif kind == "field":
        mu = trace.DyadicMeasure.from_field(base / spec.pop("path"), lower, upper)
    else:
        raise InputError(f"unknown measure kind {kind!r}")
    scale = spec.pop("scale", None)
    if spec:
        raise InputError(f"[options.measure]: unknown keys {sorted(spec)}")
    return mu if scale is None else mu.scaled(float(scale))


def cmd_trace(run: Run) -> int:
    conds = tuple(run.job.options.get("conditions", TRACE_CONDITIONS))
    unknown = set(conds) - set(TRACE_CONDITIONS)
    if unknown:
        raise InputError(f"unknown trace conditions {sorted(unknown)}")
    mu = _measure(run)
    if mu.ndim == 2 and "c5" in conds and "conditions" in run.job.options:
        raise InputError("the dyadic condition c5 is undefined for n = 2 (cubes have zero capacity)")
    if mu.ndim == 2:
        conds = tuple(c for c in conds if c not in ("c3", "c4", "c5"))
    rep = trace.trace_report(mu, conds)
    if "c" in rep.witnesses:
        run.field("witness_c", rep.witnesses["c"], mu.grid())
    body = rep.summary()
    body["measure"] = {"ndim": mu.ndim, "depth": mu.depth, "total": mu.total,
                       "lower": list(mu.lower), "upper": list(mu.upper)}
    limit = run.thresholds.get("c")
    verdict = "measured" if limit is None else ("pass" if rep.c <= limit else "fail")
    run.report("trace", verdict, body)
    _emit([rep.to_text().rstrip(), f"verdict: {verdict}"] + [f"wrote {p}" for p in run.files.values()])
    return EXIT_FAIL if verdict == "fail" else EXIT_PASS


LOG_ROTATION_JOB = """
[grid]
extents = [2.0, 2.0]
points = {points}
boundary = "zero"

[coefficients]
params = {{ lambda = 0.0 }}
A = [["1", "i*lambda*log(abs(x))"], ["-i*lambda*log(abs(x))", "1"]]
b = ["-x1*abs(x)^2", "-x2*abs(x)^2"]
c = "-2*abs(x)^2"

[options]
sweep = "lambda=0:4:17"
"""

EXAMPLE_GRIDS = (32, 64)
EXAMPLE_RTOL = 0.05


def _monotone(verdicts) -> bool:
    """Accretive rows first, then only non-accretive ones."""
    flips = [k for k in range(1, len(verdicts)) if verdicts[k] != verdicts[k - 1]]
    return not flips or (len(flips) == 1 and verdicts[0] == "accretive")


def _example_grid(run: Run, points: int, name: str, values) -> dict:
    job = config.loads(LOG_ROTATION_JOB.format(points=points))
    grid = job.grid
    rows, errors = [], []
    g_unit = None
    for val in values:
        cs = job.build({name: float(val)})
        direct, prop1 = accretivity.check(cs, rtol=run.tol)
        try:
            verdict = _combine(direct, prop1)
        except InvariantError as exc:
            verdict = "inconclusive"
            errors.append(f"{points}^2, {name} = {val:g}: {exc}")
        red = coefficients.reduce(cs)
        g = hodge.hodge_decompose(red.btilde, grid).g
        if val > 0 and g_unit is None:
            g_unit = g / val
        rows.append([points, float(val), verdict, direct.lambda_min, prop1.theta,
                     hodge.bmo_norm(g).value])
    jc = hodge.jacobian_constant(catalog.log_window(grid), grid).value
    slopes = [r[4] / r[1] for r in rows if r[1] > 0 and r[4] is not None]
    estimate = 1.0 / float(np.mean(slopes)) if slopes else float("nan")
    verdicts = [r[2] for r in rows]
    acc = [r[1] for r in rows if r[2] == "accretive"]
    non = [r[1] for r in rows if r[2] == "not-accretive"]
    bracket = [max(acc) if acc else None, min(non) if non else None]
    return {"points": points, "rows": rows, "errors": errors, "jacobian_constant": jc,
            "theta_slope": float(np.mean(slopes)) if slopes else None,
            "threshold_estimate": estimate, "bracket": bracket,
            "monotone": _monotone(verdicts),
            "two_over_J": 2.0 / jc, "one_over_J": 1.0 / jc,
            "rel_err_two_over_J": abs(estimate - 2.0 / jc) / (2.0 / jc),
            "rel_err_one_over_J": abs(estimate - 1.0 / jc) / (1.0 / jc),
            "g_bmo_per_unit_lambda": hodge.bmo_norm(g_unit).value if g_unit is not None else None}


def cmd_example(run: Run) -> int:
    name, values = run.sweep or config.parse_sweep("lambda=0:4:17")
    if name != "lambda":
        raise InputError("paper-example sweeps the parameter 'lambda'")
    run.job = config.loads(LOG_ROTATION_JOB.format(points=EXAMPLE_GRIDS[0]))
    grids = [_example_grid(run, p, name, values) for p in EXAMPLE_GRIDS]
    header = ["points", "lambda", "verdict", "lambda_min", "theta", "g_bmo"]
    rows = [r for gr in grids for r in gr["rows"]]
    run.text("log_rotation.csv", _csv_text(header, rows))
    errors = [e for gr in grids for e in gr["errors"]]
    reproduced = all(gr["monotone"] and gr["rel_err_two_over_J"] <= EXAMPLE_RTOL for gr in grids)
    verdict = "reproduced" if reproduced else "not-reproduced"
    summary = [{k: v for k, v in gr.items() if k != "rows"} for gr in grids]
    run.report("paper-example", verdict, {"header": header, "rows": rows, "grids": summary})
    lines = [_table(header, rows), ""]
    for s in summary:
        lines.append(
            f"{s['points']}^2: J = {s['jacobian_constant']:.6g}, theta/lambda = {_fmt(s['theta_slope'])}, "
            f"threshold = {s['threshold_estimate']:.6g}, bracket = {s['bracket']}, "
            f"2/J = {s['two_over_J']:.6g} (rel err {s['rel_err_two_over_J']:.3g}), "
            f"1/J = {s['one_over_J']:.6g} (rel err {s['rel_err_one_over_J']:.3g}), "
            f"monotone = {s['monotone']}")
    _emit(lines + [f"verdict: {verdict}"] + [f"wrote {p}" for p in run.files.values()])
    if errors:
        _emit([f"invariant violation: {e}" for e in errors])
        return EXIT_INVARIANT
    return EXIT_PASS if reproduced else EXIT_FAIL


COMMANDS = {
    "reduce": cmd_reduce,
    "check": cmd_check,
    "check1d": cmd_check1d,
    "riccati": cmd_riccati,
    "hodge": cmd_hodge,
    "bmo": cmd_bmo,
    "trace": cmd_trace,
    "paper-example": cmd_example,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="accretiv", description="Accretivity checks for complex "
                                 "divergence-form operators on grids.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="TOML job file (not needed for paper-example)")
    ap.add_argument("--out", help="output directory (default: options.out or ./accretiv-out)")
    ap.add_argument("--sweep", help="name=lo:hi:steps")
    ap.add_argument("--tol", type=float, help="relative tolerance of the nonnegativity tests")
    ap.add_argument("--threshold", action="append", metavar="NAME=VALUE",
                    help="user threshold (repeatable)")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_PASS
    try:
        if args.tol is not None and not args.tol > 0:
            raise InputError("--tol must be positive")
        job = None
        if args.command != "paper-example":
            if not args.config:
                raise InputError(f"{args.command} needs --config")
            job = config.load(args.config)
        run = Run(args, job)
        return COMMANDS[args.command](run)
    except (InputError, *INPUT_ERRORS) as exc:
        print(f"accretiv: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InvariantError, schrodinger.FormError, AssertionError) as exc:
        print(f"accretiv: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
