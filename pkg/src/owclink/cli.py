"""Command-line front end: ``analyze``, ``sweep`` and ``selftest``.

Exit codes: 0 ok, 1 self-test failure, 2 configuration error, 3 numerical
error, 4 sweep finished with failed rows.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, replace

import numpy as np

from . import analysis as an
from .analysis import Formula, Method
from .channels import (
    EwParams,
    LinkBudget,
    PointingGeometry,
    SnrModel,
    Variant,
    ew_pdf,
    pointing_pdf,
    snr_pdf,
)
from .config import ConfigError, PointConfig, RunConfig, load_config_file
from .errors import DomainError
from .simulate import Channel, Metric, MonteCarloConfig, compare_channels, mc_estimate, moment_matched_gg
from .special_math import QuadratureSpec, digamma, gamma_fn, integrate, upper_incomplete_gamma

EXIT_OK, EXIT_SELFTEST, EXIT_CONFIG, EXIT_NUMERIC, EXIT_PARTIAL = 0, 1, 2, 3, 4

CSV_COLUMNS = ("axis_name", "axis_value", "method", "metric", "value", "stderr",
               "ci95_low", "ci95_high", "terms_used", "status")

ENV_SEED = "OWCLINK_SEED"
ENV_WORKERS = "OWCLINK_WORKERS"


@dataclass(frozen=True)
class Row:
    axis_name: str
    axis_value: object
    method: str
    metric: str
    value: float | None = None
    stderr: float | None = None
    ci95_low: float | None = None
    ci95_high: float | None = None
    terms_used: int | None = None
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def cells(self):
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, float):
                return repr(v)
            return str(v)
        return [fmt(getattr(self, c)) for c in CSV_COLUMNS]


class NumericalFailure(Exception):
    def __init__(self, method, metric, exc):
        self.method, self.metric, self.exc = method, metric, exc
        super().__init__(f"method {method} ({metric}) failed: {type(exc).__name__}: {exc}")


# ---------------------------------------------------------------------------
# Evaluation of one parameter point
# ---------------------------------------------------------------------------

def _model(pc: PointConfig, link: LinkBudget, variant: Variant) -> SnrModel:
    return SnrModel(variant, pc.ew, link, pc.pointing if variant in
                    (Variant.COMBINED_SERIES, Variant.COMBINED_ASYMPTOTIC) else None, pc.series)


def _analytic(method: Method, metric: Metric, pc: PointConfig, link: LinkBudget):
    """MetricResult for one (method, metric) pair, or None if the pair has no formula."""
    avg = metric is Metric.AVG_SNR
    ew, g0 = pc.ew, link.gamma0
    if method is Method.QUADRATURE:
        m = _model(pc, link, Variant.TURB_EXACT if pc.pointing is None else Variant.COMBINED_SERIES)
        return an.avg_snr_numeric(m) if avg else an.ergodic_rate_numeric(m)
    if method is Method.KERNEL_APPROX:
        return an.avg_snr_turb_approx(ew, link) if avg else an.ergodic_rate_turb_approx(ew, link, pc.zeta)
    if method in (Method.ASYMPTOTIC, Method.ASYMPTOTIC_PATHLOSS):
        pl = link.path_loss if method is Method.ASYMPTOTIC_PATHLOSS else None
        if avg:
            return an.avg_snr_turb_asymp(ew, g0, path_loss=pl)
        return an.ergodic_rate_turb_asymp(ew, g0, path_loss=pl)
    if method is Method.SERIES:
        m = _model(pc, link, Variant.COMBINED_SERIES)
        return an.avg_snr_combined_series(m) if avg else an.ergodic_rate_combined_lb(m, Formula.DERIVED)
    if method is Method.SERIES_PRINTED:
        if avg:
            return None
        return an.ergodic_rate_combined_lb(_model(pc, link, Variant.COMBINED_SERIES), Formula.PRINTED)
    if method in (Method.ASYMPTOTIC_DERIVED, Method.ASYMPTOTIC_PRINTED):
        m = _model(pc, link, Variant.COMBINED_ASYMPTOTIC)
        f = Formula.DERIVED if method is Method.ASYMPTOTIC_DERIVED else Formula.PRINTED
        return an.avg_snr_combined_asymp(m, f) if avg else an.ergodic_rate_combined_asymp(m, f, pc.zeta)
    raise DomainError(f"method {method.value} is not available from the CLI")


def _mc_rows(pc: PointConfig, link: LinkBudget, axis_name, axis_value):
    arms = {"mc": Channel(pc.ew, pc.pointing)}
    if pc.gg is not None:
        if pc.gg.params is None:
            params, mean = moment_matched_gg(pc.ew)
        else:
            params, mean = pc.gg.params, pc.gg.mean
        arms["mc_gg"] = Channel(params, pc.pointing, mean)
    comp = compare_channels(arms, link, pc.mc, pc.metrics)
    rows = []
    for name in arms:
        for met in pc.metrics:
            e = comp.estimates[(name, met)]
            rows.append(Row(axis_name, axis_value, name, met.value, e.mean, e.stderr,
                            e.ci95_low, e.ci95_high))
    return rows


def evaluate_point(pc: PointConfig, axis_name="point", axis_value="", strict=False):
    """CSV rows for every requested method and metric at one point.

    With ``strict`` the first numerical failure is raised as
    :class:`NumericalFailure`; otherwise it becomes an error row.
    """
    rows = []
    try:
        link = pc.link()
    except (DomainError, ArithmeticError) as exc:
        if strict:
            raise NumericalFailure("link", "-", exc) from exc
        return [Row(axis_name, axis_value, "link", "-", status=_status(exc))]
    for method in pc.methods:
        for met in pc.metrics:
            try:
                res = _analytic(method, met, pc, link)
            except (DomainError, ArithmeticError) as exc:
                if strict:
                    raise NumericalFailure(method.value, met.value, exc) from exc
                rows.append(Row(axis_name, axis_value, method.value, met.value, status=_status(exc)))
                continue
            if res is None:
                continue
            rows.append(Row(axis_name, axis_value, method.value, met.value, float(res.value),
                            terms_used=res.terms_used))
    if pc.mc is not None:
        try:
            rows.extend(_mc_rows(pc, link, axis_name, axis_value))
        except (DomainError, ArithmeticError) as exc:
            if strict:
                raise NumericalFailure("mc", "-", exc) from exc
            rows.append(Row(axis_name, axis_value, "mc", "-", status=_status(exc)))
    return rows


def _status(exc) -> str:
    msg = " ".join(str(exc).split())
    return f"error: {type(exc).__name__}: {msg}"


def write_csv(rows, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow(r.cells())


def run_sweep(run: RunConfig):
    rows = []
    for v in run.points:
        pc = run.point(v)
        rows.extend(evaluate_point(pc, run.axis, v if isinstance(v, str) else float(v)))
    return rows


# ---------------------------------------------------------------------------
# Self-test
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    name: str
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.tolerance)


_IDENTITY_GRID = [(a, b) for a in (0.5, 1.0, 2.0) for b in (0.25, 1.0, 3.0)]


def identity_residuals(spec: QuadratureSpec | None = None):
    """Worst relative errors of the two incomplete-gamma integral identities.

    int t^(a-1) Gamma(b, t) dt = Gamma(a+b)/a and
    int t^(a-1) Gamma(b, t) ln t dt = Gamma(a+b)(a psi(a+b) - 1)/a^2.
    """
    spec = spec or QuadratureSpec(rel_tol=1e-10, abs_tol=0.0)
    worst_plain = worst_log = 0.0
    for a, b in _IDENTITY_GRID:
        def f(t, a=a, b=b):
            return t ** (a - 1) * upper_incomplete_gamma(b, t)

        def g(t, a=a, b=b):
            return t ** (a - 1) * upper_incomplete_gamma(b, t) * np.log(t)

        ref = gamma_fn(a + b) / a
        worst_plain = max(worst_plain, abs(integrate(f, 0, math.inf, spec).value / ref - 1))
        ref = gamma_fn(a + b) * (a * digamma(a + b) - 1) / a ** 2
        worst_log = max(worst_log, abs(integrate(g, 0, math.inf, spec).value / ref - 1))
    return worst_plain, worst_log


def _norm(pdf, upper, scale=1.0, spec=None):
    spec = spec or QuadratureSpec(rel_tol=1e-10, abs_tol=0.0)
    if math.isinf(upper):
        return integrate(pdf, 0.0, upper, spec, scale=scale).value
    return integrate(pdf, 0.0, upper, spec).value


def selftest_checks(mc_samples: int = 200_000, seed: int = 2024):
    """Run the self-test suite and return a list of :class:`Check`."""
    checks = []
    plain, logged = identity_residuals()
    checks.append(Check("identity_incomplete_gamma_moment", plain, 1e-6))
    checks.append(Check("identity_incomplete_gamma_log_moment", logged, 1e-6))

    xs = np.linspace(0.05, 45.0, 37)
    rec = max(abs(gamma_fn(x + 1) / (x * gamma_fn(x)) - 1) for x in xs)
    checks.append(Check("gamma_recurrence", rec, 1e-10))
    psi = max(abs(digamma(1.0) + 0.5772156649015329), abs(digamma(0.5) + 1.9635100260214235))
    checks.append(Check("digamma_constants", psi, 1e-10))

    ew = EwParams(2.5, 1.8, 1.1)
    checks.append(Check("norm_ew_pdf", abs(_norm(lambda h: ew_pdf(h, ew), math.inf) - 1), 1e-6))
    g = PointingGeometry(0.05, 0.25, 0.1)
    checks.append(Check("norm_pointing_pdf", abs(_norm(lambda h: pointing_pdf(h, g), g.a0) - 1), 1e-6))
    link = LinkBudget.from_gamma0(100.0)
    turb = SnrModel(Variant.TURB_EXACT, EwParams(2.5, 1.8, 1.0), link)
    checks.append(Check("norm_snr_turb_exact",
                        abs(_norm(lambda x: snr_pdf(x, turb), math.inf, turb.typical_snr()) - 1), 1e-6))
    comb = SnrModel(Variant.COMBINED_SERIES, EwParams(2.5, 1.8, 1.0), LinkBudget.from_gamma0(1e10, 0.1),
                    PointingGeometry(0.05, 0.25, 0.1))
    norm_c = _norm(lambda x: snr_pdf(x, comb), math.inf, comb.typical_snr(),
                   QuadratureSpec(rel_tol=1e-8, abs_tol=0.0))
    checks.append(Check("norm_snr_combined_series", abs(norm_c - 1), 1e-3))

    series = an.avg_snr_combined_series(comb).value
    quad = an.avg_snr_numeric(comb).value
    checks.append(Check("series_avg_snr_vs_quadrature", abs(series / quad - 1), 1e-3))

    asym = SnrModel(Variant.TURB_ASYMPTOTIC, ew, LinkBudget.from_gamma0(1e6))
    closed = an.avg_snr_turb_asymp(ew, 1e6).value
    checks.append(Check("turb_asymptotic_vs_quadrature",
                        abs(an.avg_snr_numeric(asym).value / closed - 1), 1e-8))

    weibull = SnrModel(Variant.TURB_EXACT, EwParams(1.0, 2.0, 1.0), LinkBudget.from_gamma0(1e3))
    checks.append(Check("weibull_avg_snr_analytic", abs(an.avg_snr_numeric(weibull).value / 1e3 - 1), 1e-8))

    cfg = MonteCarloConfig(mc_samples, seed)
    for name, p in (("oracle_chain_ew_2.5_1.8", EwParams(2.5, 1.8, 1.0)),
                    ("oracle_chain_ew_1_2", EwParams(1.0, 2.0, 1.0))):
        lk = LinkBudget.from_gamma0(1e3, 0.5)
        quad = an.avg_snr_numeric(SnrModel(Variant.TURB_EXACT, p, lk)).value
        est = mc_estimate(Metric.AVG_SNR, Channel(p), lk, cfg)
        checks.append(Check(name, abs(est.mean - quad) / est.stderr, 3.0))
    return checks


# ---------------------------------------------------------------------------
# Argument handling
# ---------------------------------------------------------------------------

def _apply_overrides(run: RunConfig, args) -> RunConfig:
    seed = args.seed
    workers = args.workers
    try:
        if seed is None and os.environ.get(ENV_SEED):
            seed = int(os.environ[ENV_SEED])
        if workers is None and os.environ.get(ENV_WORKERS):
            workers = int(os.environ[ENV_WORKERS])
    except ValueError as exc:
        raise ConfigError(f"bad environment override: {exc}") from None
    base = run.base
    mc = base.mc
    if args.mc_samples is not None and mc is None:
        mc = MonteCarloConfig(args.mc_samples)
    if mc is not None:
        try:
            mc = mc.with_overrides(n_samples=args.mc_samples, seed=seed, n_workers=workers)
        except DomainError as exc:
            raise ConfigError(str(exc), None, "<command line>") from None
        if mc.n_samples < 30:
            raise ConfigError("--mc-samples must be at least 30", None, "<command line>")
    if mc is base.mc:
        return run
    new_raw = dict(run.raw)
    new_raw["mc"] = {"n_samples": mc.n_samples, "seed": mc.seed, "n_workers": mc.n_workers,
                     "block_size": mc.block_size}
    return replace(run, base=replace(base, mc=mc), raw=new_raw)


def _load(args, require_sweep=False) -> RunConfig:
    run = load_config_file(args.config, require_sweep)
    return _apply_overrides(run, args)


def _format_table(rows, out):
    mc = {r.metric: r for r in rows if r.method == "mc" and r.ok}
    head = f"{'method':<22}{'metric':<14}{'value':>16}{'terms':>7}{'mc':>16}{'rel gap':>11}"
    print(head, file=out)
    print("-" * len(head), file=out)
    for r in rows:
        ref = mc.get(r.metric)
        if not r.ok:
            print(f"{r.method:<22}{r.metric:<14}  {r.status}", file=out)
            continue
        val = f"{r.value:16.6g}"
        terms = "" if r.terms_used is None else str(r.terms_used)
        if ref is not None and r.method != "mc":
            mcv = f"{ref.value:16.6g}"
            gap = f"{(r.value - ref.value) / abs(ref.value):11.3e}" if ref.value else f"{'n/a':>11}"
        else:
            mcv, gap = f"{'':>16}", f"{'':>11}"
        if r.method.startswith("mc"):
            terms = ""
            val = f"{r.value:16.6g}"
            mcv = f"+-{1.96 * r.stderr:14.3g}"
        print(f"{r.method:<22}{r.metric:<14}{val}{terms:>7}{mcv}{gap}", file=out)


def cmd_analyze(args) -> int:
    run = _load(args)
    pc = run.base
    try:
        rows = evaluate_point(pc, strict=True)
    except NumericalFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    link = pc.link()
    print(f"preset {pc.preset.name}: P_t = {pc.transmit_power_dbm} dBm, d = {pc.distance_m} m, "
          f"gamma0 = {link.gamma0:.6g}, L = {link.path_loss:.6g}")
    print(f"EW alpha={pc.ew.alpha} beta={pc.ew.beta} eta={pc.ew.eta}; pointing "
          + ("off" if pc.pointing is None else
             f"A0={pc.pointing.a0:.6g} rho={pc.pointing.rho if pc.pointing.is_symmetric else float('nan'):.6g}"))
    print()
    _format_table(rows, sys.stdout)
    if not args.no_report:
        print()
        print("compatibility report (published form vs reference)")
        try:
            entries = an.compatibility_report(pc.ew, link, pc.pointing, pc.zeta)
        except (DomainError, ArithmeticError) as exc:
            print(f"error: compatibility report failed: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        for e in entries:
            print(f"  {e.name:<30}{e.published:16.6g}{e.reference:16.6g}  ({e.reference_kind}) "
                  f"rel {e.rel_diff:.3e}  {e.note}")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            write_csv(rows, fh)
    return EXIT_OK


def cmd_sweep(args) -> int:
    run = _load(args, require_sweep=True)
    rows = run_sweep(run)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            write_csv(rows, fh)
    else:
        buf = io.StringIO()
        write_csv(rows, buf)
        sys.stdout.write(buf.getvalue())
    failed = [r for r in rows if not r.ok]
    for r in failed:
        print(f"row failed at {r.axis_name}={r.axis_value}: {r.method} {r.metric}: {r.status}",
              file=sys.stderr)
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_selftest(args) -> int:
    checks = selftest_checks(args.mc_samples or 200_000, 2024 if args.seed is None else args.seed)
    if args.tolerance is not None:
        checks = [replace(c, tolerance=args.tolerance) for c in checks]
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:<40} residual={c.residual:.3e} "
              f"tolerance={c.tolerance:.1e}")
    failures = [{"name": c.name, "residual": c.residual, "tolerance": c.tolerance}
                for c in checks if not c.passed]
    print(json.dumps({"passed": len(checks) - len(failures), "failed": failures}))
    return EXIT_SELFTEST if failures else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="owclink", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help=f"Monte Carlo seed (env {ENV_SEED})")
    common.add_argument("--workers", type=int, help=f"Monte Carlo worker threads (env {ENV_WORKERS})")
    common.add_argument("--mc-samples", type=int, help="Monte Carlo sample count")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="evaluate every method at one parameter point")
    p.add_argument("config")
    p.add_argument("--csv", help="also write the rows as CSV to this path")
    p.add_argument("--no-report", action="store_true", help="skip the compatibility report")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", parents=[common], help="evaluate along one axis and emit CSV")
    p.add_argument("config")
    p.add_argument("-o", "--output", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("selftest", parents=[common], help="identities, normalization and oracle checks")
    p.add_argument("--tolerance", type=float, help="force every check to this tolerance")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
