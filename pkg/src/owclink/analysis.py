"""Average SNR and ergodic rate: quadrature baselines and closed forms.

Every closed form here can be checked against :func:`avg_snr_numeric`,
:func:`ergodic_rate_numeric` or :func:`mean_log2_snr_numeric`, which
integrate the corresponding SNR density directly.

Rates are in bits/s/Hz. Closed forms that were published with a ``log``
are read as natural logarithms with explicit ``log 4 = 2 ln 2`` factors.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import special as _sp

from .channels import (
    EwParams,
    LinkBudget,
    PointingGeometry,
    SeriesControl,
    SnrModel,
    Variant,
    beckmann_mgf,
    binomial_series_coefficients,
    combined_asymptotic_peak,
    is_integer_alpha,
    snr_pdf,
)
from .errors import DomainError, SeriesConvergenceError
from .special_math import QuadratureSpec, digamma, gamma_fn, integrate, log_gamma_ratio

DEFAULT_ZETA = 8
LN2 = math.log(2.0)


class Method(str, enum.Enum):
    QUADRATURE = "quadrature"
    KERNEL_APPROX = "kernel_approx"
    SERIES = "series"
    SERIES_PRINTED = "series_printed"
    ASYMPTOTIC = "asymptotic"
    ASYMPTOTIC_PATHLOSS = "asymptotic_pathloss"
    ASYMPTOTIC_PRINTED = "asymptotic_printed"
    ASYMPTOTIC_DERIVED = "asymptotic_derived"


class Formula(str, enum.Enum):
    PRINTED = "printed"
    DERIVED = "derived"


_SERIES_METHODS = (Method.SERIES, Method.SERIES_PRINTED)


@dataclass(frozen=True)
class MetricResult:
    value: float
    method: Method
    error_estimate: float | None = None
    terms_used: int | None = None

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ArithmeticError(f"{Method(self.method).value} produced a non-finite value")
        if (self.terms_used is not None) != (self.method in _SERIES_METHODS):
            raise ValueError("terms_used is reported for series methods only")


def _check_zeta(zeta) -> int:
    if int(zeta) != zeta or zeta < 1:
        raise DomainError(f"zeta must be a positive integer, got {zeta}")
    return int(zeta)


# ---------------------------------------------------------------------------
# Quadrature baselines
# ---------------------------------------------------------------------------

def _density_setup(m, support, scale):
    if isinstance(m, SnrModel):
        return (lambda g: snr_pdf(g, m)), m.support_upper(), m.typical_snr()
    if not callable(m):
        raise TypeError("expected an SnrModel or a density callable")
    return m, (math.inf if support is None else support), (1.0 if scale is None else scale)


def _expectation(weight, m, spec, support, scale):
    pdf, upper, scl = _density_setup(m, support, scale)
    spec = spec or QuadratureSpec()

    def integrand(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = weight(g) * pdf(g)
        return vals

    if math.isinf(upper):
        return integrate(integrand, 0.0, math.inf, spec, scale=scl)
    return integrate(integrand, 0.0, upper, spec)


def avg_snr_numeric(m: SnrModel | Callable, spec: QuadratureSpec | None = None, *,
                    support: float | None = None, scale: float | None = None) -> MetricResult:
    """Mean SNR by direct quadrature of gamma * f(gamma).

    ``m`` may also be a bare density callable, in which case ``support``
    (upper limit, default inf) and ``scale`` describe it.
    """
    res = _expectation(lambda g: g, m, spec, support, scale)
    return MetricResult(res.value, Method.QUADRATURE, error_estimate=res.error)


def ergodic_rate_numeric(m: SnrModel | Callable, spec: QuadratureSpec | None = None, *,
                         support: float | None = None, scale: float | None = None) -> MetricResult:
    """E[log2(1 + gamma)] by quadrature."""
    res = _expectation(lambda g: np.log1p(g) / LN2, m, spec, support, scale)
    return MetricResult(res.value, Method.QUADRATURE, error_estimate=res.error)


def mean_log2_snr_numeric(m: SnrModel | Callable, spec: QuadratureSpec | None = None, *,
                          support: float | None = None, scale: float | None = None) -> MetricResult:
    """E[log2 gamma] by quadrature; the quantity the high-SNR bounds target."""
    res = _expectation(lambda g: np.log(g) / LN2, m, spec, support, scale)
    return MetricResult(res.value, Method.QUADRATURE, error_estimate=res.error)


# ---------------------------------------------------------------------------
# Turbulence only: kernel approximation and power-law asymptotics
# ---------------------------------------------------------------------------

def _inv_root_snr(link: LinkBudget) -> float:
    return 1.0 / math.sqrt(link.gamma0 * link.path_loss ** 2)


def avg_snr_turb_approx(p: EwParams, link: LinkBudget) -> MetricResult:
    """Average SNR from the kernel-approximated turbulence density.

    Needs alpha >= 1; at alpha = 1 the correction term is taken at its
    limit of zero.
    """
    a, b, e = p.alpha, p.beta, p.eta
    if a < 1:
        raise DomainError("the kernel approximation needs alpha >= 1")
    x = _inv_root_snr(link)
    lead = (b * x / e) ** (-b)
    if a == 1:
        corr = 0.0
    else:
        k = (a - 1) * b * b + 1
        corr = (a - 1) ** 2 * b ** 4 * (x * k / ((a - 1) * b * e)) ** (-b) / k ** 2
    value = a * (b + 1) / b * e ** (2 - b) * x ** (b - 2) * gamma_fn(b + 1) * (lead - corr)
    return MetricResult(value, Method.KERNEL_APPROX)


def ergodic_rate_turb_approx(p: EwParams, link: LinkBudget, zeta: int = DEFAULT_ZETA) -> MetricResult:
    """Ergodic-rate approximation built on log(g) <= zeta (g^(1/zeta) - 1)."""
    z = _check_zeta(zeta)
    a, b, e = p.alpha, p.beta, p.eta
    x = _inv_root_snr(link)
    near = b * x / e
    far = x * (a * b * b + 2) / (a * b * e)
    first = 2 * gamma_fn(b + 2 / z) * (near ** (-(b * z + 2) / z) - far ** (-b - 2 / z))
    second = 2 * gamma_fn(b) * (far ** (-b) - near ** (-b))
    value = a * b * z / math.log(4) * e ** (-b) * x ** b * (first + second)
    return MetricResult(value, Method.KERNEL_APPROX)


def approx_kernel_error(a: float, b: float, x_grid: Sequence[float]) -> float:
    """Max relative error of (1 - e^{-x^a})^b ~ 1 - e^{-x/(ab)} over ``x_grid``."""
    if not (a > 0 and b > 0):
        raise DomainError("a and b must be positive")
    x = np.asarray(x_grid, dtype=float)
    exact = (-np.expm1(-x ** a)) ** b
    approx = -np.expm1(-x / (a * b))
    return float(np.max(np.abs(approx - exact) / np.abs(exact)))


def avg_snr_turb_asymp(p: EwParams, gamma0: float, path_loss: float | None = None) -> MetricResult:
    """High-SNR average SNR alpha*beta*eta^2*gamma0 / (2 + alpha*beta).

    With ``path_loss`` given, gamma0 is replaced by gamma0 * L^2.
    """
    k = p.alpha * p.beta
    scale = gamma0 if path_loss is None else gamma0 * path_loss ** 2
    method = Method.ASYMPTOTIC if path_loss is None else Method.ASYMPTOTIC_PATHLOSS
    return MetricResult(k * p.eta ** 2 / (2 + k) * scale, method)


def ergodic_rate_turb_asymp(p: EwParams, gamma0: float, path_loss: float | None = None) -> MetricResult:
    """High-SNR rate 2/(alpha*beta*log 4) * (alpha*beta*log(eta^2 gamma0) - 2)."""
    k = p.alpha * p.beta
    scale = gamma0 if path_loss is None else gamma0 * path_loss ** 2
    method = Method.ASYMPTOTIC if path_loss is None else Method.ASYMPTOTIC_PATHLOSS
    value = 2 / (k * math.log(4)) * (-2 + k * math.log(p.eta ** 2 * scale))
    return MetricResult(value, method)


# ---------------------------------------------------------------------------
# Turbulence with pointing error: binomial series
# ---------------------------------------------------------------------------

def _series_constants(m: SnrModel):
    if m.variant is not Variant.COMBINED_SERIES:
        raise DomainError("series expressions need a combined_series model")
    ew, g = m.ew, m.pointing
    r2 = g.rho ** 2
    tau = 1 - r2 / ew.beta
    log_k = math.log(m.link.path_loss * ew.eta * g.a0) + 0.5 * math.log(m.link.gamma0)
    log_b1 = math.log(ew.alpha * r2 / 2) - r2 * log_k
    return ew.alpha, ew.beta, r2, tau, log_k, log_b1


def _sum_binomial_series(alpha: float, weight: Callable, ctl: SeriesControl):
    """sum_j c_j w(j) with c_j the (1 - x)^(alpha - 1) coefficients.

    For integer alpha the sum is finite. Otherwise the first ``max_terms``
    terms are added directly and the remainder by Euler-Maclaurin, using the
    gamma-ratio continuation of c_j. Raises if the remainder cannot be
    pinned to ``rel_term_tol``.

    Returns (value, terms_used, error_estimate).
    """
    if is_integer_alpha(alpha) and ctl.max_terms >= alpha:
        n = int(round(alpha))
        j = np.arange(n, dtype=float)
        terms = binomial_series_coefficients(alpha, n) * weight(j)
        return float(np.sum(terms)), n, 0.0

    n = ctl.max_terms
    c = binomial_series_coefficients(alpha, n + 1)
    j = np.arange(n, dtype=float)
    terms = c[:n] * weight(j)
    partial = float(np.sum(terms))
    if n <= alpha + 1:
        last = abs(terms[-1])
        if last > ctl.rel_term_tol * abs(partial):
            raise SeriesConvergenceError(
                f"series not converged in {n} terms; the tail is not yet monotone", partial, last)
        return partial, n, last

    c_n = c[n]
    lg_ref = log_gamma_ratio(float(n), 1 - alpha, 1.0)

    def cont(x):
        x = np.asarray(x, dtype=float)
        ratio = np.exp(log_gamma_ratio(x, 1 - alpha, 1.0) - lg_ref)
        return c_n * ratio * weight(x)

    # x = n e^s turns the algebraic decay of the remainder into exponential decay.
    def in_log(s):
        with np.errstate(over="ignore", invalid="ignore"):
            x = n * np.exp(s)
            vals = cont(x) * x
        return np.where(x < 1e250, vals, 0.0)

    tail_int = integrate(in_log, 0.0, math.inf,
                         QuadratureSpec(rel_tol=1e-10, abs_tol=1e-300), scale=2.0)
    f = cont(np.array([n - 0.5, n, n + 0.5, n + 1.0, n + 2.0, n + 3.0]))
    deriv = f[2] - f[0]
    tail = tail_int.value + 0.5 * f[1] - deriv / 12
    third = f[5] - 3 * f[4] + 3 * f[3] - f[1]
    err = abs(third) / 720 + tail_int.error
    value = partial + tail
    if err > ctl.rel_term_tol * abs(value):
        raise SeriesConvergenceError(
            f"series remainder uncertain after {n} terms ({err:.3g})", value, err)
    return value, n, err


def avg_snr_combined_series(m: SnrModel) -> MetricResult:
    """Average SNR under turbulence and pointing error as a binomial series."""
    alpha, beta, r2, tau, log_k, log_b1 = _series_constants(m)
    s = (2 + r2) / beta
    log_const = log_b1 + math.log(2 / (2 + r2)) + float(_sp.gammaln(tau + s))

    def weight(j):
        log_b2 = np.log1p(j) - beta * log_k
        return np.exp(log_const - s * log_b2 - tau * np.log1p(j))

    value, used, err = _sum_binomial_series(alpha, weight, m.series)
    return MetricResult(value, Method.SERIES, error_estimate=abs(err), terms_used=used)


def ergodic_rate_combined_lb(m: SnrModel, formula: Formula | str = Formula.DERIVED) -> MetricResult:
    """Lower bound E[log2 gamma] <= E[log2(1 + gamma)] as a binomial series.

    ``formula="derived"`` carries the prefactor -4 B1 / (ln2 beta rho^4)
    obtained by integrating the series density term by term. The
    ``"printed"`` form has rho^2 in place of rho^4 and overstates the
    bound by a factor rho^2; it is kept for comparison only.
    """
    formula = Formula(formula)
    alpha, beta, r2, tau, log_k, log_b1 = _series_constants(m)
    a = r2 / beta
    power = r2 if formula is Formula.PRINTED else r2 * r2
    psi = digamma(tau + a)
    gam = gamma_fn(tau + a)
    # B1 * B2^(-a) does not depend on the channel scale; combine in logs.
    log_scale = log_b1 + a * beta * log_k

    def weight(j):
        log_b2 = np.log1p(j) - beta * log_k
        core = np.exp(log_scale - a * np.log1p(j) - tau * np.log1p(j))
        return core * gam * (beta + r2 * log_b2 - r2 * psi)

    value, used, err = _sum_binomial_series(alpha, weight, m.series)
    factor = -4 / (LN2 * beta * power)
    method = Method.SERIES if formula is Formula.DERIVED else Method.SERIES_PRINTED
    return MetricResult(factor * value, method, error_estimate=abs(factor * err), terms_used=used)


# ---------------------------------------------------------------------------
# Turbulence with pointing error: high-SNR power law
# ---------------------------------------------------------------------------

def _asymp_parts(m: SnrModel):
    if m.variant is not Variant.COMBINED_ASYMPTOTIC:
        raise DomainError("asymptotic expressions need a combined_asymptotic model")
    k = m.ew.alpha * m.ew.beta
    mgf = beckmann_mgf(2 * k / m.pointing.w_zeq_m ** 2, m.pointing)
    base = m.link.path_loss * m.ew.eta * m.pointing.a0
    peak = combined_asymptotic_peak(m.ew, m.pointing, m.link)
    return k, mgf, base, peak


def avg_snr_combined_asymp(m: SnrModel, formula: Formula | str = Formula.DERIVED) -> MetricResult:
    """High-SNR average SNR with pointing error.

    ``derived``: alpha*beta*D^2*gamma0/(2 + alpha*beta), the mean of the
    power-law density on [0, D^2 gamma0]. ``printed``: the published
    expression with exponent 1 - 3/(alpha*beta), which does not follow
    from that density.
    """
    formula = Formula(formula)
    k, mgf, base, peak = _asymp_parts(m)
    g0 = m.link.gamma0
    if formula is Formula.DERIVED:
        return MetricResult(k * peak ** 2 * g0 / (2 + k), Method.ASYMPTOTIC_DERIVED)
    value = g0 * k / (2 + k) * (mgf / base ** k) ** (1 - 3 / k)
    return MetricResult(value, Method.ASYMPTOTIC_PRINTED)


def ergodic_rate_combined_asymp(m: SnrModel, formula: Formula | str = Formula.DERIVED,
                                zeta: int = DEFAULT_ZETA) -> MetricResult:
    """High-SNR ergodic rate with pointing error.

    ``derived``: log2(D^2 gamma0) - 2/(alpha*beta*ln 2), which is
    E[log2 gamma] under the power-law density. ``printed`` evaluates the
    published expression, which depends on ``zeta``.
    """
    formula = Formula(formula)
    k, mgf, base, peak = _asymp_parts(m)
    g0 = m.link.gamma0
    if formula is Formula.DERIVED:
        value = math.log2(peak ** 2 * g0) - 2 / (k * LN2)
        return MetricResult(value, Method.ASYMPTOTIC_DERIVED)
    z = _check_zeta(zeta)
    beta = m.ew.beta
    coeff = k * mgf / base ** k
    value = (2 * g0 * coeff * (z / g0) ** ((k + 1) / 2)
             * (k * math.log(z) - 2) / (m.ew.alpha * beta ** 2 * math.sqrt(g0 * z) * math.log(4)))
    return MetricResult(value, Method.ASYMPTOTIC_PRINTED)


# ---------------------------------------------------------------------------
# Compatibility report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CompatEntry:
    """One published closed form set against a reference value."""

    name: str
    published: float
    reference: float
    reference_kind: str
    note: str = ""

    @property
    def abs_diff(self) -> float:
        return self.published - self.reference

    @property
    def rel_diff(self) -> float:
        return (self.published - self.reference) / abs(self.reference) if self.reference else math.inf


def compatibility_report(ew: EwParams, link: LinkBudget, pointing: PointingGeometry | None = None,
                         zeta: int = DEFAULT_ZETA,
                         spec: QuadratureSpec | None = None) -> list[CompatEntry]:
    """Quantify where the published closed forms depart from direct integration."""
    spec = spec or QuadratureSpec(rel_tol=1e-10, abs_tol=0.0)
    rows: list[CompatEntry] = []
    turb = SnrModel(Variant.TURB_EXACT, ew, link)
    exact_snr = avg_snr_numeric(turb, spec).value
    exact_rate = ergodic_rate_numeric(turb, spec).value
    if ew.alpha >= 1:
        rows.append(CompatEntry("turb_avg_snr_kernel_approx", avg_snr_turb_approx(ew, link).value,
                                exact_snr, "quadrature", "kernel approximation of the EW density"))
    rows.append(CompatEntry("turb_rate_kernel_approx", ergodic_rate_turb_approx(ew, link, zeta).value,
                            exact_rate, "quadrature", f"zeta={zeta}"))
    rows.append(CompatEntry("turb_avg_snr_asymptotic", avg_snr_turb_asymp(ew, link.gamma0).value,
                            avg_snr_turb_asymp(ew, link.gamma0, link.path_loss).value,
                            "asymptotic_pathloss", "published form omits the path loss"))
    rows.append(CompatEntry("turb_rate_asymptotic", ergodic_rate_turb_asymp(ew, link.gamma0).value,
                            ergodic_rate_turb_asymp(ew, link.gamma0, link.path_loss).value,
                            "asymptotic_pathloss", "published form omits the path loss"))
    if pointing is None:
        return rows
    if pointing.is_symmetric:
        series = SnrModel(Variant.COMBINED_SERIES, ew, link, pointing)
        rows.append(CompatEntry("combined_rate_series",
                                ergodic_rate_combined_lb(series, Formula.PRINTED).value,
                                ergodic_rate_combined_lb(series, Formula.DERIVED).value,
                                "series_derived", "published prefactor has rho^2 where rho^4 is needed"))
    try:
        asym = SnrModel(Variant.COMBINED_ASYMPTOTIC, ew, link, pointing)
        rows.append(CompatEntry("combined_avg_snr_asymptotic",
                                avg_snr_combined_asymp(asym, Formula.PRINTED).value,
                                avg_snr_combined_asymp(asym, Formula.DERIVED).value,
                                "asymptotic_derived", "published exponent 1 - 3/(alpha beta)"))
        rows.append(CompatEntry("combined_rate_asymptotic",
                                ergodic_rate_combined_asymp(asym, Formula.PRINTED, zeta).value,
                                ergodic_rate_combined_asymp(asym, Formula.DERIVED).value,
                                "asymptotic_derived", f"published form depends on zeta={zeta}"))
    except (DomainError, ArithmeticError) as exc:
        rows.append(CompatEntry("combined_asymptotic", math.nan, math.nan, "n/a", str(exc)))
    return rows
