"""Channel models for a single optical wireless link.

The channel gain is h = L * h_a * h_p: deterministic Beer-Lambert path loss
L, exponentiated Weibull (EW) turbulence h_a and pointing-error loss h_p.
The electrical SNR is gamma = gamma0 * h**2.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, SeriesConvergenceError
from .special_math import QuadratureSpec, _upper_gamma_xpow, integrate, log_gamma_ratio

# Uniform draws are clamped to (UNIFORM_EPS, 1 - UNIFORM_EPS) before inversion.
UNIFORM_EPS = 1e-16


def _out(values, *inputs):
    if all(np.ndim(v) == 0 for v in inputs):
        return float(values)
    return values


@dataclass(frozen=True)
class EwParams:
    """Exponentiated Weibull turbulence parameters.

    alpha is the aperture-dependent extra shape, beta the scintillation
    shape and eta the irradiance scale.
    """

    alpha: float
    beta: float
    eta: float

    def __post_init__(self):
        for name in ("alpha", "beta", "eta"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"EwParams.{name} must be a positive finite number, got {value}")


@dataclass(frozen=True)
class PointingGeometry:
    """Receiver aperture, beam footprint and jitter/boresight statistics (metres).

    ``sigma_y_m`` defaults to ``sigma_x_m``. The single-parameter pointing
    density needs equal jitters and zero boresight; other geometries are
    still valid for the Beckmann MGF and the sampler.
    """

    aperture_radius_m: float
    beam_width_m: float
    sigma_x_m: float
    sigma_y_m: float | None = None
    mu_x_m: float = 0.0
    mu_y_m: float = 0.0

    def __post_init__(self):
        if self.sigma_y_m is None:
            object.__setattr__(self, "sigma_y_m", self.sigma_x_m)
        for name in ("aperture_radius_m", "beam_width_m", "sigma_x_m", "sigma_y_m"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"PointingGeometry.{name} must be positive, got {value}")
        for name in ("mu_x_m", "mu_y_m"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise DomainError(f"PointingGeometry.{name} must be non-negative, got {value}")
        if not 0 < self.a0 < 1:
            raise DomainError("aperture/beam ratio gives A0 outside (0, 1)")

    @property
    def upsilon(self) -> float:
        return math.sqrt(math.pi / 2) * self.aperture_radius_m / self.beam_width_m

    @property
    def a0(self) -> float:
        """Fraction of power collected with zero displacement."""
        return math.erf(self.upsilon) ** 2

    @property
    def w_zeq_m(self) -> float:
        """Equivalent beam width at the receiver."""
        v = self.upsilon
        ratio = math.sqrt(math.pi) * math.erf(v) / (2 * v * math.exp(-v * v))
        return self.beam_width_m * math.sqrt(ratio)

    @property
    def is_symmetric(self) -> bool:
        return self.sigma_x_m == self.sigma_y_m and self.mu_x_m == 0 and self.mu_y_m == 0

    @property
    def sigma_s_m(self) -> float:
        if self.sigma_x_m != self.sigma_y_m:
            raise DomainError("a single jitter sigma_s exists only when sigma_x == sigma_y")
        return self.sigma_x_m

    @property
    def rho(self) -> float:
        """Ratio of equivalent beam width to twice the jitter standard deviation."""
        return self.w_zeq_m / (2 * self.sigma_s_m)


@dataclass(frozen=True)
class LinkBudget:
    """Transmitter/receiver constants, SI units throughout."""

    pt_watts: float
    responsivity: float
    noise_variance: float
    atten_coeff_per_m: float = 0.0
    distance_m: float = 0.0

    def __post_init__(self):
        for name in ("pt_watts", "responsivity", "noise_variance"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"LinkBudget.{name} must be positive, got {value}")
        if not (self.distance_m >= 0 and math.isfinite(self.distance_m)):
            raise DomainError("LinkBudget.distance_m must be non-negative")
        if not (self.atten_coeff_per_m >= 0 and math.isfinite(self.atten_coeff_per_m)):
            raise DomainError("LinkBudget.atten_coeff_per_m must be non-negative")

    @classmethod
    def from_gamma0(cls, gamma0: float, path_loss: float = 1.0) -> "LinkBudget":
        """Budget with a prescribed SNR scale and path loss (1 m link, unit power)."""
        if not gamma0 > 0:
            raise DomainError("gamma0 must be positive")
        if not 0 < path_loss <= 1:
            raise DomainError("path_loss must lie in (0, 1]")
        return cls(pt_watts=1.0, responsivity=1.0, noise_variance=2.0 / gamma0,
                   atten_coeff_per_m=-math.log(path_loss), distance_m=1.0)

    @property
    def gamma0(self) -> float:
        return 2 * self.pt_watts ** 2 * self.responsivity ** 2 / self.noise_variance

    @property
    def path_loss(self) -> float:
        return math.exp(-self.atten_coeff_per_m * self.distance_m)

    def with_gamma0_scaled(self, k: float) -> "LinkBudget":
        """Copy whose gamma0 is multiplied by k (noise variance divided by k)."""
        return LinkBudget(self.pt_watts, self.responsivity, self.noise_variance / k,
                          self.atten_coeff_per_m, self.distance_m)


@dataclass(frozen=True)
class SeriesControl:
    max_terms: int = 200
    rel_term_tol: float = 1e-12

    def __post_init__(self):
        if self.max_terms < 1:
            raise DomainError("max_terms must be at least 1")
        if not self.rel_term_tol > 0:
            raise DomainError("rel_term_tol must be positive")


class Variant(str, enum.Enum):
    TURB_EXACT = "turb_exact"
    TURB_ASYMPTOTIC = "turb_asymptotic"
    COMBINED_SERIES = "combined_series"
    COMBINED_ASYMPTOTIC = "combined_asymptotic"


@dataclass(frozen=True)
class SnrModel:
    """Which SNR distribution to use, with everything needed to evaluate it."""

    variant: Variant
    ew: EwParams
    link: LinkBudget
    pointing: PointingGeometry | None = None
    series: SeriesControl = field(default_factory=SeriesControl)

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        combined = self.variant in (Variant.COMBINED_SERIES, Variant.COMBINED_ASYMPTOTIC)
        if combined and self.pointing is None:
            raise DomainError(f"{self.variant.value} requires a pointing geometry")
        if not combined and self.pointing is not None:
            raise DomainError(f"{self.variant.value} assumes no pointing error (h_p = 1)")
        if self.variant is Variant.COMBINED_SERIES and not self.pointing.is_symmetric:
            raise DomainError("the series density needs sigma_x == sigma_y and zero boresight")

    @property
    def snr_scale(self) -> float:
        """gamma0 * L**2."""
        return self.link.gamma0 * self.link.path_loss ** 2

    def support_upper(self) -> float:
        """Upper end of the SNR support (inf for the untruncated densities)."""
        if self.variant is Variant.TURB_ASYMPTOTIC:
            return self.ew.eta ** 2 * self.snr_scale
        if self.variant is Variant.COMBINED_ASYMPTOTIC:
            return combined_asymptotic_peak(self.ew, self.pointing, self.link) ** 2 * self.link.gamma0
        return math.inf

    def typical_snr(self) -> float:
        """A characteristic SNR, used to scale quadrature transforms."""
        if self.variant is Variant.COMBINED_SERIES:
            return (self.ew.eta * self.pointing.a0) ** 2 * self.snr_scale
        return self.ew.eta ** 2 * self.snr_scale


# ---------------------------------------------------------------------------
# Exponentiated Weibull turbulence
# ---------------------------------------------------------------------------

def _ew_pdf_at_zero(p: EwParams) -> float:
    k = p.alpha * p.beta
    if k > 1:
        return 0.0
    if k < 1:
        return math.inf
    return p.alpha * p.beta / p.eta


def ew_pdf(h, p: EwParams):
    """Density of the EW turbulence gain."""
    h_arr = np.asarray(h, dtype=float)
    if np.any(h_arr < 0):
        raise DomainError("ew_pdf requires h >= 0")
    out = np.empty(h_arr.shape)
    pos = h_arr > 0
    hp = h_arr[pos] / p.eta
    with np.errstate(divide="ignore", over="ignore"):
        z = hp ** p.beta
        logf = (math.log(p.alpha * p.beta / p.eta) + (p.beta - 1) * np.log(hp) - z
                + (p.alpha - 1) * np.log(-np.expm1(-z)))
    out[pos] = np.exp(logf)
    out[~pos] = _ew_pdf_at_zero(p)
    return _out(out, h)


def ew_cdf(h, p: EwParams):
    """Distribution function [1 - exp(-(h/eta)^beta)]^alpha."""
    h_arr = np.asarray(h, dtype=float)
    if np.any(h_arr < 0):
        raise DomainError("ew_cdf requires h >= 0")
    z = (h_arr / p.eta) ** p.beta
    with np.errstate(divide="ignore"):
        out = np.exp(p.alpha * np.log(-np.expm1(-z)))
    return _out(out, h)


def ew_ppf(u, p: EwParams):
    """Inverse of :func:`ew_cdf` for u in (0, 1)."""
    u_arr = np.clip(np.asarray(u, dtype=float), UNIFORM_EPS, 1 - UNIFORM_EPS)
    out = p.eta * (-np.log(-np.expm1(np.log(u_arr) / p.alpha))) ** (1 / p.beta)
    return _out(out, u)


def ew_sample(p: EwParams, rng: np.random.Generator, size=None):
    """Draw EW variates by inverse transform of uniforms from ``rng``."""
    return ew_ppf(rng.random(size), p)


def ew_moment(p: EwParams, order: float, spec: QuadratureSpec | None = None) -> float:
    """E[h_a**order] by quadrature of the density."""
    spec = spec or QuadratureSpec(rel_tol=1e-11, abs_tol=0.0)
    return integrate(lambda h: h ** order * ew_pdf(h, p), 0.0, np.inf, spec, scale=p.eta).value


def ew_scintillation_index(p: EwParams) -> float:
    m1 = ew_moment(p, 1)
    return ew_moment(p, 2) / m1 ** 2 - 1


# ---------------------------------------------------------------------------
# Pointing error
# ---------------------------------------------------------------------------

def _require_symmetric(g: PointingGeometry):
    if not g.is_symmetric:
        raise DomainError("closed-form pointing density needs sigma_x == sigma_y and zero boresight")


def pointing_pdf(hp, g: PointingGeometry):
    """Density rho^2 / A0^rho^2 * hp^(rho^2 - 1) on [0, A0], zero elsewhere."""
    _require_symmetric(g)
    r2, a0 = g.rho ** 2, g.a0
    x = np.asarray(hp, dtype=float)
    inside = (x >= 0) & (x <= a0)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = r2 / a0 * (x / a0) ** (r2 - 1)
    out = np.where(inside, vals, 0.0)
    return _out(out, hp)


def pointing_cdf(hp, g: PointingGeometry):
    _require_symmetric(g)
    x = np.clip(np.asarray(hp, dtype=float) / g.a0, 0.0, 1.0)
    return _out(x ** (g.rho ** 2), hp)


def pointing_sample(g: PointingGeometry, rng: np.random.Generator, size=None):
    """Collected-power fraction for Gaussian radial displacement.

    x ~ N(mu_x, sigma_x), y ~ N(mu_y, sigma_y) and
    hp = A0 * exp(-2 r^2 / w_zeq^2) with r^2 = x^2 + y^2.
    """
    n = 1 if size is None else size
    z = rng.standard_normal((2,) + np.shape(np.empty(n)))
    x = g.mu_x_m + g.sigma_x_m * z[0]
    y = g.mu_y_m + g.sigma_y_m * z[1]
    out = g.a0 * np.exp(-2 * (x * x + y * y) / g.w_zeq_m ** 2)
    return float(out[0]) if size is None else out


def beckmann_mgf(t, g: PointingGeometry):
    """MGF of the squared radial displacement r^2 = x^2 + y^2 (squared Beckmann)."""
    t_arr = np.asarray(t, dtype=float)
    dx = 1 - 2 * t_arr * g.sigma_x_m ** 2
    dy = 1 - 2 * t_arr * g.sigma_y_m ** 2
    if np.any(dx <= 0) or np.any(dy <= 0):
        raise DomainError("Beckmann MGF diverges: need 1 - 2 t sigma^2 > 0 on both axes")
    out = np.exp(g.mu_x_m ** 2 * t_arr / dx + g.mu_y_m ** 2 * t_arr / dy) / np.sqrt(dx * dy)
    return _out(out, t)


def combined_asymptotic_peak(ew: EwParams, g: PointingGeometry, link: LinkBudget) -> float:
    """Upper end D of the near-zero power-law approximation of h = L h_a h_p."""
    k = ew.alpha * ew.beta
    mgf = beckmann_mgf(2 * k / g.w_zeq_m ** 2, g)
    return link.path_loss * ew.eta * g.a0 / mgf ** (1 / k)


# ---------------------------------------------------------------------------
# Path loss
# ---------------------------------------------------------------------------

def path_loss(link: LinkBudget) -> float:
    """Beer-Lambert loss exp(-phi d)."""
    return link.path_loss


def kim_exponent(visibility_km: float) -> float:
    """Size-distribution exponent q of the Kim visibility model."""
    v = visibility_km
    if v > 50:
        return 1.6
    if v > 6:
        return 1.3
    if v > 1:
        return 0.16 * v + 0.34
    if v > 0.5:
        return v - 0.5
    return 0.0


def atten_from_visibility(visibility_m: float, wavelength_m: float) -> float:
    """Attenuation coefficient (1/m) from visibility, Kim model.

    phi = (3.91 / V) * (lambda / 550 nm)^(-q(V)).
    """
    if not visibility_m > 0:
        raise DomainError("visibility must be positive")
    if not wavelength_m > 0:
        raise DomainError("wavelength must be positive")
    q = kim_exponent(visibility_m / 1000.0)
    return 3.91 / visibility_m * (wavelength_m / 550e-9) ** (-q)


# ---------------------------------------------------------------------------
# SNR densities
# ---------------------------------------------------------------------------

def binomial_series_coefficients(alpha: float, n: int) -> np.ndarray:
    """c_j = (-1)^j Gamma(alpha) / (j! Gamma(alpha - j)) for j < n.

    These are the coefficients of (1 - x)^(alpha - 1); they vanish exactly
    from j = alpha onwards when alpha is a positive integer.
    """
    c = np.empty(n)
    c[0] = 1.0
    for j in range(1, n):
        c[j] = -c[j - 1] * (alpha - j) / j
    return c


def is_integer_alpha(alpha: float) -> bool:
    return alpha == round(alpha)


def _combined_series_pdf(gamma: np.ndarray, m: SnrModel) -> np.ndarray:
    ew, g = m.ew, m.pointing
    alpha, beta, r2 = ew.alpha, ew.beta, g.rho ** 2
    tau = 1 - r2 / beta
    scale_k = m.link.path_loss * ew.eta * g.a0 * math.sqrt(m.link.gamma0)
    ctl = m.series

    out = np.empty(gamma.shape)
    zero = gamma == 0
    if zero.any():
        lead = min(r2, alpha * beta) / 2 - 1
        out[zero] = 0.0 if lead > 0 else math.inf
    pos = ~zero
    if not pos.any():
        return out
    gm = gamma[pos]
    y = np.exp(beta * (0.5 * np.log(gm) - math.log(scale_k)))

    # S(x) = x^(1 - tau) Gamma(tau, x) stays bounded as x -> 0.
    integer = is_integer_alpha(alpha)
    n = min(ctl.max_terms, int(round(alpha))) if integer else ctl.max_terms
    c = binomial_series_coefficients(alpha, n)
    j = np.arange(n)
    d = c / (1 + j)
    x = (1 + j)[:, None] * y[None, :]
    terms = d[:, None] * _upper_gamma_xpow(tau, x, 1 - tau)
    total = terms.sum(axis=0)

    if not integer or n < round(alpha):
        if n > alpha + 1:
            total = total + _density_tail(alpha, tau, c[-1], n - 1, y, terms[-1])
        else:
            last = np.abs(terms[-1])
            if np.any(last > ctl.rel_term_tol * np.abs(total)):
                raise SeriesConvergenceError(
                    f"density series not converged in {n} terms (alpha={alpha})",
                    estimate=float(np.max(total)))

    out[pos] = alpha * r2 / (2 * gm) * total
    return out


_TAIL_ORDER = 4


def _density_tail(alpha, tau, c_last, j_last, y, f_last):
    """Sum over j > j_last of c_j/(1+j) S((1+j) y) by Euler-Maclaurin.

    d(t) = c(t)/(1+t), with c(t) the gamma-ratio continuation of c_j, is fitted
    by sum_k a_k (1+t)^-(1+alpha+k), k < 4, at geometrically spaced t.  Each
    basis term integrates against S((1+t) y) in closed form.
    """
    n = j_last + 1
    c_n = -c_last * (alpha - n) / n
    lg_n = log_gamma_ratio(float(n), 1 - alpha, 1.0)
    ks = np.arange(_TAIL_ORDER)
    t_fit = n * 2.0 ** ks
    d_fit = c_n * np.exp(log_gamma_ratio(t_fit, 1 - alpha, 1.0) - lg_n) / (1 + t_fit)
    powers = 1 + alpha + ks
    basis = (1 + t_fit[:, None]) ** -powers[None, :]
    col = basis.max(axis=0)
    coef = np.linalg.solve(basis / col, d_fit) / col

    cc = (1 + n) * y
    s_c = _upper_gamma_xpow(tau, cc, 1 - tau)
    integral = np.zeros_like(y)
    for a_k, p in zip(coef, powers):
        # int_n^inf (1+t)^-p S((1+t) y) dt by parts; q = p - 1 + tau
        q = p - 1 + tau
        if abs(q - 1) < 1e-9:
            q = 1 + math.copysign(1e-9, q - 1)
        alt = _upper_gamma_xpow(2 - p, cc, p - 1)
        integral = integral + a_k * (1 + n) ** (1 - p) * (s_c - alt) / (q - 1)

    d_n = c_n / (1 + n)
    c_after = -c_n * (alpha - n - 1) / (n + 1)
    f_after = c_after / (2 + n) * _upper_gamma_xpow(tau, (2 + n) * y, 1 - tau)
    deriv = 0.5 * (f_after - f_last)
    return integral + 0.5 * d_n * s_c - deriv / 12


def _turb_exact_pdf(gamma: np.ndarray, m: SnrModel) -> np.ndarray:
    s = m.snr_scale
    out = np.empty(gamma.shape)
    pos = gamma > 0
    h = np.sqrt(gamma[pos] / s)
    out[pos] = ew_pdf(h, m.ew) / (2 * np.sqrt(gamma[pos] * s))
    if (~pos).any():
        k = m.ew.alpha * m.ew.beta
        out[~pos] = 0.0 if k > 2 else (math.inf if k < 2 else 1 / (m.ew.eta ** 2 * s))
    return out


def _power_law_pdf(gamma: np.ndarray, k: float, upper: float) -> np.ndarray:
    """k gamma^(k-1) / upper^k on [0, upper] with k = alpha*beta/2."""
    inside = (gamma >= 0) & (gamma <= upper)
    with np.errstate(divide="ignore"):
        vals = k / upper * (gamma / upper) ** (k - 1)
    return np.where(inside, vals, 0.0)


def snr_pdf(gamma, m: SnrModel):
    """Density of the electrical SNR under the chosen model variant."""
    g_arr = np.asarray(gamma, dtype=float)
    if np.any(g_arr < 0):
        raise DomainError("snr_pdf requires gamma >= 0")
    flat = g_arr.ravel()
    if m.variant is Variant.TURB_EXACT:
        out = _turb_exact_pdf(flat, m)
    elif m.variant is Variant.TURB_ASYMPTOTIC:
        out = _power_law_pdf(flat, m.ew.alpha * m.ew.beta / 2, m.support_upper())
    elif m.variant is Variant.COMBINED_SERIES:
        out = _combined_series_pdf(flat, m)
    else:
        out = _power_law_pdf(flat, m.ew.alpha * m.ew.beta / 2, m.support_upper())
    return _out(out.reshape(g_arr.shape), gamma)
