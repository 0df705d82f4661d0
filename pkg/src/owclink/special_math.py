"""Special functions and adaptive quadrature.

Gamma, log-gamma and digamma are thin checked wrappers over
``scipy.special``. The upper incomplete gamma function is implemented here
because the analysis needs it for non-positive first arguments, which
``scipy.special.gammaincc`` does not cover. The quadrature is a vectorised
globally adaptive Gauss-Kronrod (7, 15) scheme: the nodes are interior
points, so integrable endpoint singularities are never evaluated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import special as _sp

from .errors import ConvergenceError, DomainError

EULER_GAMMA = 0.57721566490153286061

_EPS = np.finfo(float).eps
_TINY = 1e-300
_MAX_ITER = 2000


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances for :func:`integrate`.

    Integration stops once the summed error estimate is below
    ``max(abs_tol, rel_tol * |integral|)``.
    """

    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_subdivisions: int = 4000

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise DomainError("rel_tol must be positive")
        if not self.abs_tol >= 0:
            raise DomainError("abs_tol must be non-negative")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be at least 1")


class QuadResult(NamedTuple):
    value: float
    error: float
    n_intervals: int


def _scalar_or_array(out, *inputs):
    if all(np.ndim(v) == 0 for v in inputs):
        return float(out)
    return out


def gamma_fn(x):
    """Gamma function for positive real arguments."""
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError("gamma_fn requires x > 0")
    out = _sp.gamma(x)
    if np.any(np.isinf(out)):
        raise OverflowError("gamma_fn overflows for x > 171.62")
    return _scalar_or_array(out, x)


def log_gamma(x):
    """Natural log of the gamma function for positive arguments."""
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError("log_gamma requires x > 0")
    return _scalar_or_array(_sp.gammaln(x), x)


def digamma(x):
    """Logarithmic derivative of the gamma function, x > 0."""
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError("digamma requires x > 0")
    return _scalar_or_array(_sp.digamma(x), x)


def _bernoulli_poly(n, a):
    nums = _sp.bernoulli(n)
    return sum(_sp.comb(n, k, exact=True) * nums[k] * a ** (n - k) for k in range(n + 1))


_RATIO_SWITCH = 100.0
_RATIO_ORDER = 8


def log_gamma_ratio(x, a, b):
    """log Gamma(x + a) - log Gamma(x + b) for x + a, x + b > 0.

    The difference of two log-gammas loses about log10(x ln x) digits, so for
    x >= 100 the asymptotic series
    (a - b) ln x + sum_n (-1)^(n+1) (B_{n+1}(a) - B_{n+1}(b)) / (n (n+1) x^n)
    in Bernoulli polynomials is used instead.
    """
    x = np.asarray(x, dtype=float)
    big = x >= _RATIO_SWITCH
    xs = np.where(big, 1.0, x)
    with np.errstate(invalid="ignore"):
        direct = _sp.gammaln(xs + a) - _sp.gammaln(xs + b)
    xb = np.where(big, x, _RATIO_SWITCH)
    asym = (a - b) * np.log(xb)
    for n in range(1, _RATIO_ORDER):
        coef = (_bernoulli_poly(n + 1, a) - _bernoulli_poly(n + 1, b)) / (n * (n + 1))
        asym = asym + (-1) ** (n + 1) * coef / xb ** n
    return _scalar_or_array(np.where(big, asym, direct), x)


# ---------------------------------------------------------------------------
# Upper incomplete gamma
# ---------------------------------------------------------------------------

def _cf_log_prefactor_free(a, x):
    """Legendre continued fraction for e^x x^-a Gamma(a, x) (modified Lentz).

    Converges for every real ``a`` when ``x > 0``; used for x >= max(1, a+1).
    """
    b = x + 1.0 - a
    c = np.full_like(x, 1.0 / _TINY)
    d = 1.0 / b
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b = b + 2.0
        d_new = an * d + b
        d_new = np.where(np.abs(d_new) < _TINY, _TINY, d_new)
        c_new = b + an / c
        c_new = np.where(np.abs(c_new) < _TINY, _TINY, c_new)
        d_new = 1.0 / d_new
        delta = d_new * c_new
        d = np.where(active, d_new, d)
        c = np.where(active, c_new, c)
        h = np.where(active, h * delta, h)
        active &= np.abs(delta - 1.0) > _EPS
        if not active.any():
            return h
    raise ConvergenceError("incomplete gamma continued fraction did not converge")


def _lower_series(a, x):
    """sum_n x^n / (a (a+1) ... (a+n)) for a > 0, so gamma(a, x) = x^a e^-x * sum."""
    ap = a.copy()
    term = 1.0 / a
    total = term.copy()
    active = np.ones(x.shape, dtype=bool)
    for _ in range(_MAX_ITER):
        ap = ap + 1.0
        term = np.where(active, term * x / ap, 0.0)
        total = total + term
        active &= np.abs(term) > np.abs(total) * _EPS
        if not active.any():
            return total
    raise ConvergenceError("incomplete gamma series did not converge")


_ZETA_TERMS = 60
_ZETA_COEF = np.array([(-1) ** k * _sp.zeta(k) / k for k in range(2, _ZETA_TERMS)])


def _gamma1p_m1_over(a):
    """(Gamma(1 + a) - 1) / a for |a| <= 1/2, -Euler gamma at a = 0."""
    # log Gamma(1 + a) = -gamma a + sum_k (-1)^k zeta(k) a^k / k
    powers = a[..., None] ** np.arange(1, _ZETA_TERMS - 1)
    rest = powers @ _ZETA_COEF  # equals (log Gamma(1+a) + gamma a) / a
    lg_over = -EULER_GAMMA + rest
    lg = a * lg_over
    safe = np.where(a == 0, 1.0, a)
    return np.where(a == 0, -EULER_GAMMA, np.expm1(lg) / safe)


def _near_zero_upper(a0, x, logx, p):
    """x^p Gamma(a0, x) for |a0| <= 1/2 and x below the continued-fraction range.

    Gamma(a0, x) = (Gamma(1+a0) - x^a0) / a0 - x^a0 sum_{k>=1} (-x)^k / (k! (a0+k)),
    with the first part rearranged as g1(a0) - expm1(a0 ln x) / a0 so that no
    two large numbers are subtracted when a0 is small.
    """
    safe = np.where(a0 == 0, 1.0, a0)
    em = np.where(a0 == 0, logx, np.expm1(a0 * logx) / safe)
    head = _gamma1p_m1_over(a0) - em
    term = np.ones_like(x)
    total = np.zeros_like(x)
    active = np.ones(x.shape, dtype=bool)
    for k in range(1, _MAX_ITER):
        term = term * (-x) / k
        inc = np.where(active, term / (a0 + k), 0.0)
        total = total + inc
        active &= np.abs(inc) > _EPS * np.maximum(np.abs(total), _TINY)
        if not active.any():
            break
    else:
        raise ConvergenceError("incomplete gamma series did not converge")
    return np.exp(p * logx) * head - np.exp((a0 + p) * logx) * total


def _small_a_upper(a, x, logx, p):
    """x^p Gamma(a, x) for a < 1/2, by downward recurrence from a + m in (-1/2, 1/2].

    Gamma(b, x) = (Gamma(b+1, x) - x^b e^-x) / b.
    """
    m_all = np.maximum(0, np.ceil(-a - 0.5)).astype(int)
    out = np.empty(x.shape)
    for m in np.unique(m_all):
        sel = m_all == m
        aa, xx, lx = a[sel], x[sel], logx[sel]
        b = aa + m
        val = _near_zero_upper(b, xx, lx, p)
        for _ in range(m):
            b = b - 1
            val = (val - np.exp((b + p) * lx - xx)) / b
        out[sel] = val
    return out


def _upper_gamma_xpow(a, x, p=0.0):
    """x**p * Gamma(a, x) evaluated without forming overflowing intermediates.

    ``a`` and ``x`` broadcast; requires x > 0 elementwise.
    """
    a, x = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(x, dtype=float))
    a = a.astype(float).copy()
    x = x.astype(float).copy()
    out = np.empty(x.shape)
    logx = np.log(x)

    use_cf = x >= np.maximum(1.0, a + 1.0)
    if use_cf.any():
        aa, xx = a[use_cf], x[use_cf]
        out[use_cf] = np.exp((aa + p) * logx[use_cf] - xx) * _cf_log_prefactor_free(aa, xx)

    pos = ~use_cf & (a >= 0.5)
    if pos.any():
        aa, xx = a[pos], x[pos]
        lower = np.exp((aa + p) * logx[pos] - xx) * _lower_series(aa, xx)
        out[pos] = np.exp(p * logx[pos]) * _sp.gamma(aa) - lower

    rest = ~use_cf & ~pos
    if rest.any():
        out[rest] = _small_a_upper(a[rest], x[rest], logx[rest], p)
    return out


def upper_incomplete_gamma(a, t):
    """Upper incomplete gamma function Gamma(a, t) = int_t^inf s^(a-1) e^-s ds.

    Any real ``a`` is accepted as long as the integral converges, i.e.
    ``t > 0`` whenever ``a <= 0``. Arguments broadcast.
    """
    a_arr = np.asarray(a, dtype=float)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(np.isnan(t_arr)):
        raise DomainError("upper_incomplete_gamma requires t >= 0")
    a_b, t_b = np.broadcast_arrays(a_arr, t_arr)
    zero = t_b == 0
    if np.any(zero & (a_b <= 0)):
        raise DomainError("Gamma(a, 0) diverges for a <= 0")
    out = np.empty(t_b.shape)
    if zero.any():
        out[zero] = _sp.gamma(a_b[zero])
    if (~zero).any():
        out[~zero] = _upper_gamma_xpow(a_b[~zero], t_b[~zero])
    return _scalar_or_array(out, a_arr, t_arr)


# ---------------------------------------------------------------------------
# Adaptive quadrature
# ---------------------------------------------------------------------------

_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# 15 abscissae on [-1, 1] with matching Kronrod and embedded Gauss weights.
_NODES = np.concatenate([-_XGK[:-1], [0.0], _XGK[-2::-1]])
_WK = np.concatenate([_WGK[:-1], [_WGK[-1]], _WGK[-2::-1]])
_WG_FULL = np.zeros(15)
for _i, _w in zip((1, 3, 5), _WG[:3]):
    _WG_FULL[_i] = _w
    _WG_FULL[14 - _i] = _w
_WG_FULL[7] = _WG[3]


def _gk15(g, lo, hi):
    """Apply the 15-point rule to each interval [lo_i, hi_i] in one call to g."""
    centre = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    pts = centre[:, None] + half[:, None] * _NODES[None, :]
    vals = np.asarray(g(pts.ravel()), dtype=float)
    if vals.shape != (pts.size,):
        vals = np.broadcast_to(vals, (pts.size,)).astype(float)
    vals = vals.reshape(pts.shape)
    resk = vals @ _WK
    resg = vals @ _WG_FULL
    mean = 0.5 * resk
    resasc = np.abs(vals - mean[:, None]) @ _WK
    resabs = np.abs(vals) @ _WK
    ahalf = np.abs(half)
    value = resk * half
    err = np.abs((resk - resg) * half)
    resasc = resasc * ahalf
    resabs = resabs * ahalf
    scaled = np.where(
        (resasc != 0) & (err != 0),
        resasc * np.minimum(1.0, (200.0 * err / np.where(resasc == 0, 1, resasc)) ** 1.5),
        err,
    )
    floor = 50.0 * _EPS * resabs
    err = np.maximum(scaled, floor)
    return value, err


def _vectorised(f):
    def g(t):
        out = f(t)
        if np.ndim(out) == 0:
            out = np.array([f(float(v)) for v in t])
        return out
    return g


def integrate(f: Callable, a: float, b: float, spec: QuadratureSpec | None = None,
              *, scale: float = 1.0, points=None) -> QuadResult:
    """Integrate ``f`` over [a, b]; ``b`` may be ``np.inf``.

    ``f`` should accept a 1-D array of abscissae. A semi-infinite range is
    mapped onto [0, 1) by t = a + scale * u / (1 - u); ``scale`` should be
    the characteristic width of the integrand. ``points`` lists interior
    break points (in the original variable) used for the initial partition.

    Raises :class:`ConvergenceError` carrying the best estimate if the
    tolerance is not met within ``spec.max_subdivisions`` intervals.
    """
    spec = spec or QuadratureSpec()
    g = _vectorised(f)
    if not np.isfinite(a):
        raise DomainError("lower limit must be finite")
    if b == a:
        return QuadResult(0.0, 0.0, 0)
    if b < a:
        res = integrate(f, b, a, spec, scale=scale, points=points)
        return QuadResult(-res.value, res.error, res.n_intervals)

    if np.isinf(b):
        if not scale > 0:
            raise DomainError("scale must be positive")

        def h(u):
            one_minus = 1.0 - u
            t = a + scale * u / one_minus
            with np.errstate(over="ignore", invalid="ignore"):
                vals = np.asarray(g(t), dtype=float) * (scale / (one_minus * one_minus))
            return np.where(np.isinf(t), 0.0, vals)

        breaks = [0.0, 1.0]
        if points is not None:
            inner = sorted(p for p in points if a < p < np.inf)
            breaks = [0.0] + [(p - a) / (p - a + scale) for p in inner] + [1.0]
        return _adaptive(h, np.array(breaks), spec)

    breaks = [a, b]
    if points is not None:
        breaks = [a] + sorted(p for p in points if a < p < b) + [b]
    return _adaptive(g, np.array(breaks, dtype=float), spec)


def _adaptive(g, breaks, spec):
    lo = breaks[:-1].copy()
    hi = breaks[1:].copy()
    val, err = _gk15(g, lo, hi)
    while True:
        total = float(np.sum(val))
        total_err = float(np.sum(err))
        if not (np.isfinite(total) and np.isfinite(total_err)):
            raise ConvergenceError("integrand produced non-finite values", total, total_err)
        tol = max(spec.abs_tol, spec.rel_tol * abs(total))
        if total_err <= tol:
            return QuadResult(total, total_err, lo.size)
        room = spec.max_subdivisions - lo.size
        splittable = np.abs(hi - lo) > 64 * _EPS * np.maximum(np.abs(lo), np.abs(hi))
        # Split the worst intervals until what is left untouched is below tol / 2.
        order = np.argsort(err)[::-1]
        order = order[splittable[order]]
        if room <= 0 or order.size == 0:
            raise ConvergenceError(
                f"quadrature reached {lo.size} intervals with error {total_err:.3g} > {tol:.3g}",
                total, total_err)
        need = total_err - 0.5 * tol
        count = int(np.searchsorted(np.cumsum(err[order]), need)) + 1
        idx = order[:min(count, room, order.size)]
        mid = 0.5 * (lo[idx] + hi[idx])
        new_lo = np.concatenate([lo[idx], mid])
        new_hi = np.concatenate([mid, hi[idx]])
        nv, ne = _gk15(g, new_lo, new_hi)
        keep = np.ones(lo.size, dtype=bool)
        keep[idx] = False
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        val = np.concatenate([val[keep], nv])
        err = np.concatenate([err[keep], ne])
