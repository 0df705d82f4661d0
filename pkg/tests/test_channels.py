import math

import numpy as np
import pytest
from scipy import stats

from conftest import geometry_for
from owclink import (
    EwParams,
    LinkBudget,
    PointingGeometry,
    SeriesControl,
    SnrModel,
    Variant,
    atten_from_visibility,
    beckmann_mgf,
    ew_cdf,
    ew_pdf,
    ew_ppf,
    ew_sample,
    path_loss,
    pointing_cdf,
    pointing_pdf,
    pointing_sample,
    snr_pdf,
)
from owclink.channels import (
    binomial_series_coefficients,
    ew_moment,
    ew_scintillation_index,
    kim_exponent,
)
from owclink.errors import DomainError
from owclink.special_math import QuadratureSpec, integrate

TIGHT = QuadratureSpec(rel_tol=1e-11, abs_tol=0.0)


# ---------------------------------------------------------------- parameters

@pytest.mark.parametrize("bad", [(0, 1, 1), (1, -1, 1), (1, 1, 0), (math.inf, 1, 1), (math.nan, 1, 1)])
def test_ew_params_reject_invalid(bad):
    with pytest.raises(DomainError):
        EwParams(*bad)


def test_pointing_geometry_derived_quantities():
    g = PointingGeometry(0.05, 2.5, 0.35)
    ups = math.sqrt(math.pi / 2) * 0.05 / 2.5
    assert g.upsilon == pytest.approx(ups)
    assert g.a0 == pytest.approx(math.erf(ups) ** 2)
    assert 0 < g.a0 < 1
    assert g.w_zeq_m >= g.beam_width_m
    assert g.rho == pytest.approx(g.w_zeq_m / 0.7)
    assert g.sigma_y_m == g.sigma_x_m and g.is_symmetric


def test_pointing_geometry_asymmetric():
    g = PointingGeometry(0.05, 2.5, 0.35, 0.3, 0.2, 0.1)
    assert not g.is_symmetric
    with pytest.raises(DomainError):
        _ = g.rho
    with pytest.raises(DomainError):
        PointingGeometry(0.05, 2.5, 0.35, mu_x_m=-1.0)
    with pytest.raises(DomainError):
        PointingGeometry(0.05, 2.5, 0.0)


def test_link_budget_gamma0_and_path_loss():
    link = LinkBudget(0.1, 0.41, 1e-14, 1e-3, 2000)
    assert link.gamma0 == pytest.approx(2 * 0.01 * 0.41 ** 2 / 1e-14)
    assert link.path_loss == pytest.approx(math.exp(-2))
    assert path_loss(LinkBudget(1, 1, 1)) == 1.0
    assert LinkBudget.from_gamma0(1e6, 0.3).gamma0 == pytest.approx(1e6)
    assert LinkBudget.from_gamma0(1e6, 0.3).path_loss == pytest.approx(0.3)
    assert link.with_gamma0_scaled(4).gamma0 == pytest.approx(4 * link.gamma0)
    with pytest.raises(DomainError):
        LinkBudget(0, 1, 1)
    with pytest.raises(DomainError):
        LinkBudget(1, 1, 1, distance_m=-1)


def test_snr_model_invariants():
    ew, link, g = EwParams(2, 1, 1), LinkBudget.from_gamma0(10), PointingGeometry(0.05, 0.25, 0.1)
    with pytest.raises(DomainError):
        SnrModel(Variant.COMBINED_SERIES, ew, link)
    with pytest.raises(DomainError):
        SnrModel(Variant.COMBINED_ASYMPTOTIC, ew, link)
    with pytest.raises(DomainError):
        SnrModel(Variant.TURB_EXACT, ew, link, g)
    with pytest.raises(DomainError):
        SnrModel(Variant.COMBINED_SERIES, ew, link, PointingGeometry(0.05, 0.25, 0.1, mu_x_m=0.01))
    SnrModel(Variant.COMBINED_ASYMPTOTIC, ew, link, PointingGeometry(0.05, 0.25, 0.1, mu_x_m=0.01))
    with pytest.raises(DomainError):
        SeriesControl(max_terms=0)


# ---------------------------------------------------------------- EW law

def test_ew_pdf_examples():
    assert ew_pdf(0.5, EwParams(1, 1, 1)) == pytest.approx(0.6065306597, rel=1e-10)
    assert ew_pdf(1.0, EwParams(2, 1, 1)) == pytest.approx(2 * math.exp(-1) * (1 - math.exp(-1)), rel=1e-12)
    assert ew_pdf(1.0, EwParams(2, 1, 1)) == pytest.approx(0.4650883159, rel=1e-9)


def test_ew_pdf_normalization():
    p = EwParams(2.5, 1.8, 1.1)
    res = integrate(lambda h: ew_pdf(h, p), 0.0, math.inf, TIGHT, scale=p.eta)
    assert res.value == pytest.approx(1.0, abs=1e-10)


def test_ew_negative_argument():
    with pytest.raises(DomainError):
        ew_pdf(-0.1, EwParams(1, 1, 1))
    with pytest.raises(DomainError):
        ew_cdf(-0.1, EwParams(1, 1, 1))


def test_ew_cdf_examples():
    assert ew_cdf(0.0, EwParams(2.5, 1.8, 1.1)) == 0.0
    assert ew_cdf(1.0, EwParams(1, 1, 1)) == pytest.approx(0.6321205588, rel=1e-10)
    assert ew_cdf(2.0, EwParams(3, 2, 1)) == pytest.approx((1 - math.exp(-4)) ** 3, rel=1e-12)
    assert ew_cdf(1e6, EwParams(3, 2, 1)) == 1.0


@pytest.mark.parametrize("seed", range(5))
def test_ew_cdf_is_antiderivative(seed):
    r = np.random.default_rng(seed)
    p = EwParams(*r.uniform(0.3, 5, size=3))
    h = float(r.uniform(0.05, 3) * p.eta)
    area = integrate(lambda x: ew_pdf(x, p), 0.0, h, TIGHT).value
    assert area == pytest.approx(ew_cdf(h, p), abs=1e-8)


def test_ew_ppf_inverts_cdf():
    assert ew_ppf(1 - math.exp(-1), EwParams(1, 1, 1)) == pytest.approx(1.0, rel=1e-12)
    p = EwParams(5.8, 1.3, 0.9)
    u = np.linspace(0.01, 0.99, 25)
    np.testing.assert_allclose(ew_cdf(ew_ppf(u, p), p), u, rtol=1e-10)
    assert np.isfinite(ew_ppf(1.0, p)) and ew_ppf(0.0, p) >= 0


def test_ew_sample_weibull_mean(rng):
    x = ew_sample(EwParams(1, 2, 1), rng, 10 ** 6)
    se = x.std(ddof=1) / math.sqrt(x.size)
    assert abs(x.mean() - math.gamma(1.5)) < 3 * se


def test_ew_sample_ks(rng):
    p = EwParams(5.8, 1.3, 0.9)
    x = ew_sample(p, rng, 10 ** 5)
    d = stats.kstest(x, lambda h: ew_cdf(h, p)).statistic
    assert d < 0.005
    assert d < 1.63 / math.sqrt(x.size)


def test_ew_sample_reproducible():
    p = EwParams(2.5, 1.8, 1)
    a = ew_sample(p, np.random.default_rng(7), 100)
    b = ew_sample(p, np.random.default_rng(7), 100)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("beta", [0.7, 1.0, 2.0, 3.3])
def test_alpha_one_is_weibull(beta):
    p = EwParams(1.0, beta, 1.3)
    assert ew_moment(p, 1) == pytest.approx(1.3 * math.gamma(1 + 1 / beta), rel=1e-9)
    assert ew_moment(p, 2) == pytest.approx(1.69 * math.gamma(1 + 2 / beta), rel=1e-9)


def test_scintillation_index_weibull():
    p = EwParams(1.0, 2.0, 1.0)
    assert ew_scintillation_index(p) == pytest.approx(4 / math.pi - 1, rel=1e-9)


# ---------------------------------------------------------------- pointing

def test_pointing_pdf_examples():
    g = PointingGeometry(0.05, 0.25, 0.1)
    res = integrate(lambda h: pointing_pdf(h, g), 0.0, g.a0, TIGHT)
    assert res.value == pytest.approx(1.0, abs=1e-10)
    assert pointing_pdf(g.a0, g) == pytest.approx(g.rho ** 2 / g.a0)
    assert pointing_pdf(1.01 * g.a0, g) == 0.0
    assert pointing_pdf(-0.1, g) == 0.0


def test_pointing_pdf_rho_one_is_uniform():
    g = geometry_for(0.04, 1.0)
    assert g.rho == pytest.approx(1.0, rel=1e-12)
    vals = pointing_pdf(np.linspace(1e-4, g.a0, 7), g)
    np.testing.assert_allclose(vals, 1 / g.a0, rtol=1e-10)


def test_pointing_pdf_needs_symmetry():
    with pytest.raises(DomainError):
        pointing_pdf(0.01, PointingGeometry(0.05, 0.25, 0.1, mu_x_m=0.01))


def test_pointing_sample_range_and_limit(rng):
    g = PointingGeometry(0.05, 0.25, 0.1, 0.12, 0.03, 0.02)
    x = pointing_sample(g, rng, 10 ** 5)
    assert np.all(x > 0) and np.all(x <= g.a0)
    tiny = PointingGeometry(0.05, 0.25, 1e-9)
    assert pointing_sample(tiny, rng, 100) == pytest.approx(np.full(100, tiny.a0), rel=1e-12)
    assert isinstance(pointing_sample(g, rng), float)


def test_pointing_sample_mean(rng):
    g = PointingGeometry(0.05, 0.25, 0.1)
    x = pointing_sample(g, rng, 10 ** 6)
    r2 = g.rho ** 2
    se = x.std(ddof=1) / math.sqrt(x.size)
    assert abs(x.mean() - r2 * g.a0 / (r2 + 1)) < 3 * se


def test_pointing_sample_ks(rng):
    g = PointingGeometry(0.05, 0.25, 0.1)
    x = pointing_sample(g, rng, 10 ** 5)
    assert stats.kstest(x, lambda h: pointing_cdf(h, g)).statistic < 1.63 / math.sqrt(x.size)


def test_beckmann_mgf_examples():
    g = PointingGeometry(0.05, 2.5, 0.35)
    assert beckmann_mgf(0.0, g) == 1.0
    for t in (-3.0, -0.5, 1.0, 4.0):
        assert beckmann_mgf(t, g) == pytest.approx(1 / (1 - 2 * t * 0.35 ** 2), rel=1e-14)
    with pytest.raises(DomainError):
        beckmann_mgf(1 / (2 * 0.35 ** 2), g)


def test_beckmann_mgf_monte_carlo(rng):
    g = PointingGeometry(0.05, 2.5, 0.35, 0.3, 0.2, 0.1)
    t = -1.0
    x = rng.normal(g.mu_x_m, g.sigma_x_m, 10 ** 6)
    y = rng.normal(g.mu_y_m, g.sigma_y_m, 10 ** 6)
    v = np.exp(t * (x * x + y * y))
    se = v.std(ddof=1) / math.sqrt(v.size)
    assert abs(v.mean() - beckmann_mgf(t, g)) < 3 * se


# ---------------------------------------------------------------- path loss

def test_kim_visibility_model():
    phi = atten_from_visibility(16e3, 1550e-9)
    # V > 6 km gives q = 1.3
    assert phi == pytest.approx(3.91 / 16e3 * (1550 / 550) ** -1.3, rel=1e-14)
    assert phi == pytest.approx(6.354729422007073e-05, rel=1e-12)
    assert kim_exponent(4.0) == pytest.approx(0.16 * 4 + 0.34)
    assert kim_exponent(60.0) == 1.6 and kim_exponent(0.8) == pytest.approx(0.3)
    assert kim_exponent(0.4) == 0.0
    with pytest.raises(DomainError):
        atten_from_visibility(0.0, 1550e-9)


# ---------------------------------------------------------------- SNR densities

def test_turb_exact_change_of_variables():
    p, link = EwParams(2.5, 1.8, 1.0), LinkBudget.from_gamma0(300.0, 0.4)
    m = SnrModel(Variant.TURB_EXACT, p, link)
    s = link.gamma0 * link.path_loss ** 2
    g = np.geomspace(1e-3, 1e3, 30)
    expected = ew_pdf(np.sqrt(g / s), p) / (2 * np.sqrt(g * s))
    np.testing.assert_allclose(snr_pdf(g, m), expected, rtol=1e-14)


def test_turb_exact_normalization():
    m = SnrModel(Variant.TURB_EXACT, EwParams(2.5, 1.8, 1.0), LinkBudget.from_gamma0(100.0))
    res = integrate(lambda g: snr_pdf(g, m), 0.0, math.inf, TIGHT, scale=m.typical_snr())
    assert res.value == pytest.approx(1.0, abs=1e-6)


def test_snr_pdf_rejects_negative():
    m = SnrModel(Variant.TURB_EXACT, EwParams(2.5, 1.8, 1.0), LinkBudget.from_gamma0(100.0))
    with pytest.raises(DomainError):
        snr_pdf(-1.0, m)


def test_asymptotic_densities_vanish_outside_support():
    m = SnrModel(Variant.TURB_ASYMPTOTIC, EwParams(2, 1.5, 0.8), LinkBudget.from_gamma0(1e4))
    top = m.support_upper()
    assert top == pytest.approx(0.64e4)
    assert snr_pdf(1.01 * top, m) == 0.0 and snr_pdf(0.5 * top, m) > 0
    res = integrate(lambda g: snr_pdf(g, m), 0.0, top, TIGHT)
    assert res.value == pytest.approx(1.0, abs=1e-10)


def test_binomial_coefficients_integer_alpha_vanish():
    c = binomial_series_coefficients(3.0, 10)
    np.testing.assert_allclose(c[:3], [1, -2, 1])
    assert np.all(c[3:] == 0)


def test_combined_series_integer_alpha_terminates():
    g = geometry_for(0.05, 1.5)
    link = LinkBudget.from_gamma0(1e10, 0.2)
    short = SnrModel(Variant.COMBINED_SERIES, EwParams(3, 2, 1), link, g, SeriesControl(3))
    long_ = SnrModel(Variant.COMBINED_SERIES, EwParams(3, 2, 1), link, g, SeriesControl(500))
    x = np.geomspace(1e2, 1e9, 20)
    np.testing.assert_array_equal(snr_pdf(x, short), snr_pdf(x, long_))


@pytest.mark.parametrize("alpha, beta, a0, rho", [
    (2.5, 1.8, 0.04, 1.2), (0.7, 1.3, 0.02, 0.9), (1.5, 0.9, 0.1, 2.0), (3.0, 2.0, 0.05, 1.5),
])
def test_combined_series_normalization(alpha, beta, a0, rho):
    m = SnrModel(Variant.COMBINED_SERIES, EwParams(alpha, beta, 1.0),
                 LinkBudget.from_gamma0(1e10, 0.1), geometry_for(a0, rho))
    res = integrate(lambda g: snr_pdf(g, m), 0.0, math.inf, QuadratureSpec(rel_tol=1e-9, abs_tol=0),
                    scale=m.typical_snr())
    assert res.value == pytest.approx(1.0, abs=1e-6)


def test_combined_series_matches_product_density(rng):
    # The density of gamma0 (L h_a h_p)^2 is checked against a histogram of direct draws.
    g = geometry_for(0.04, 1.2)
    link = LinkBudget.from_gamma0(1e4, 0.5)
    p = EwParams(2.5, 1.8, 1.0)
    m = SnrModel(Variant.COMBINED_SERIES, p, link, g)
    n = 4 * 10 ** 5
    h = link.path_loss * ew_sample(p, rng, n) * pointing_sample(g, rng, n)
    gam = link.gamma0 * h * h
    edges = np.quantile(gam, np.linspace(0.05, 0.95, 10))
    for lo, hi in zip(edges[:-1], edges[1:]):
        prob = integrate(lambda x: snr_pdf(x, m), lo, hi).value
        frac = np.mean((gam >= lo) & (gam < hi))
        assert abs(frac - prob) < 4 * math.sqrt(prob * (1 - prob) / n)
