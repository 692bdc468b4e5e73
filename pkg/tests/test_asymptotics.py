import math

import numpy as np
import pytest

from physics.asymptotics import (
    AsymptoticModel,
    check_span,
    cii_asymptotic,
    e_m,
    fit_constants,
    fit_offset_power_law,
    l_m,
    l_m_quadrature,
    lambda2_slope,
    loglog_slope,
    omega_asymptotic,
    rho_m,
    scaling_regimes,
)
from physics.errors import DomainError, FitError
from physics.materials import MaterialParams
from tests.conftest import SPHERE_VOLUME

# M for two unit spheres: 2 pi (2 log 2 + Euler gamma)
SPHERE_CONSTANT = 2.0 * math.pi * (2.0 * math.log(2.0) + np.euler_gamma)


def _sphere_model(**kwargs) -> AsymptoticModel:
    return AsymptoticModel(m=2, lam=1.0, volumes=(SPHERE_VOLUME, SPHERE_VOLUME), **kwargs)


# ── Closed forms ───────────────────────────────────────────────


def test_l_m_values():
    assert l_m(2) == pytest.approx(math.pi)
    assert l_m(4) == pytest.approx(math.pi**2 / 2.0, rel=1e-9)
    assert l_m(6) == pytest.approx(2.0 * math.pi**2 / (3.0 * math.sqrt(3.0)), rel=1e-12)


@pytest.mark.parametrize("m", [3, 4, 6, 8])
def test_l_m_matches_quadrature(m):
    assert l_m_quadrature(m) == pytest.approx(l_m(m), rel=1e-10)


def test_l_m_quadrature_diverges_for_spheres():
    with pytest.raises(DomainError):
        l_m_quadrature(2)


def test_rho_and_error_scales():
    assert rho_m(2, math.exp(-10.0)) == pytest.approx(10.0)
    assert rho_m(4, 1e-4) == pytest.approx(100.0)
    np.testing.assert_allclose(rho_m(6, [1e-3, 1e-6]), [100.0, 1e4])
    assert e_m(2, math.exp(-4.0)) == pytest.approx(4.0 * math.exp(-1.0))
    assert e_m(4, 1e-8) == pytest.approx(0.1)


def test_order_and_gap_validated():
    with pytest.raises(DomainError):
        rho_m(1, 0.1)
    with pytest.raises(DomainError):
        rho_m(2.5, 0.1)
    with pytest.raises(DomainError):
        rho_m(2, 1.0)
    with pytest.raises(DomainError):
        e_m(4, [0.1, 0.0])


def test_scaling_regimes():
    assert scaling_regimes(2, 0.01, 0.5) == pytest.approx(math.exp(-10.0))
    assert scaling_regimes(4, 0.01, 0.5) == pytest.approx(1e-2)
    eps = scaling_regimes(4, np.array([0.1, 0.01]), 0.25)
    # omega_2^2 ~ delta * rho_4 = delta^beta
    np.testing.assert_allclose(np.array([0.1, 0.01]) * rho_m(4, eps), [0.1**0.25, 0.01**0.25])
    with pytest.raises(DomainError):
        scaling_regimes(2, 0.1, 1.0)


# ── Regressions ────────────────────────────────────────────────


def test_loglog_slope():
    x = np.geomspace(1.0, 100.0, 6)
    assert loglog_slope(x, 3.0 * x**2) == pytest.approx((2.0, 3.0))
    with pytest.raises(FitError):
        loglog_slope([1.0, 2.0], [1.0, -1.0])


def test_fit_offset_power_law():
    x = np.geomspace(1.0, 100.0, 10)
    offset, k, s = fit_offset_power_law(x, 1.5 + 2.0 * np.sqrt(x))
    assert offset == pytest.approx(1.5, abs=1e-4)
    assert k == pytest.approx(2.0, rel=1e-4)
    assert s == pytest.approx(0.5, rel=1e-4)
    with pytest.raises(FitError):
        fit_offset_power_law(x[:3], x[:3])


def test_lambda2_slope():
    rho = np.array([2.0, 4.0, 8.0])
    assert lambda2_slope(rho, 0.3 * rho + 1.0) == pytest.approx(0.3)


# ── Model estimates ────────────────────────────────────────────


def test_leading_coefficients():
    assert _sphere_model().leading_coefficient == pytest.approx(math.pi)
    quartic = AsymptoticModel(m=4, lam=0.5, volumes=(1.0, 1.0))
    assert quartic.leading_coefficient == pytest.approx(l_m(4) / math.sqrt(0.5))
    ellipsoid = AsymptoticModel(m=2, lam=0.5, volumes=(1.0, 1.0), lam_pair=(0.25, 1.0))
    assert ellipsoid.leading_coefficient == pytest.approx(2.0 * math.pi)


def test_cii_asymptotic_with_and_without_constant():
    model = _sphere_model()
    bare = cii_asymptotic(model, 0.01)
    assert not bare.fitted
    assert bare.value == pytest.approx(math.pi * math.log(100.0))
    fitted = cii_asymptotic(model.with_constants(SPHERE_CONSTANT, SPHERE_CONSTANT), 0.01, index=2)
    assert fitted.fitted
    assert fitted.value == pytest.approx(bare.leading + SPHERE_CONSTANT)


def test_omega_asymptotic():
    materials = MaterialParams.from_contrast(0.01, 2.0)
    model = _sphere_model(materials=materials)
    estimate = omega_asymptotic(model, 1e-4, c_star=3.0)
    rho = math.log(1e4)
    assert estimate.omega2 == pytest.approx(math.sqrt(0.01 * 4.0 * (2.0 / SPHERE_VOLUME) * math.pi * rho))
    assert estimate.omega1 == pytest.approx(math.sqrt(0.01 * 4.0 * 3.0))
    assert estimate.band == pytest.approx(math.sqrt(0.01 / rho) + 0.01)
    assert omega_asymptotic(model, 1e-4).omega1 is None


def test_omega_asymptotic_needs_materials():
    with pytest.raises(DomainError):
        omega_asymptotic(_sphere_model(), 0.01)


# ── Constant fits ──────────────────────────────────────────────


def _synthetic_sweep(coefficient: float = math.pi) -> tuple[np.ndarray, np.ndarray]:
    eps = np.geomspace(1e-1, 1e-6, 8)
    wobble = 1e-3 * (-1.0) ** np.arange(8)
    cii = coefficient * rho_m(2, eps) + SPHERE_CONSTANT + (0.5 + wobble) * e_m(2, eps)
    return eps, cii


def test_fit_constants_recovers_offset():
    eps, cii = _synthetic_sweep()
    report = fit_constants(_sphere_model(), eps, cii, cii)
    assert report.m1 == pytest.approx(SPHERE_CONSTANT, abs=1e-2)
    assert report.m2 == pytest.approx(report.m1)
    assert report.fits[0].envelope_coefficient == pytest.approx(0.5, abs=1e-2)
    assert report.fits[0].slope_ratio == pytest.approx(1.0, abs=0.05)
    assert not any(flag.startswith("leading_coefficient") for flag in report.flags)
    assert report.model.m1 == report.m1
    assert report.eps[0] > report.eps[-1]


def test_fit_flags_wrong_leading_coefficient():
    eps, cii = _synthetic_sweep(coefficient=2.0 * math.pi)
    report = fit_constants(_sphere_model(), eps, cii, cii)
    assert "leading_coefficient_mismatch_1" in report.flags
    assert "leading_coefficient_mismatch_2" in report.flags


def test_check_span_rejects_short_sweeps():
    eps = np.geomspace(1e-1, 1e-6, 4)
    with pytest.raises(FitError):
        check_span(eps, rho_m(2, eps))
    narrow = np.geomspace(1e-1, 1e-2, 6)
    with pytest.raises(FitError):
        check_span(narrow, rho_m(4, narrow))
    wide = np.geomspace(1e-1, 1e-4, 5)
    check_span(wide, rho_m(2, wide))
