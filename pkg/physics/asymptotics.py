"""Closed-form asymptotics for close-to-touching resonators and fits of the free constants.

With rho_m(eps) = |log eps| (m = 2) or eps^-(1 - 2/m) (m > 2):

    C_ii = L_m / Lambda^(2/m) * rho_m(eps) + M_i + O(E_m(eps))

and the two resonances separate as omega_1 ~ sqrt(delta) against
omega_2 ~ sqrt(delta * rho_m(eps)). Logarithms are natural throughout.
"""

import logging
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import NamedTuple, Optional

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

from physics.errors import DomainError, FitError
from physics.geometry import GapProfile
from physics.materials import MaterialParams

logger = logging.getLogger(__name__)

MIN_FIT_POINTS = 5
MIN_FIT_DECADES = 2.0


def _check_order(m: int) -> None:
    if int(m) != m or m < 2:
        raise DomainError(f"convexity order must be an integer >= 2, got {m!r}")


def _check_gap(eps) -> np.ndarray:
    eps = np.asarray(eps, dtype=float)
    if np.any(eps <= 0) or np.any(eps >= 1):
        raise DomainError("asymptotic regime needs eps in (0, 1)")
    return eps


def _scalar(value: np.ndarray):
    return float(value) if np.ndim(value) == 0 else value


def rho_m(m: int, eps):
    _check_order(m)
    eps = _check_gap(eps)
    if m == 2:
        return _scalar(np.abs(np.log(eps)))
    return _scalar(eps ** (-(1.0 - 2.0 / m)))


def e_m(m: int, eps):
    """Error scale E_m(eps) of the constant term."""
    _check_order(m)
    eps = _check_gap(eps)
    if m == 2:
        return _scalar(eps**0.25 * np.abs(np.log(eps)))
    return _scalar(eps ** (1.0 / (2 * m)))


@lru_cache(maxsize=None)
def l_m(m: int) -> float:
    """L_2 = pi; L_m = 2 pi int_0^inf r / (1 + r^m) dr = 2 pi (pi/m) / sin(2 pi/m) for m > 2."""
    _check_order(m)
    if m == 2:
        return math.pi
    return 2.0 * math.pi * (math.pi / m) / math.sin(2.0 * math.pi / m)


def l_m_quadrature(m: int) -> float:
    """The defining integral of L_m by adaptive quadrature, tail folded onto [0, 1] by r -> 1/r."""
    _check_order(m)
    if m == 2:
        raise DomainError("the defining integral diverges for m = 2")
    value, _ = quad(lambda t: (t + t ** (m - 3)) / (1.0 + t**m), 0.0, 1.0, epsabs=1e-13, epsrel=1e-13)
    return 2.0 * math.pi * value


def loglog_slope(x, y) -> tuple[float, float]:
    """Least-squares slope and prefactor of log y against log x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2 or np.any(x <= 0) or np.any(y <= 0):
        raise FitError("log-log slope needs at least two positive samples")
    slope, intercept = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope), float(math.exp(intercept))


def fit_offset_power_law(x, y) -> tuple[float, float, float]:
    """Fit y = offset + k * x**s, returning (offset, k, s).

    The exponent is found by bounded scalar minimization of the residual of
    the linear (offset, k) least-squares problem at fixed s.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 4:
        raise FitError("offset power law needs at least four samples")

    def linear(s: float) -> tuple[np.ndarray, float]:
        design = np.column_stack([np.ones_like(x), x**s])
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        return coef, float(np.sum((design @ coef - y) ** 2))

    result = minimize_scalar(lambda s: linear(s)[1], bounds=(0.05, 3.0), method="bounded", options={"xatol": 1e-8})
    coef, _ = linear(result.x)
    return float(coef[0]), float(coef[1]), float(result.x)


# ── Model ──────────────────────────────────────────────────────


@dataclass(frozen=True)
class AsymptoticModel:
    m: int
    lam: float
    volumes: tuple[float, float]
    lam_pair: Optional[tuple[float, float]] = None
    materials: Optional[MaterialParams] = None
    m1: Optional[float] = None
    m2: Optional[float] = None

    @classmethod
    def from_profile(
        cls,
        profile: GapProfile,
        volumes: tuple[float, float],
        materials: MaterialParams | None = None,
    ) -> "AsymptoticModel":
        return cls(m=profile.m, lam=profile.lam, volumes=volumes, lam_pair=profile.lam_pair, materials=materials)

    @property
    def l_m(self) -> float:
        return l_m(self.m)

    @property
    def leading_coefficient(self) -> float:
        """Coefficient of rho_m(eps) in C_ii."""
        if self.lam_pair is not None:
            return math.pi / math.sqrt(self.lam_pair[0] * self.lam_pair[1])
        return l_m(self.m) / self.lam ** (2.0 / self.m)

    @property
    def inverse_volume_sum(self) -> float:
        return 1.0 / self.volumes[0] + 1.0 / self.volumes[1]

    def rho(self, eps):
        return rho_m(self.m, eps)

    def e(self, eps):
        return e_m(self.m, eps)

    def constant(self, index: int) -> Optional[float]:
        return self.m1 if index == 1 else self.m2

    def with_constants(self, m1: float | None, m2: float | None) -> "AsymptoticModel":
        return replace(self, m1=m1, m2=m2)


class CiiEstimate(NamedTuple):
    value: float
    leading: float
    fitted: bool


class OmegaEstimate(NamedTuple):
    omega1: Optional[float]
    omega2: float
    band: float


def cii_asymptotic(model: AsymptoticModel, eps: float, index: int = 1) -> CiiEstimate:
    """L_m / Lambda^(2/m) * rho_m(eps) + M_i; leading term only when M_i is unknown."""
    leading = model.leading_coefficient * rho_m(model.m, eps)
    constant = model.constant(index)
    if constant is None:
        return CiiEstimate(value=leading, leading=leading, fitted=False)
    return CiiEstimate(value=leading + constant, leading=leading, fitted=True)


def omega_asymptotic(model: AsymptoticModel, eps: float, c_star: float | None = None) -> OmegaEstimate:
    """Leading resonances and the unit-constant error band sqrt(delta / rho_m) + delta.

    Raises:
        DomainError: without materials or with delta outside (0, 1).
    """
    if model.materials is None:
        raise DomainError("resonance asymptotics need material parameters")
    delta, v_b = model.materials.delta, model.materials.v_b
    if not 0 < delta < 1:
        raise DomainError(f"contrast delta must lie in (0, 1), got {delta}")
    rho = rho_m(model.m, eps)
    omega2 = math.sqrt(delta * v_b**2 * model.inverse_volume_sum * model.leading_coefficient * rho)
    omega1 = math.sqrt(delta * v_b**2 * c_star) if c_star is not None and c_star > 0 else None
    return OmegaEstimate(omega1=omega1, omega2=omega2, band=math.sqrt(delta / rho) + delta)


def scaling_regimes(m: int, delta, beta: float):
    """Gap eps(delta) for which omega_2 ~ delta^(beta/2).

    exp(-delta^(beta - 1)) for m = 2, delta^((1 - beta) / (1 - 2/m)) for m > 2.
    """
    _check_order(m)
    if not 0 < beta < 1:
        raise DomainError(f"beta must lie in (0, 1), got {beta!r}")
    delta = np.asarray(delta, dtype=float)
    if np.any(delta <= 0) or np.any(delta >= 1):
        raise DomainError("contrast delta must lie in (0, 1)")
    if m == 2:
        return _scalar(np.exp(-(delta ** (beta - 1.0))))
    return _scalar(delta ** ((1.0 - beta) / (1.0 - 2.0 / m)))


# ── Fitting the constants ──────────────────────────────────────


@dataclass(frozen=True)
class ConstantFit:
    constant: float
    envelope_coefficient: float  # c in M + c * E_m
    residuals: np.ndarray  # C_ii - leading - M
    envelope_ratios: np.ndarray  # |residual| / E_m
    slope: float  # d C_ii / d rho_m from a free regression
    slope_ratio: float  # slope / leading coefficient
    mismatch: bool
    window_delta: float
    window_envelope: float

    @property
    def window_stable(self) -> bool:
        return self.window_delta <= self.window_envelope


@dataclass(frozen=True)
class FitReport:
    model: AsymptoticModel
    eps: np.ndarray
    fits: tuple[ConstantFit, ConstantFit]

    @property
    def m1(self) -> float:
        return self.fits[0].constant

    @property
    def m2(self) -> float:
        return self.fits[1].constant

    @property
    def flags(self) -> list[str]:
        flags = []
        for index, fit in enumerate(self.fits, start=1):
            if fit.mismatch:
                flags.append(f"leading_coefficient_mismatch_{index}")
            if not fit.window_stable:
                flags.append(f"window_unstable_{index}")
        return flags


def check_span(eps, rho, min_points: int = MIN_FIT_POINTS, min_decades: float = MIN_FIT_DECADES) -> None:
    """Raises FitError unless the sweep has enough points over enough decades of eps or rho."""
    eps = np.asarray(eps, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if len(eps) < min_points:
        raise FitError(f"need at least {min_points} sweep points, got {len(eps)}")
    eps_decades = math.log10(eps.max() / eps.min())
    rho_decades = math.log10(rho.max() / rho.min())
    if max(eps_decades, rho_decades) < min_decades:
        raise FitError(
            f"sweep spans {eps_decades:.2f} decades of eps and {rho_decades:.2f} of rho_m; need {min_decades}"
        )


def fit_constant(
    model: AsymptoticModel,
    eps,
    cii,
    slope_tolerance: float = 0.1,
) -> ConstantFit:
    """Fit C_ii - coef * rho_m = M + c * E_m by least squares.

    A free regression of C_ii on rho_m checks the leading coefficient. The
    sweep is then split into a large-eps and a small-eps window; the
    window constants (at the global c) must agree within the envelope of
    the large-eps window.
    """
    eps = np.asarray(eps, dtype=float)
    cii = np.asarray(cii, dtype=float)
    order = np.argsort(eps)[::-1]
    eps, cii = eps[order], cii[order]
    rho = np.asarray(rho_m(model.m, eps), dtype=float)
    check_span(eps, rho)

    coef = model.leading_coefficient
    envelope = np.asarray(e_m(model.m, eps), dtype=float)
    remainder = cii - coef * rho
    design = np.column_stack([np.ones_like(eps), envelope])
    (constant, c_env), *_ = np.linalg.lstsq(design, remainder, rcond=None)
    residuals = remainder - constant
    ratios = np.abs(residuals) / envelope

    slope = float(np.polyfit(rho, cii, 1)[0])
    slope_ratio = slope / coef
    mismatch = abs(slope_ratio - 1.0) > slope_tolerance
    if mismatch:
        logger.warning("Leading coefficient mismatch: fitted slope %.4g vs %.4g", slope, coef)

    half = len(eps) // 2
    adjusted = remainder - c_env * envelope
    large, small = adjusted[:half], adjusted[half:]
    window_delta = float(abs(np.mean(large) - np.mean(small)))
    window_envelope = float(np.max(ratios) * envelope[:half].max())
    return ConstantFit(
        constant=float(constant),
        envelope_coefficient=float(c_env),
        residuals=residuals,
        envelope_ratios=ratios,
        slope=slope,
        slope_ratio=float(slope_ratio),
        mismatch=bool(mismatch),
        window_delta=window_delta,
        window_envelope=window_envelope,
    )


def fit_constants(model: AsymptoticModel, eps, c11, c22, slope_tolerance: float = 0.1) -> FitReport:
    """Fit M_1 and M_2 independently.

    Raises:
        FitError: on fewer than five points or less than two decades of span.
    """
    eps = np.asarray(eps, dtype=float)
    fits = (
        fit_constant(model, eps, c11, slope_tolerance),
        fit_constant(model, eps, c22, slope_tolerance),
    )
    logger.info("Fitted M1=%.6g M2=%.6g over %d points", fits[0].constant, fits[1].constant, len(eps))
    return FitReport(model=model.with_constants(fits[0].constant, fits[1].constant), eps=np.sort(eps)[::-1], fits=fits)


def lambda2_slope(rho, lambda2) -> float:
    """Linear coefficient of lambda_2 against rho_m."""
    return float(np.polyfit(np.asarray(rho, dtype=float), np.asarray(lambda2, dtype=float), 1)[0])
