from typing import Optional

from pydantic import BaseModel, Field


class SweepRecord(BaseModel):
    """One row of a sweep. Every null numeric column is explained by an entry in `flags`."""

    eps: float = Field(description="Gap distance between the contact poles")
    delta: Optional[float] = Field(None, description="Density contrast rho_b / rho")
    m: int = Field(description="Convexity order of the gap profile")
    lam: Optional[float] = Field(None, description="Gap profile coefficient Lambda (geometric mean for ellipsoids)")
    n_panels: Optional[int] = Field(None, description="Number of boundary panels")
    condition: Optional[float] = Field(None, description="1-norm condition estimate of the dense system")
    residual: Optional[float] = Field(None, description="Max collocation residual |S[psi] - 1|")
    method: Optional[str] = Field(None, description="Factorization used: cholesky, lu, or oracle")

    c11: Optional[float] = Field(None, description="Capacitance entry C_11")
    c12: Optional[float] = Field(None, description="Capacitance entry C_12")
    c21: Optional[float] = Field(None, description="Capacitance entry C_21")
    c22: Optional[float] = Field(None, description="Capacitance entry C_22")
    vol1: Optional[float] = Field(None, description="Volume |D_1| of the upper body")
    vol2: Optional[float] = Field(None, description="Volume |D_2| of the lower body")
    symmetry_error: Optional[float] = Field(None, description="|C_12 - C_21| / |C_12|")

    lambda1: Optional[float] = Field(None, description="Smaller eigenvalue of the volume-scaled capacitance matrix")
    lambda2: Optional[float] = Field(None, description="Larger eigenvalue of the volume-scaled capacitance matrix")
    lambda2_leading: Optional[float] = Field(None, description="C_bar11 + C_bar22 - C_*")
    c_star: Optional[float] = Field(None, description="(C_bar11 sigma_2 + C_bar22 sigma_1) / (C_bar11 + C_bar22)")
    sigma1: Optional[float] = Field(None, description="C_bar11 + C_bar12")
    sigma2: Optional[float] = Field(None, description="C_bar22 + C_bar21")
    r1: Optional[float] = Field(None, description="Eigenvector ratio of mode 1")
    r2: Optional[float] = Field(None, description="Eigenvector ratio of mode 2")

    omega1: Optional[float] = Field(None, description="Numeric resonance sqrt(delta v_b^2 lambda_1)")
    omega2: Optional[float] = Field(None, description="Numeric resonance sqrt(delta v_b^2 lambda_2)")
    omega1_asym: Optional[float] = Field(None, description="Asymptotic resonance sqrt(delta v_b^2 C_*)")
    omega2_asym: Optional[float] = Field(None, description="Asymptotic resonance from the leading C_ii term")
    omega_ratio: Optional[float] = Field(None, description="omega2 / omega1")
    kb1: Optional[float] = Field(None, description="Interior wavenumber omega1 / v_b")
    kb2: Optional[float] = Field(None, description="Interior wavenumber omega2 / v_b")

    rho_m: Optional[float] = Field(None, description="Blow-up rate rho_m(eps)")
    c11_leading: Optional[float] = Field(None, description="Leading term L_m / Lambda^(2/m) * rho_m(eps)")
    m1: Optional[float] = Field(
        None, description="Fitted constant M_1 (written back by fit; rows left out are flagged not_fitted)"
    )
    m2: Optional[float] = Field(None, description="Fitted constant M_2 (written back by the fit command)")

    max_grad_u1: Optional[float] = Field(None, description="Max |grad u_1| over the gap grid (blowup command)")
    max_grad_u2: Optional[float] = Field(None, description="Max |grad u_2| over the gap grid (blowup command)")
    max_grad_sum: Optional[float] = Field(None, description="Max |grad(v_1 + v_2)| over the gap grid (blowup command)")

    oracle_c11_dev: Optional[float] = Field(None, description="Relative deviation of C_11 from the image-charge oracle")
    oracle_c12_dev: Optional[float] = Field(None, description="Relative deviation of C_12 from the image-charge oracle")
    oracle_c21_dev: Optional[float] = Field(None, description="Relative deviation of C_21 from the image-charge oracle")
    oracle_c22_dev: Optional[float] = Field(None, description="Relative deviation of C_22 from the image-charge oracle")

    valid: bool = Field(True, description="False when the row failed or violates the capacitance sign pattern")
    flags: list[str] = Field(default_factory=list, description="Reasons for invalid rows and null columns")


class EnvelopeRow(BaseModel):
    eps: float
    rho_m: float
    e_m: float
    residual1: float
    residual2: float
    ratio1: float
    ratio2: float


class FitReportRead(BaseModel):
    m: int
    lam: float
    leading_coefficient: float
    m1: float
    m2: float
    slope_ratio1: float
    slope_ratio2: float
    window_delta1: float
    window_delta2: float
    window_envelope1: float
    window_envelope2: float
    lambda2_slope: Optional[float] = Field(None, description="d lambda_2 / d rho_m from the records")
    lambda2_slope_expected: Optional[float] = Field(None, description="(1/|D_1| + 1/|D_2|) L_m / Lambda^(2/m)")
    flags: list[str] = []
    envelope: list[EnvelopeRow] = []


class BlowupSummary(BaseModel):
    points: int
    slope_u2: float
    prefactor_u2: float
    slope_u1: float
    ratio_decreasing: bool
    ratios: list[float]
