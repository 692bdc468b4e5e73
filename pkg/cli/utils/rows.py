"""Builders that flatten solver results into SweepRecord rows."""

from typing import Any

from cli.schemas.experiment import SweepPoint
from cli.schemas.record import SweepRecord
from physics.asymptotics import AsymptoticModel, omega_asymptotic, rho_m
from physics.capacitance import CapacitanceMatrix, frequency_from_eigen, lambda2_leading, wavenumbers
from physics.errors import CapacitanceError, DomainError
from physics.geometry import GapProfile
from physics.laplace_bem import DensitySolution
from physics.materials import MaterialParams
from physics.sphere_oracle import OracleComparison


def _capacitance_fields(cap: CapacitanceMatrix) -> dict[str, Any]:
    reduction = cap.reduction
    return {
        "c11": float(cap.c[0, 0]),
        "c12": float(cap.c[0, 1]),
        "c21": float(cap.c[1, 0]),
        "c22": float(cap.c[1, 1]),
        "vol1": cap.volumes[0],
        "vol2": cap.volumes[1],
        "symmetry_error": cap.symmetry_error,
        "lambda1": reduction.lambda1,
        "lambda2": reduction.lambda2,
        "lambda2_leading": lambda2_leading(reduction, cap.c_bar),
        "c_star": reduction.c_star,
        "sigma1": reduction.sigma1,
        "sigma2": reduction.sigma2,
        "r1": reduction.r1,
        "r2": reduction.r2,
    }


def _resonance_fields(
    cap: CapacitanceMatrix,
    model: AsymptoticModel,
    eps: float,
    flags: list[str],
) -> dict[str, Any]:
    materials = model.materials
    fields: dict[str, Any] = {"delta": materials.delta}
    omegas = []
    for index, lam in enumerate(cap.reduction.lambdas, start=1):
        try:
            omegas.append(frequency_from_eigen(lam, materials))
        except (CapacitanceError, DomainError) as err:
            flags.append(f"omega{index}_undefined: {err}")
            omegas.append(None)
    fields["omega1"], fields["omega2"] = omegas
    if all(omega is not None for omega in omegas):
        fields["omega_ratio"] = omegas[1] / omegas[0]
        fields["kb1"], fields["kb2"] = (float(k) for k in wavenumbers(omegas, materials))
    else:
        flags.append("omega_ratio_undefined")

    if 0 < eps < 1:
        estimate = omega_asymptotic(model, eps, c_star=cap.reduction.c_star)
        fields["omega2_asym"] = estimate.omega2
        fields["omega1_asym"] = estimate.omega1
        if estimate.omega1 is None:
            flags.append("c_star_nonpositive")
    return fields


def build_record(
    point: SweepPoint,
    profile: GapProfile,
    cap: CapacitanceMatrix,
    materials: MaterialParams | None = None,
    densities: DensitySolution | None = None,
    n_panels: int | None = None,
    oracle: OracleComparison | None = None,
    method: str | None = None,
) -> SweepRecord:
    flags = list(cap.flags)
    valid = cap.valid
    values: dict[str, Any] = {
        "eps": point.eps,
        "delta": point.delta,
        "m": profile.m,
        "lam": profile.lam,
        "n_panels": n_panels,
        "method": method,
    }
    values.update(_capacitance_fields(cap))

    if densities is not None:
        values["condition"] = densities.condition
        values["residual"] = densities.collocation_residual
        values["method"] = densities.method
        if not densities.trusted:
            flags.append("untrusted_solve")
            valid = False

    model = AsymptoticModel.from_profile(profile, cap.volumes, materials)
    if 0 < point.eps < 1:
        values["rho_m"] = rho_m(profile.m, point.eps)
        values["c11_leading"] = model.leading_coefficient * values["rho_m"]
    else:
        flags.append("eps_outside_asymptotic_range")

    if materials is not None:
        values.update(_resonance_fields(cap, model, point.eps, flags))
    else:
        flags.append("no_materials")

    if oracle is not None:
        dev = oracle.deviations
        values.update(
            oracle_c11_dev=float(dev[0, 0]),
            oracle_c12_dev=float(dev[0, 1]),
            oracle_c21_dev=float(dev[1, 0]),
            oracle_c22_dev=float(dev[1, 1]),
        )
    return SweepRecord(**values, valid=valid, flags=flags)
