import numpy as np
import pytest

from physics.capacitance import capacitance_from_entries
from physics.errors import CapacitanceError, DomainError, FitError
from physics.geometry import build_pair
from physics.materials import MaterialParams
from physics.modes import (
    blowup_point,
    blowup_slopes,
    build_mode,
    gap_grid,
    keller_bound_check,
    keller_function,
    mode_boundary_values,
    scan_gap,
    too_close,
)

# ── Modes ──────────────────────────────────────────────────────


def test_mode_density_is_combination(solved_spheres):
    densities, cap = solved_spheres.densities, solved_spheres.capacitance
    mode = build_mode(2, densities, cap)
    np.testing.assert_allclose(mode.density, cap.reduction.r2 * densities.psi1 + densities.psi2)
    assert mode.lam == cap.reduction.lambda2
    assert mode.omega is None


def test_congruent_modes_are_symmetric_and_antisymmetric(solved_spheres):
    densities, cap = solved_spheres.densities, solved_spheres.capacitance
    first, second = build_mode(1, densities, cap), build_mode(2, densities, cap)
    assert first.ratio == pytest.approx(1.0, abs=0.02)
    assert second.ratio == pytest.approx(-1.0, abs=0.02)
    assert second.boundary_values == (second.ratio, 1.0)


def test_mode_boundary_values(solved_spheres):
    mesh, system = solved_spheres.mesh, solved_spheres.system
    mode = build_mode(2, solved_spheres.densities, solved_spheres.capacitance)
    values = mode_boundary_values(mode, system)
    assert np.mean(values[mesh.mask(1)]) == pytest.approx(mode.ratio, abs=0.02)
    assert np.mean(values[mesh.mask(2)]) == pytest.approx(1.0, abs=0.02)


def test_mode_frequency_with_materials(solved_spheres):
    materials = MaterialParams.from_contrast(0.01, 2.0)
    mode = build_mode(2, solved_spheres.densities, solved_spheres.capacitance, materials)
    assert mode.omega == pytest.approx(np.sqrt(0.01 * 4.0 * mode.lam))


def test_build_mode_rejects_bad_index_and_decoupled(solved_spheres):
    with pytest.raises(CapacitanceError):
        build_mode(3, solved_spheres.densities, solved_spheres.capacitance)
    decoupled = capacitance_from_entries(np.array([[2.0, -1.0], [0.0, 2.0]]), (1.0, 1.0))
    with pytest.raises(CapacitanceError):
        build_mode(1, solved_spheres.densities, decoupled)


# ── Gap grid and Keller function ───────────────────────────────


def test_gap_grid_layout(unit_sphere):
    pair = build_pair(unit_sphere, unit_sphere, 0.01)
    grid = gap_grid(pair)
    assert len(grid.points) == 57
    assert grid.kinds.count("axis") == 9
    np.testing.assert_allclose(sorted(set(grid.radii[grid.radii > 0])), [0.1, 0.2, 0.25])
    assert np.all(pair.body_at(grid.points) == 0)
    axis = grid.points[:9, 2]
    assert np.all((axis > 0) & (axis < 0.01))


def test_gap_grid_drops_wide_rings(unit_sphere):
    # pinch radius sqrt(0.95) lies past the gap region
    grid = gap_grid(build_pair(unit_sphere, unit_sphere, 0.95), ring_points=8)
    assert len(grid.points) == 9 + 8
    assert grid.radii.max() == pytest.approx(0.25)


def test_keller_function_values(unit_sphere):
    pair = build_pair(unit_sphere, unit_sphere, 0.1)
    value, gradient = keller_function(pair, np.array([0.0, 0.0, 0.05]))
    assert value == pytest.approx(0.5)
    np.testing.assert_allclose(gradient, [0.0, 0.0, 10.0], atol=1e-12)
    values, _ = keller_function(pair, np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.1]]))
    np.testing.assert_allclose(values, [0.0, 1.0])


def test_keller_function_lateral_gradient(unit_sphere):
    pair = build_pair(unit_sphere, unit_sphere, 0.1)
    x, step = np.array([0.2, 0.1, 0.03]), 1e-6
    _, gradient = keller_function(pair, x)
    for k in range(2):
        shift = np.zeros(3)
        shift[k] = step
        fd = (keller_function(pair, x + shift)[0] - keller_function(pair, x - shift)[0]) / (2 * step)
        assert gradient[k] == pytest.approx(fd, rel=1e-5)


def test_keller_function_outside_gap(unit_sphere):
    pair = build_pair(unit_sphere, unit_sphere, 0.1)
    outside = np.array([0.0, 0.0, 0.2])
    with pytest.raises(DomainError):
        keller_function(pair, outside)
    value, gradient = keller_function(pair, outside, zero_outside=True)
    assert value == 0.0
    np.testing.assert_array_equal(gradient, 0.0)


# ── Scans ──────────────────────────────────────────────────────


def test_scan_of_first_density_stays_between_potentials(solved_close_spheres):
    scan = scan_gap(solved_close_spheres.pair, solved_close_spheres.mesh, solved_close_spheres.densities.psi1)
    values = scan.values[~scan.skipped]
    assert values.size > 0
    assert np.all((values > -0.05) & (values < 1.05))
    assert scan.max_gradient > 1.0


def test_too_close_flags_points_on_panels(solved_close_spheres):
    mesh = solved_close_spheres.mesh
    points = np.vstack([mesh.centroids[0], [0.0, 0.0, 0.05], [5.0, 0.0, 0.0]])
    np.testing.assert_array_equal(too_close(mesh, points), [True, False, False])


def test_keller_bound_on_close_spheres(solved_close_spheres):
    pair, mesh = solved_close_spheres.pair, solved_close_spheres.mesh
    report = keller_bound_check(pair, mesh, solved_close_spheres.densities.psi1)
    assert report.keller_peak == pytest.approx(10.0)
    assert 1.0 / 3.0 <= report.midline_scaled <= 3.0
    assert np.isfinite(report.max_deviation)


# ── Blow-up ────────────────────────────────────────────────────


def test_blowup_point_antisymmetric_mode_dominates(solved_close_spheres):
    point = blowup_point(solved_close_spheres)
    assert point.max_grad_u2 > point.max_grad_u1
    assert point.gradient_ratio < 1.0
    assert point.trusted


def test_blowup_slopes_on_synthetic_powers():
    eps = np.array([1e-2, 1e-1, 1e-3, 3e-2, 3e-3])
    report = blowup_slopes(eps, 3.0 * eps**-0.3, 2.0 * eps**-0.5)
    assert report.slope_u2 == pytest.approx(0.5)
    assert report.prefactor_u2 == pytest.approx(2.0)
    assert report.slope_u1 == pytest.approx(0.3)
    assert report.eps[0] == pytest.approx(0.1)
    assert report.ratio_decreasing


def test_blowup_slopes_need_span():
    with pytest.raises(FitError):
        blowup_slopes([0.1, 0.01, 0.001], [1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    with pytest.raises(FitError):
        blowup_slopes([0.1, 0.07, 0.05, 0.03], [1.0] * 4, [1.0] * 4)
