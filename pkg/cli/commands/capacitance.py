import logging
from functools import partial

from cli.schemas.experiment import ExperimentConfig, SweepPoint
from cli.schemas.record import SweepRecord
from cli.utils.records_io import write_records
from cli.utils.rows import build_record
from cli.utils.sweep import failed_record, run_sweep
from physics.errors import ConfigError
from physics.geometry import ShapeFamily, build_pair
from physics.pipeline import solve_pair
from physics.sphere_oracle import compare, two_sphere_capacitance

logger = logging.getLogger(__name__)


def solve_point(config: ExperimentConfig, point: SweepPoint) -> SweepRecord:
    """BEM solve of one sweep row, with oracle deviations when requested."""
    upper, lower = config.bodies()
    pair = build_pair(upper, lower, point.eps)
    solution = solve_pair(pair, config.level, grading=config.grading, depth=config.depth)
    comparison = None
    if config.oracle:
        oracle = two_sphere_capacitance(upper.a, lower.a, point.eps, tol=config.tol)
        comparison = compare(oracle, solution.capacitance)
    return build_record(
        point,
        solution.profile,
        solution.capacitance,
        materials=config.materials(point.delta),
        densities=solution.densities,
        n_panels=solution.mesh.n_panels,
        oracle=comparison,
    )


def run_points(config: ExperimentConfig) -> list[SweepRecord]:
    if config.oracle and config.family != ShapeFamily.SPHERE:
        raise ConfigError("--oracle applies to the sphere family only")
    return run_sweep(
        config.sweep_points(),
        partial(solve_point, config),
        partial(_failed, config),
        workers=config.workers,
    )


def _failed(config: ExperimentConfig, point: SweepPoint, err: Exception) -> SweepRecord:
    return failed_record(point, config.m, err)


def cmd_capacitance(config: ExperimentConfig) -> list[SweepRecord]:
    records = run_points(config)
    write_records(records, config.out)
    return records
