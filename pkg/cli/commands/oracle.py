import logging
from functools import partial

from cli.schemas.experiment import ExperimentConfig, SweepPoint
from cli.schemas.record import SweepRecord
from cli.utils.records_io import write_records
from cli.utils.rows import build_record
from cli.utils.sweep import failed_record, run_sweep
from physics.errors import ConfigError
from physics.geometry import ShapeFamily, build_pair, gap_profile
from physics.sphere_oracle import two_sphere_capacitance

logger = logging.getLogger(__name__)


def oracle_point(config: ExperimentConfig, point: SweepPoint) -> SweepRecord:
    upper, lower = config.bodies()
    cap = two_sphere_capacitance(config.a1, config.a2, point.eps, tol=config.tol)
    profile = gap_profile(build_pair(upper, lower, point.eps))
    return build_record(point, profile, cap, materials=config.materials(point.delta), method="oracle")


def cmd_oracle(config: ExperimentConfig) -> list[SweepRecord]:
    """Image-charge capacitance rows without any BEM solve."""
    if config.family != ShapeFamily.SPHERE:
        raise ConfigError("the oracle command applies to the sphere family only")
    records = run_sweep(
        config.sweep_points(),
        partial(oracle_point, config),
        lambda point, err: failed_record(point, config.m, err),
        workers=1,
    )
    write_records(records, config.out)
    return records
