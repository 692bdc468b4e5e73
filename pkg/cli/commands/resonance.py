import logging

from cli.commands.capacitance import run_points
from cli.schemas.experiment import ExperimentConfig
from cli.schemas.record import SweepRecord
from cli.utils.records_io import write_records
from physics.errors import ConfigError

logger = logging.getLogger(__name__)


def cmd_resonance(config: ExperimentConfig) -> list[SweepRecord]:
    """Capacitance sweep plus numeric and asymptotic resonances for every row."""
    if not config.has_materials:
        raise ConfigError("resonance needs materials: --delta/--vb, rho/rho_b/kappa/kappa_b, or --delta-sweep")
    records = run_points(config)
    ratios = [r.omega_ratio for r in records if r.omega_ratio is not None]
    if ratios:
        logger.info("omega2/omega1 ranges over [%.4g, %.4g] across %d rows", min(ratios), max(ratios), len(ratios))
    write_records(records, config.out)
    return records
