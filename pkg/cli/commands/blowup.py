import logging
from functools import partial
from pathlib import Path

from cli.schemas.experiment import ExperimentConfig, SweepPoint
from cli.schemas.record import BlowupSummary, SweepRecord
from cli.utils.records_io import write_model, write_records
from cli.utils.rows import build_record
from cli.utils.sweep import all_failed, failed_record, run_sweep
from physics.geometry import build_pair
from physics.modes import blowup_point, blowup_slopes
from physics.pipeline import solve_pair

logger = logging.getLogger(__name__)


def blowup_row(config: ExperimentConfig, point: SweepPoint) -> SweepRecord:
    upper, lower = config.bodies()
    pair = build_pair(upper, lower, point.eps)
    solution = solve_pair(pair, config.level, grading=config.grading, depth=config.depth)
    measured = blowup_point(solution)
    record = build_record(
        point,
        solution.profile,
        solution.capacitance,
        materials=config.materials(point.delta),
        densities=solution.densities,
        n_panels=solution.mesh.n_panels,
    )
    return record.model_copy(
        update={
            "max_grad_u1": measured.max_grad_u1,
            "max_grad_u2": measured.max_grad_u2,
            "max_grad_sum": measured.max_grad_sum,
        }
    )


def summarize(records: list[SweepRecord]) -> BlowupSummary:
    """Slopes over the valid rows.

    Raises:
        FitError: on fewer than four valid rows or less than 1.5 decades.
    """
    rows = [r for r in records if r.valid and r.max_grad_u1 is not None]
    report = blowup_slopes([r.eps for r in rows], [r.max_grad_u1 for r in rows], [r.max_grad_u2 for r in rows])
    return BlowupSummary(
        points=len(rows),
        slope_u2=report.slope_u2,
        prefactor_u2=report.prefactor_u2,
        slope_u1=report.slope_u1,
        ratio_decreasing=report.ratio_decreasing,
        ratios=[float(v) for v in report.ratios],
    )


def cmd_blowup(config: ExperimentConfig) -> list[SweepRecord]:
    """Per-row max gradients of both modes, then the slope summary next to the table."""
    records = run_sweep(
        config.sweep_points(),
        partial(blowup_row, config),
        lambda point, err: failed_record(point, config.m, err),
        workers=config.workers,
    )
    write_records(records, config.out)
    if all_failed(records):
        return records
    summary = summarize(records)
    target = None if config.out is None else Path(config.out).with_name(f"{Path(config.out).stem}.slopes.json")
    write_model(summary, target)
    return records
