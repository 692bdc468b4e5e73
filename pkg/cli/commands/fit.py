import logging

import numpy as np

from cli.schemas.experiment import ExperimentConfig
from cli.schemas.record import EnvelopeRow, FitReportRead, SweepRecord
from cli.utils.records_io import read_records, write_model, write_records
from physics.asymptotics import AsymptoticModel, e_m, fit_constants, lambda2_slope, rho_m
from physics.errors import ConfigError, FitError

logger = logging.getLogger(__name__)

NOT_FITTED = "not_fitted"


def _usable(records: list[SweepRecord]) -> list[SweepRecord]:
    rows = [r for r in records if r.valid and r.c11 is not None and r.c22 is not None and 0 < r.eps < 1]
    if len({(r.m, r.lam) for r in rows}) > 1:
        raise ConfigError("records mix several gap profiles; fit one geometry at a time")
    return rows


def fit_records(records: list[SweepRecord]) -> FitReportRead:
    """Fit M_1, M_2 from valid rows and tabulate the residuals against E_m.

    Raises:
        FitError: if too few usable rows remain.
    """
    rows = _usable(records)
    if not rows:
        raise FitError("no valid rows with 0 < eps < 1 to fit")
    first = rows[0]
    model = AsymptoticModel(m=first.m, lam=first.lam, volumes=(first.vol1, first.vol2))
    eps = np.array([r.eps for r in rows])
    c11 = np.array([r.c11 for r in rows])
    c22 = np.array([r.c22 for r in rows])
    report = fit_constants(model, eps, c11, c22)

    order = np.argsort(eps)[::-1]
    rho = np.asarray(rho_m(model.m, eps[order]), dtype=float)
    envelope = np.asarray(e_m(model.m, eps[order]), dtype=float)
    fit1, fit2 = report.fits
    table = [
        EnvelopeRow(
            eps=float(eps[k]),
            rho_m=float(rho[i]),
            e_m=float(envelope[i]),
            residual1=float(fit1.residuals[i]),
            residual2=float(fit2.residuals[i]),
            ratio1=float(fit1.envelope_ratios[i]),
            ratio2=float(fit2.envelope_ratios[i]),
        )
        for i, k in enumerate(order)
    ]

    slope = expected = None
    lambdas = [r.lambda2 for r in rows]
    if all(v is not None for v in lambdas):
        slope = lambda2_slope(np.asarray(rho_m(model.m, eps), dtype=float), lambdas)
        expected = model.inverse_volume_sum * model.leading_coefficient

    flags = report.flags
    for flag in flags:
        logger.warning("Fit flag: %s", flag)
    return FitReportRead(
        m=model.m,
        lam=model.lam,
        leading_coefficient=model.leading_coefficient,
        m1=report.m1,
        m2=report.m2,
        slope_ratio1=fit1.slope_ratio,
        slope_ratio2=fit2.slope_ratio,
        window_delta1=fit1.window_delta,
        window_delta2=fit2.window_delta,
        window_envelope1=fit1.window_envelope,
        window_envelope2=fit2.window_envelope,
        lambda2_slope=slope,
        lambda2_slope_expected=expected,
        flags=flags,
        envelope=table,
    )


def with_fit(records: list[SweepRecord], report: FitReportRead) -> list[SweepRecord]:
    """Copies of the records carrying the fitted M_1, M_2; rows left out of the fit are flagged."""
    fitted = {id(r) for r in _usable(records)}
    updated = []
    for record in records:
        if id(record) in fitted:
            flags = [f for f in record.flags if f != NOT_FITTED]
            updated.append(record.model_copy(update={"m1": report.m1, "m2": report.m2, "flags": flags}))
        else:
            flags = record.flags if NOT_FITTED in record.flags else [*record.flags, NOT_FITTED]
            updated.append(record.model_copy(update={"m1": None, "m2": None, "flags": flags}))
    return updated


def cmd_fit(config: ExperimentConfig) -> FitReportRead:
    """Fit the records file and write M_1, M_2 back into it next to the report."""
    if config.records is None:
        raise ConfigError("fit needs --records PATH")
    records = read_records(config.records)
    report = fit_records(records)
    write_records(with_fit(records, report), config.records)
    write_model(report, config.out)
    return report
