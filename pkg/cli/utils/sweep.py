import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

from scipy.linalg import LinAlgError

from cli.schemas.experiment import SweepPoint
from cli.schemas.record import SweepRecord
from physics.config import settings
from physics.errors import LabError

logger = logging.getLogger(__name__)

T = TypeVar("T")

ROW_ERRORS = (LabError, LinAlgError, ValueError, ArithmeticError)


def error_flag(err: Exception) -> str:
    return f"{type(err).__name__}: {err}".replace("\n", " ")


def failed_record(point: SweepPoint, m: int, err: Exception) -> SweepRecord:
    return SweepRecord(eps=point.eps, delta=point.delta, m=m, valid=False, flags=[error_flag(err)])


def run_sweep(
    points: Sequence[SweepPoint],
    task: Callable[[SweepPoint], T],
    on_error: Callable[[SweepPoint, Exception], T],
    workers: int | None = None,
) -> list[T]:
    """Map `task` over the sweep in parallel; results keep input order and failures become rows."""
    workers = settings.SWEEP_WORKERS if workers is None else workers

    def guarded(point: SweepPoint) -> T:
        try:
            result = task(point)
        except ROW_ERRORS as err:
            logger.exception("Sweep point %d (eps=%.4e) failed", point.index, point.eps)
            return on_error(point, err)
        logger.info("Sweep point %d/%d done (eps=%.4e)", point.index + 1, len(points), point.eps)
        return result

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(guarded, points))


def all_failed(records: Sequence[SweepRecord]) -> bool:
    return bool(records) and not any(record.valid for record in records)
