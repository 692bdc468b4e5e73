"""Sweep records as CSV (17 significant digits, '.' decimal) with a JSON mirror."""

import csv
import io
import logging
import sys
from pathlib import Path

from pydantic import BaseModel, TypeAdapter, ValidationError

from cli.schemas.record import SweepRecord
from physics.errors import ConfigError

logger = logging.getLogger(__name__)

COLUMNS = list(SweepRecord.model_fields)
FLAG_SEPARATOR = ";"

_records_adapter = TypeAdapter(list[SweepRecord])


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, list):
        return FLAG_SEPARATOR.join(value)
    return str(value)


def records_to_csv(records: list[SweepRecord]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(COLUMNS)
    for record in records:
        row = record.model_dump()
        writer.writerow([_format_cell(row[column]) for column in COLUMNS])
    return buffer.getvalue()


def records_to_json(records: list[SweepRecord]) -> str:
    return _records_adapter.dump_json(records, indent=2).decode("utf-8") + "\n"


def write_records(records: list[SweepRecord], out: Path | None) -> Path | None:
    """Write `out` as CSV and its `.json` mirror; without a path the CSV goes to stdout."""
    if out is None:
        sys.stdout.write(records_to_csv(records))
        return None
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    csv_path = out.with_suffix(".csv")
    csv_path.write_text(records_to_csv(records), encoding="utf-8")
    out.with_suffix(".json").write_text(records_to_json(records), encoding="utf-8")
    logger.info("Wrote %d records to %s", len(records), csv_path)
    return csv_path


def _parse_csv(text: str) -> list[SweepRecord]:
    rows = []
    for raw in csv.DictReader(io.StringIO(text)):
        row = {key: (value if value != "" else None) for key, value in raw.items()}
        row["flags"] = row["flags"].split(FLAG_SEPARATOR) if row.get("flags") else []
        rows.append(row)
    return _records_adapter.validate_python(rows)


def read_records(path: Path) -> list[SweepRecord]:
    """Load records from a CSV or JSON file written by `write_records`.

    Raises:
        ConfigError: if the file is missing or not a records file.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"records file not found: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        if path.suffix == ".json":
            return _records_adapter.validate_json(text)
        return _parse_csv(text)
    except ValidationError as err:
        raise ConfigError(f"{path} is not a sweep records file: {err}") from err


def write_model(model: BaseModel, out: Path | None) -> Path | None:
    """Single report as indented JSON, to `out` or stdout."""
    text = model.model_dump_json(indent=2) + "\n"
    if out is None:
        sys.stdout.write(text)
        return None
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")
    logger.info("Wrote %s to %s", type(model).__name__, out)
    return out
