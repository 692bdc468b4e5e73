import json
import math

import pytest

from cli.commands.blowup import summarize
from cli.main import main
from cli.schemas.experiment import ExperimentConfig, SweepPoint
from cli.utils.config_file import load_config_file, merge_config
from cli.utils.records_io import read_records, records_to_csv, write_records
from cli.utils.rows import build_record
from cli.utils.sweep import all_failed, failed_record, run_sweep
from physics.errors import ConfigError, FitError
from physics.geometry import build_pair, gap_profile
from physics.materials import MaterialParams
from physics.sphere_oracle import two_sphere_capacitance
from tests.conftest import UNIT_SPHERE, make_record

SPHERE_CONSTANT = 2.0 * math.pi * (2.0 * math.log(2.0) + 0.5772156649015329)

# ── Config ─────────────────────────────────────────────────────


def test_config_file_and_flag_override(tmp_path):
    path = tmp_path / "quartic.cfg"
    path.write_text("family = superellipsoid\nm = 4\neps-sweep = 0.004 0.0001 6\nlevel = 1\noracle\n")
    values = load_config_file(path)
    assert values["eps_sweep"] == ("0.004", "0.0001", "6")
    assert values["oracle"] is True

    config = merge_config(values, {"m": None, "level": 2})
    assert config.m == 4
    assert config.level == 2
    assert config.eps_sweep == (0.004, 0.0001, 6)
    assert len(config.sweep_points()) == 6


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config_file(tmp_path / "absent.cfg")


@pytest.mark.parametrize(
    "values",
    [
        {"family": "sphere", "m": 4},
        {"family": "ellipsoid", "eps": 0.1},
        {"eps": 0.1, "rho": 1.0},
        {"delta_sweep": (0.1, 0.01, 3)},
        {"eps": 0.1, "colour": "red"},
        {"eps": -0.1},
    ],
)
def test_invalid_config_rejected(values):
    with pytest.raises(ConfigError):
        merge_config({}, values)


def test_sweep_points():
    config = ExperimentConfig(eps_sweep=(0.1, 0.001, 3))
    assert [p.eps for p in config.sweep_points()] == pytest.approx([0.1, 0.01, 0.001])

    coupled = ExperimentConfig(family="superellipsoid", m=4, delta_sweep=(0.1, 0.01, 2), beta=0.5)
    points = coupled.sweep_points()
    assert [p.eps for p in points] == pytest.approx([0.1, 0.01])
    assert [p.delta for p in points] == pytest.approx([0.1, 0.01])
    assert coupled.has_materials
    assert coupled.materials(points[0].delta).delta == pytest.approx(0.1)

    with pytest.raises(ConfigError):
        ExperimentConfig().sweep_points()


def test_config_materials():
    assert ExperimentConfig(eps=0.1).materials() is None
    bulk = ExperimentConfig(eps=0.1, rho=2.0, rho_b=0.02, kappa=2.0, kappa_b=0.08)
    assert bulk.materials() == MaterialParams(rho=2.0, rho_b=0.02, kappa=2.0, kappa_b=0.08)
    assert ExperimentConfig(eps=0.1, delta=0.01, vb=3.0).materials().v_b == pytest.approx(3.0)


# ── Records ────────────────────────────────────────────────────


def test_csv_keeps_full_precision(tmp_path):
    value = 0.1 + 0.2
    record = make_record(eps=value, flags=["sign_violation", "no_materials"], valid=False)
    csv_path = write_records([record, make_record()], tmp_path / "rows")
    assert "0.30000000000000004" in csv_path.read_text()
    for path in (csv_path, tmp_path / "rows.json"):
        loaded = read_records(path)
        assert loaded[0].eps == value
        assert loaded[0].flags == ["sign_violation", "no_materials"]
        assert not loaded[0].valid
        assert loaded[1] == make_record()


def test_csv_header_lists_every_column():
    header = records_to_csv([make_record()]).splitlines()[0].split(",")
    assert header[0] == "eps"
    assert header[-2:] == ["valid", "flags"]


def test_read_records_rejects_foreign_file(tmp_path):
    path = tmp_path / "other.csv"
    path.write_text("name,score\nx,1\n")
    with pytest.raises(ConfigError):
        read_records(path)


def test_build_record_flags():
    pair = build_pair(UNIT_SPHERE, UNIT_SPHERE, 2.0)
    cap = two_sphere_capacitance(1.0, 1.0, 2.0)
    record = build_record(SweepPoint(0, 2.0), gap_profile(pair), cap, method="oracle")
    assert "eps_outside_asymptotic_range" in record.flags
    assert "no_materials" in record.flags
    assert record.rho_m is None
    assert record.omega1 is None
    assert record.valid

    close = build_record(
        SweepPoint(0, 0.01),
        gap_profile(build_pair(UNIT_SPHERE, UNIT_SPHERE, 0.01)),
        two_sphere_capacitance(1.0, 1.0, 0.01),
        materials=MaterialParams.from_contrast(0.01, 1.0),
    )
    assert close.rho_m == pytest.approx(math.log(100.0))
    assert close.omega_ratio > 1.0
    assert close.kb2 == pytest.approx(close.omega2)
    assert close.flags == []


def test_run_sweep_keeps_order_and_turns_errors_into_rows():
    points = [SweepPoint(i, 10.0 ** -(i + 1)) for i in range(4)]

    def task(point):
        if point.index == 2:
            raise ValueError("boom")
        return make_record(eps=point.eps)

    records = run_sweep(points, task, lambda p, err: failed_record(p, 2, err), workers=3)
    assert [r.eps for r in records] == [p.eps for p in points]
    assert records[2].flags == ["ValueError: boom"]
    assert not records[2].valid
    assert not all_failed(records)


def test_blowup_summary_from_rows():
    eps = [0.1, 0.03, 0.01, 0.003, 0.001]
    rows = [make_record(e, max_grad_u1=e**-0.3, max_grad_u2=2.0 * e**-0.5) for e in eps]
    rows.append(make_record(0.5, valid=False, max_grad_u1=1.0, max_grad_u2=1.0))
    summary = summarize(rows)
    assert summary.points == 5
    assert summary.slope_u2 == pytest.approx(0.5)
    assert summary.ratio_decreasing
    with pytest.raises(FitError):
        summarize(rows[:3])


# ── Entry point ────────────────────────────────────────────────


def test_schema_dump(capsys):
    assert main(["--schema"]) == 0
    columns = json.loads(capsys.readouterr().out)
    names = [c["column"] for c in columns]
    assert names[:2] == ["eps", "delta"]
    assert "omega_ratio" in names
    assert all(c["description"] for c in columns)


def test_no_command_is_config_error():
    assert main([]) == 1


def test_oracle_sweep_then_fit(tmp_path):
    out = tmp_path / "oracle"
    assert main(["oracle", "--eps-sweep", "0.1", "1e-6", "8", "--out", str(out)]) == 0
    records = read_records(tmp_path / "oracle.csv")
    assert len(records) == 8
    assert all(r.valid and r.method == "oracle" for r in records)

    report_path = tmp_path / "fit.json"
    assert main(["fit", "--records", str(tmp_path / "oracle.json"), "--out", str(report_path)]) == 0
    report = json.loads(report_path.read_text())
    assert report["m1"] == pytest.approx(SPHERE_CONSTANT, rel=0.02)
    assert report["m2"] == pytest.approx(report["m1"], rel=1e-9)
    assert len(report["envelope"]) == 8


def test_fit_writes_constants_back_into_records(tmp_path):
    out = tmp_path / "oracle"
    assert main(["oracle", "--eps-sweep", "0.1", "1e-6", "8", "--out", str(out)]) == 0
    rows = read_records(tmp_path / "oracle.csv")
    assert all(r.m1 is None for r in rows)
    skipped = make_record(0.5, valid=False, flags=["OracleError: diverged"])
    write_records([*rows, skipped], out)

    report_path = tmp_path / "fit.json"
    assert main(["fit", "--records", str(tmp_path / "oracle.csv"), "--out", str(report_path)]) == 0
    report = json.loads(report_path.read_text())
    fitted = read_records(tmp_path / "oracle.json")
    assert [r.m1 for r in fitted[:8]] == [report["m1"]] * 8
    assert [r.m2 for r in fitted[:8]] == [report["m2"]] * 8
    assert all("not_fitted" not in r.flags for r in fitted[:8])
    assert fitted[8].m1 is None
    assert fitted[8].flags == ["OracleError: diverged", "not_fitted"]


def test_oracle_output_is_deterministic(tmp_path):
    for name in ("first", "second"):
        assert main(["oracle", "--eps-sweep", "0.5", "0.001", "4", "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "first.csv").read_bytes() == (tmp_path / "second.csv").read_bytes()


@pytest.mark.parametrize(
    "argv",
    [
        ["capacitance", "--level", "0"],
        ["fit"],
        ["resonance", "--eps", "0.1", "--level", "0"],
        ["oracle", "--family", "superellipsoid", "--m", "4", "--eps", "0.1"],
        ["capacitance", "--family", "superellipsoid", "--m", "4", "--eps", "0.1", "--oracle"],
        ["capacitance", "--eps", "0.1", "--grading", "5"],
    ],
)
def test_configuration_errors_exit_one(argv):
    assert main(argv) == 1


def test_fit_with_too_few_rows_exits_one(tmp_path):
    out = tmp_path / "short"
    assert main(["oracle", "--eps-sweep", "0.1", "0.01", "3", "--out", str(out)]) == 0
    assert main(["fit", "--records", str(tmp_path / "short.csv")]) == 1


def test_every_row_failing_exits_two(tmp_path):
    out = tmp_path / "bad"
    assert main(["oracle", "--eps-sweep", "0.1", "0.01", "3", "--tol", "1e-3", "--out", str(out)]) == 2
    records = read_records(tmp_path / "bad.csv")
    assert all(r.flags[0].startswith("OracleError") for r in records)


def test_mesh_command_writes_off(tmp_path, capsys):
    assert main(["mesh", "--eps", "0.5", "--level", "0", "--out", str(tmp_path / "pair")]) == 0
    text = capsys.readouterr().out
    assert "body 1:" in text and "body 2:" in text
    assert "euler=2" in text
    assert (tmp_path / "pair.off").read_text().startswith("OFF")


def test_capacitance_run_with_oracle(tmp_path):
    out = tmp_path / "cap"
    assert main(["capacitance", "--eps", "0.5", "--level", "1", "--oracle", "--out", str(out)]) == 0
    (record,) = read_records(tmp_path / "cap.json")
    assert record.valid
    assert record.method == "cholesky"
    assert record.c12 < 0 < record.c11
    assert record.oracle_c11_dev < 0.1
    assert record.oracle_c12_dev < 0.2


def test_resonance_run(tmp_path):
    out = tmp_path / "res"
    argv = ["resonance", "--eps", "0.5", "--level", "1", "--delta", "0.01", "--vb", "1", "--out", str(out)]
    assert main(argv) == 0
    (record,) = read_records(tmp_path / "res.csv")
    assert record.omega_ratio > 1.0
    assert record.omega2_asym is not None
    assert record.delta == pytest.approx(0.01)


def test_resonance_run_on_prolate_ellipsoids(tmp_path):
    out = tmp_path / "prolate"
    argv = ["resonance", "--family", "ellipsoid", "--axes", "1", "1", "2", "--eps", "0.2", "--level", "1"]
    assert main([*argv, "--delta", "0.01", "--vb", "1", "--out", str(out)]) == 0
    (record,) = read_records(tmp_path / "prolate.csv")
    assert record.valid
    assert record.lam == pytest.approx(2.0)
    assert record.vol1 == pytest.approx(8.0 * math.pi / 3.0, rel=0.1)
    assert record.c12 < 0 < record.c11
    assert record.omega_ratio > 1.0
