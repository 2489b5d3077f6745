import json

import pandas as pd
import pytest

import reports
from risk_core import evaluate
from scenario_lab import Axis, allocate_branch_headways, mask_tradeoff_table, sweep_headway


def test_report_json_round_trip(tmp_path, branch_case):
    report = evaluate(branch_case)
    path = tmp_path / "out" / "report.json"
    reports.write_report_json(report, path, branch_case)
    data = reports.read_report_json(path)
    assert data["system_P"] == report.system_P
    assert data["scenario"] == "toy"
    assert data["meta"] == {"A": 0.5, "B": 1.0, "A_unmasked": 1.0}
    assert reports.recompute_system_P(data) == pytest.approx(report.system_P, abs=1e-12)
    assert len(data["rows"]) == len(report.rows)


def test_grid_csv_is_row_major(tmp_path, line3_case):
    grid = sweep_headway(line3_case, Axis("headway", 2.0, 4.0, 2.0), Axis("pi", 0.01, 0.02, 0.01))
    path = tmp_path / "grid.csv"
    reports.write_grid(grid, path, per_1000=True)
    frame = pd.read_csv(path)
    assert list(zip(frame["headway"], frame["pi"])) == [(2.0, 0.01), (2.0, 0.02), (4.0, 0.01), (4.0, 0.02)]
    assert frame["value"].iloc[0] == pytest.approx(grid.cells[0, 0] * 1000, rel=1e-8)
    meta = json.loads(reports.sidecar(path, ".json").read_text())
    assert meta["units"] == "per_1000"
    assert meta["axis1"]["name"] == "headway"
    assert len(meta["scenario_hash"]) == 16


def test_csv_output_is_reproducible(tmp_path, line3_case):
    grid = sweep_headway(line3_case, Axis("headway", 2.0, 4.0, 1.0), Axis("fm", 0.0, 0.5, 0.5))
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    reports.write_grid(grid, first)
    reports.write_grid(grid, second)
    assert first.read_bytes() == second.read_bytes()
    assert first.read_text().splitlines()[0] == "headway,fm,value"


def test_allocation_minutes_are_clean(tmp_path, symmetric_case):
    result = allocate_branch_headways(symmetric_case, [m / 60.0 for m in (3.5, 4.5, 5.5)])
    path = tmp_path / "alloc.csv"
    reports.write_allocation(result, path)
    text = path.read_text().splitlines()
    assert text[0] == "h_ab_min,h_ba_min,system_P,P_A,P_B"
    assert text[2].startswith("4.5,4.5,")
    summary = json.loads(reports.sidecar(path, ".json").read_text())
    assert summary["argmin_h_ab_min"] == 4.5


def test_tradeoff_csv(tmp_path):
    path = tmp_path / "tradeoff.csv"
    reports.write_tradeoff(mask_tradeoff_table([1.0, 5.0]), path)
    frame = pd.read_csv(path)
    assert frame["F_m"].tolist() == pytest.approx([0.5, 0.1])
    assert pd.isna(frame["f_m"].iloc[1])
