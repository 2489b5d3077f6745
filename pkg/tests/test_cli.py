import json

import pandas as pd
import pytest

import reports
from fixtures import REDLINE_REFERENCE, REDLINE_SCENARIO, fixture_path
from main import main


def _run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def _error_line(err):
    return next(line for line in err.splitlines() if line.startswith("error: "))


def test_run_writes_report_and_od_table(tmp_path, capsys):
    out = tmp_path / "report.json"
    code, _, _ = _run(capsys, "run", "--out", str(out))
    assert code == 0
    data = reports.read_report_json(out)
    frozen = json.loads(fixture_path(REDLINE_REFERENCE).read_text())
    assert data["system_P"] == pytest.approx(frozen["system_P"], rel=5e-5)
    assert data["system_P_per_1000"] == pytest.approx(data["system_P"] * 1000)
    assert set(data["per_service"]) == {"A", "B"}
    assert len(data["per_car"]) == 6
    assert reports.recompute_system_P(data) == pytest.approx(data["system_P"], abs=1e-12)
    table = pd.read_csv(tmp_path / "report.ods.csv")
    assert list(table.columns) == ["origin", "destination", "pi", "flow", "r", "P"]
    assert len(table) == 179


def test_run_with_zero_infection_rate(tmp_path, capsys):
    cfg = json.loads(fixture_path(REDLINE_SCENARIO).read_text())
    cfg.update(topology=str(fixture_path(cfg["topology"])), od=str(fixture_path(cfg["od"])),
               infection_rate=0.0)
    path = tmp_path / "zero.json"
    path.write_text(json.dumps(cfg))
    code, _, _ = _run(capsys, "run", "--config", str(path), "--out", str(tmp_path / "r.json"))
    assert code == 0
    assert reports.read_report_json(tmp_path / "r.json")["system_P"] == 0.0


def test_run_missing_topology_exits_1(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"topology": "missing_topology.json", "od": "od.csv"}))
    code, _, err = _run(capsys, "run", "--config", str(path), "--out", str(tmp_path / "r.json"))
    assert code == 1
    assert _error_line(err).startswith("error: config_error:")
    assert "missing_topology.json" in err


def test_sweep_degenerate_cell(tmp_path, capsys):
    out = tmp_path / "grid.csv"
    code, _, _ = _run(capsys, "sweep", "--grid", "A=0:0:1,B=1:1:1", "--out", str(out))
    assert code == 0
    frame = pd.read_csv(out)
    assert list(frame.columns) == ["A", "B", "value"]
    assert len(frame) == 1
    assert frame["value"].iloc[0] == 0
    meta = json.loads((tmp_path / "grid.json").read_text())
    assert meta["shape"] == [1, 1]
    assert meta["susceptibles"] == "unmasked"


def test_sweep_b_first_is_transposed(tmp_path, capsys):
    out = tmp_path / "grid.csv"
    code, _, _ = _run(capsys, "sweep", "--grid", "B=1:1:1,A=0:0.5:0.5", "--out", str(out))
    assert code == 0
    frame = pd.read_csv(out)
    assert list(frame.columns) == ["B", "A", "value"]
    assert list(frame["A"]) == [0.0, 0.5]
    assert frame["value"].iloc[0] == 0 < frame["value"].iloc[1]


@pytest.mark.parametrize("grid", ["A=0:1:0.1,Z=0:1:0.1", "A=0:1", "headway=1:0:1,pi=0:0.01:0.01"])
def test_sweep_bad_grid_exits_1(tmp_path, capsys, grid):
    code, _, err = _run(capsys, "sweep", "--grid", grid, "--out", str(tmp_path / "g.csv"))
    assert code == 1
    assert _error_line(err).startswith("error: ")


def test_sweep_is_deterministic_across_workers(tmp_path, capsys):
    grid = "headway=3:6:1.5,pi=0.005:0.015:0.005"
    one, many = tmp_path / "one.csv", tmp_path / "many.csv"
    assert _run(capsys, "sweep", "--grid", grid, "--threads", "1", "--out", str(one))[0] == 0
    assert _run(capsys, "sweep", "--grid", grid, "--threads", "8", "--out", str(many))[0] == 0
    assert one.read_bytes() == many.read_bytes()
    assert len(pd.read_csv(one)) == 9


@pytest.mark.slow
def test_sweep_30_by_30_runtime(tmp_path, capsys):
    import time

    grid = "A=0.05:1.5:0.05,B=0.05:1.5:0.05"
    start = time.perf_counter()
    code, _, _ = _run(capsys, "sweep", "--grid", grid, "--threads", "0", "--out", str(tmp_path / "g.csv"))
    assert code == 0
    assert time.perf_counter() - start < 30
    assert len(pd.read_csv(tmp_path / "g.csv")) == 900


def test_headways(tmp_path, capsys):
    out = tmp_path / "alloc.csv"
    code, _, _ = _run(capsys, "headways", "--hab", "2:7:0.5", "--out", str(out))
    assert code == 0
    frame = pd.read_csv(out)
    assert len(frame) == 11
    assert list(frame.columns[:3]) == ["h_ab_min", "h_ba_min", "system_P"]
    assert frame["h_ab_min"].iloc[-1] == 7.0
    summary = json.loads((tmp_path / "alloc.json").read_text())
    assert 2.0 <= summary["argmin_h_ab_min"] <= 7.0


def test_headways_malformed_range(tmp_path, capsys):
    code, _, _ = _run(capsys, "headways", "--hab", "7:2:0.5", "--out", str(tmp_path / "a.csv"))
    assert code == 1


def test_cars(tmp_path, capsys):
    out = tmp_path / "cars.csv"
    code, _, _ = _run(capsys, "cars", "--out", str(out))
    assert code == 0
    frame = pd.read_csv(out)
    assert len(frame) == 12
    assert sorted(frame["scenario"].unique()) == [1, 2]


def test_cars_uniform_shares_give_equal_car_risk(tmp_path, capsys):
    out = tmp_path / "cars.csv"
    shares = ",".join(["0.125"] * 4 + ["0.25"] * 2)
    even = ",".join([str(1 / 6)] * 6)
    code, _, _ = _run(capsys, "cars", "--shares", f"{even};{shares}", "--out", str(out))
    assert code == 0
    block = pd.read_csv(out).query("scenario == 1")
    assert block["car_P"].max() == pytest.approx(block["car_P"].min(), rel=1e-9)


def test_cars_bad_shares_exit_1(tmp_path, capsys):
    code, _, err = _run(capsys, "cars", "--shares", "0.5,0.5,0.5,0.5,0.5,0.5", "--out", str(tmp_path / "c.csv"))
    assert code == 1
    assert _error_line(err).startswith("error: invalid_shares:")


def test_calibrate(capsys):
    code, out, _ = _run(capsys, "calibrate", "--attack-rate", "0", "--hours", "1")
    assert code == 0
    assert out.strip() == "0"
    code, out, _ = _run(capsys, "calibrate", "--attack-rate", "0.5", "--hours", "2",
                        "--ventilation", "1000", "--breathing", "0.5")
    assert float(out) == pytest.approx(1000 * 0.6931471805599453 / (0.5 * 2), rel=1e-5)


def test_calibrate_certain_infection_exits_1(capsys):
    code, _, err = _run(capsys, "calibrate", "--attack-rate", "1", "--hours", "1")
    assert code == 1
    assert _error_line(err).startswith("error: invalid_attack_rate:")


def test_usage_error_exits_1(capsys):
    code, _, err = _run(capsys, "calibrate", "--attack-rate", "lots", "--hours", "1")
    assert code == 1
    assert _error_line(err).startswith("error: usage:")


def test_compensate_prints_restoring_headway(capsys):
    code, out, _ = _run(capsys, "compensate", "--alpha", "2")
    assert code == 0
    fields = dict(item.split("=") for item in out.split())
    assert 0 < float(fields["B"]) < 1
    assert float(fields["trunk_headway_min"]) < 4.5


def test_compensate_unreachable_exits_2(capsys):
    code, _, err = _run(capsys, "compensate", "--a-new", "0.01")
    assert code == 2
    assert _error_line(err).startswith("error: target_unreachable:")


def test_tradeoff(tmp_path, capsys):
    out = tmp_path / "tradeoff.csv"
    code, _, _ = _run(capsys, "tradeoff", "--alphas", "1:3:0.5", "--out", str(out))
    assert code == 0
    frame = pd.read_csv(out)
    assert len(frame) == 5
    row = frame[frame["alpha"] == 2.0].iloc[0]
    assert row["F_m"] == pytest.approx(0.25)
    assert row["f_m"] == pytest.approx(1.0)


def _config_with(tmp_path, **changes):
    cfg = json.loads(fixture_path(REDLINE_SCENARIO).read_text())
    cfg.update(topology=str(fixture_path(cfg["topology"])), od=str(fixture_path(cfg["od"])), **changes)
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def test_headways_use_config_factors(tmp_path, capsys):
    config_path = _config_with(tmp_path, factors={"alpha": 3})
    code, _, _ = _run(capsys, "run", "--config", config_path, "--out", str(tmp_path / "r.json"))
    assert code == 0
    run_P = reports.read_report_json(tmp_path / "r.json")["system_P"]

    out = tmp_path / "alloc.csv"
    code, _, _ = _run(capsys, "headways", "--config", config_path, "--hab", "4.5:4.5:1", "--out", str(out))
    assert code == 0
    assert pd.read_csv(out)["system_P"].iloc[0] == pytest.approx(run_P, rel=1e-7)


def test_compensate_uses_config_factors(tmp_path, capsys):
    # the config already runs at α = 2, so nothing needs to change
    config_path = _config_with(tmp_path, factors={"alpha": 2})
    code, out, _ = _run(capsys, "compensate", "--config", config_path, "--alpha", "2")
    assert code == 0
    fields = dict(item.split("=") for item in out.split())
    assert float(fields["B"]) == pytest.approx(1.0, rel=1e-4)
    assert float(fields["trunk_headway_min"]) == pytest.approx(4.5, rel=1e-4)

    code, out, _ = _run(capsys, "compensate", "--config", config_path, "--a-new", "1.0")
    assert code == 0
    assert float(out.strip().split("=")[1]) == pytest.approx(1.0, rel=1e-4)


def test_cars_over_headways_and_rates(tmp_path, capsys):
    out = tmp_path / "cars.csv"
    code, _, _ = _run(capsys, "cars", "--headways", "4,9", "--pi", "0.0092,0.02", "--out", str(out))
    assert code == 0
    frame = pd.read_csv(out)
    assert len(frame) == 2 * 2 * 2 * 6
    assert list(frame.columns[:2]) == ["headway_min", "pi"]
    system = frame.groupby(["pi", "headway_min"])["system_P"].first()
    for pi in (0.0092, 0.02):
        assert system[(pi, 9)] > system[(pi, 4)]
    assert system[(0.02, 4)] > system[(0.0092, 4)]
