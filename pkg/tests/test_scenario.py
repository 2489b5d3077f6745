import json

import pytest

from errors import ConfigError, InvalidPlan, NegativeFactor, UnknownGroup, ZeroVentilation
from fixtures import REDLINE_SCENARIO, fixture_path, load_redline_case
from scenario import ScenarioConfig
from risk_core import evaluate


def _write(tmp_path, data, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def _base(**extra):
    data = {
        "topology": str(fixture_path("redline_topology.json")),
        "od": str(fixture_path("redline_od.csv")),
    }
    data.update(extra)
    return data


def test_fixture_scenario_loads():
    cfg = ScenarioConfig.load(fixture_path(REDLINE_SCENARIO))
    assert cfg.name == "redline-pm-peak"
    assert cfg.branch_headway_min == 9
    assert cfg.virus["q"] == 270
    case = cfg.build_case()
    assert case.plan.cars_per_train == 6
    assert case.env.pi.uniform == pytest.approx(0.0092)


def test_missing_sections_take_defaults(tmp_path):
    case = ScenarioConfig.load(_write(tmp_path, _base())).build_case()
    reference = load_redline_case()
    assert case.plan == reference.plan
    assert case.env == reference.env
    assert evaluate(case).system_P == evaluate(reference).system_P


def test_spatial_rates_from_config(redline_spatial_case):
    pi = redline_spatial_case.env.pi
    assert not pi.is_uniform
    assert pi.groups == {"trunk": 0.008, "braintree": 0.005, "ashmont": 0.015}


def test_relative_paths_resolve_against_config(tmp_path):
    (tmp_path / "topo.json").write_text(fixture_path("redline_topology.json").read_text())
    (tmp_path / "od.csv").write_text(fixture_path("redline_od.csv").read_text())
    cfg = ScenarioConfig.load(_write(tmp_path, {"topology": "topo.json", "od": "od.csv"}))
    assert cfg.topology_path == tmp_path / "topo.json"


def test_missing_file_names_path(tmp_path):
    path = _write(tmp_path, _base(topology="nowhere.json"))
    with pytest.raises(ConfigError, match="nowhere.json"):
        ScenarioConfig.load(path)
    with pytest.raises(ConfigError, match="file not found"):
        ScenarioConfig.load(tmp_path / "absent.json")


def test_bad_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="line 1"):
        ScenarioConfig.load(path)


def test_unknown_field_is_named(tmp_path):
    with pytest.raises(ConfigError, match="virus.qq"):
        ScenarioConfig.load(_write(tmp_path, _base(virus={"qq": 1})))


@pytest.mark.parametrize("extra,error", [
    ({"factors": {"beta": -1}}, NegativeFactor),
    ({"factors": {"epsilon": 0}}, ZeroVentilation),
    ({"factors": {"alpha": "x"}}, ConfigError),
    ({"virus": {"Q": 0}}, ZeroVentilation),
    ({"service": {"h_ab_min": 12}}, InvalidPlan),
    ({"infection_rate": {"groups": {"trunk": 0.01}}}, UnknownGroup),
    ({"infection_rate": True}, ConfigError),
])
def test_invalid_values(tmp_path, extra, error):
    with pytest.raises(error):
        ScenarioConfig.load(_write(tmp_path, _base(**extra))).build_case().layouts
