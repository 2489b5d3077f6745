"""Shared cases: the frozen redline fixture and small hand-checkable lines"""
import pytest

from demand_service import ODDemand, ServicePlan
from fixtures import REDLINE_SPATIAL_SCENARIO, load_redline_case
from risk_core import RiskCase, VirusEnv
from topology import LineTopology


def make_line(trunk, branches=None, times=None, groups=None, name="toy"):
    """Topology from plain ids; `times` maps (a, b) to hours"""
    groups = groups or {}
    branches = branches or {}
    return LineTopology.from_dict({
        "name": name,
        "trunk": [{"id": s, "group": groups.get(s, "trunk")} for s in trunk],
        "branches": {
            label: [{"id": s, "group": groups.get(s, label.lower())} for s in stations]
            for label, stations in branches.items()
        },
        "segment_times": [{"from": a, "to": b, "hours": t} for (a, b), t in (times or {}).items()],
    })


def three_station_line():
    return make_line(["s1", "s2", "s3"], times={("s1", "s2"): 0.1, ("s2", "s3"): 0.1})


def branch_line(a_time=0.15, b_time=0.05):
    """Trunk t0-t1-t2, branch A to a1 and branch B to b1"""
    return make_line(
        ["t0", "t1", "t2"],
        branches={"A": ["a1"], "B": ["b1"]},
        times={("t0", "t1"): 0.05, ("t1", "t2"): 0.05, ("t2", "a1"): a_time, ("t2", "b1"): b_time},
        groups={"a1": "ashmont", "b1": "braintree"},
    )


def make_case(topo, rates, branch_headway_min=9.0, h_ab_min=None, cars=1, shares=(), **env):
    return RiskCase(
        topology=topo,
        demand=ODDemand.from_rates(topo, rates),
        plan=ServicePlan.from_minutes(branch_headway_min, h_ab_min, cars_per_train=cars, car_shares=shares),
        env=VirusEnv(**env),
        name="toy",
    )


@pytest.fixture
def line3():
    return three_station_line()


@pytest.fixture
def line3_case(line3):
    return make_case(line3, {("s1", "s3"): 60.0, ("s1", "s2"): 30.0, ("s2", "s3"): 30.0},
                     branch_headway_min=6.0)


@pytest.fixture
def branch_toy():
    return branch_line()


@pytest.fixture
def branch_case(branch_toy):
    """Braintree-heavy demand: the B branch carries more riders"""
    return make_case(branch_toy, {("t0", "t2"): 100.0, ("t0", "a1"): 70.0, ("t0", "b1"): 90.0})


@pytest.fixture
def symmetric_case():
    topo = branch_line(a_time=0.1, b_time=0.1)
    return make_case(topo, {("t0", "t2"): 100.0, ("t0", "a1"): 80.0, ("t0", "b1"): 80.0})


@pytest.fixture(scope="session")
def redline_case():
    return load_redline_case()


@pytest.fixture(scope="session")
def redline_spatial_case():
    return load_redline_case(REDLINE_SPATIAL_SCENARIO)
