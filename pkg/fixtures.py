"""
Fixtures
The frozen redline-like line shipped under data/: 13 trunk stations, an
Ashmont-like branch "A" and a longer, busier Braintree-like branch "B".
"""
import logging
from functools import lru_cache
from pathlib import Path

import config
from infection_rates import InfectionRateField
from risk_core import RiskCase
from scenario import ScenarioConfig

logger = logging.getLogger(__name__)

REDLINE_SCENARIO = "redline_scenario.json"
REDLINE_SPATIAL_SCENARIO = "redline_spatial.json"
REDLINE_REFERENCE = "redline_reference.json"  # frozen outputs, 5 significant digits


def fixture_path(name: str) -> Path:
    return Path(config.DATA_DIR) / name


@lru_cache(maxsize=4)
def load_redline_case(name: str = REDLINE_SCENARIO) -> RiskCase:
    """Base case of a fixture scenario (cached, cases are immutable)"""
    return ScenarioConfig.load(fixture_path(name)).build_case()


def redline_spatial_rates() -> InfectionRateField:
    """Trunk / Braintree / Ashmont carrier rates of the spatial scenario"""
    return InfectionRateField.spatial(config.SPATIAL_SCENARIO_RATES, mode="branch")
