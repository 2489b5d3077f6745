"""
Scenario Config
JSON scenario file -> base case. Missing keys take the base-case defaults from
config.py, relative file paths resolve against the scenario file's directory.
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import config
from demand_service import ServicePlan, load_od
from errors import ConfigError, RiskModelError
from infection_rates import InfectionRateField
from risk_core import RiskCase, ScalingFactors, VirusEnv
from topology import load_topology

logger = logging.getLogger(__name__)

VIRUS_KEYS = ("q", "p", "Q", "f_m", "R_m", "F_m")
FACTOR_KEYS = ("alpha", "beta", "gamma", "delta", "epsilon")
SERVICE_KEYS = ("branch_headway_min", "h_ab_min", "cars_per_train", "car_shares")


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything a run needs, as read from a scenario file"""
    topology_path: Path
    od_path: Path
    name: str = ""
    interval_minutes: float = config.OD_INTERVAL_MIN
    period: str = config.ANALYSIS_PERIOD
    virus: Dict[str, float] = field(default_factory=dict)
    infection_rate: Any = config.INFECTION_RATE
    factors: ScalingFactors = field(default_factory=ScalingFactors)
    branch_headway_min: float = config.BRANCH_HEADWAY_MIN
    h_ab_min: Optional[float] = None
    cars_per_train: int = config.CARS_PER_TRAIN
    car_shares: Tuple[float, ...] = ()
    susceptible_excludes_carriers: bool = False
    truncation: str = config.TRUNCATION
    per_1000: bool = False
    precision: int = config.CSV_SIGNIFICANT_DIGITS
    source: Optional[Path] = None

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ScenarioConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"{path}: file not found") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: line {e.lineno}: {e.msg}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(data, base_dir=path.parent, source=path)

    @classmethod
    def from_dict(cls, data: Dict, base_dir: Union[str, Path] = ".",
                  source: Optional[Path] = None) -> "ScenarioConfig":
        where = str(source) if source else "<scenario>"
        base_dir = Path(base_dir)

        def section(key: str, allowed: Tuple[str, ...]) -> Dict:
            value = data.get(key) or {}
            if not isinstance(value, dict):
                raise ConfigError(f"{where}: {key}: must be an object")
            unknown = sorted(set(value) - set(allowed))
            if unknown:
                raise ConfigError(f"{where}: {key}.{unknown[0]}: unknown field")
            return value

        def file_path(key: str) -> Path:
            raw = data.get(key)
            if not isinstance(raw, str) or not raw:
                raise ConfigError(f"{where}: {key}: path to the {key} file is required")
            resolved = Path(raw) if Path(raw).is_absolute() else base_dir / raw
            if not resolved.is_file():
                raise ConfigError(f"{where}: {key}: file not found: {resolved}")
            return resolved

        virus = section("virus", VIRUS_KEYS)
        factors = section("factors", FACTOR_KEYS)
        service = section("service", SERVICE_KEYS)
        output = section("output", ("per_1000", "precision"))

        try:
            scaling = ScalingFactors(**{k: float(v) for k, v in factors.items()})
        except (TypeError, ValueError) as e:
            raise ConfigError(f"{where}: factors: {e}") from None
        except RiskModelError as e:
            raise type(e)(f"{where}: factors: {e}") from None

        try:
            return cls(
                topology_path=file_path("topology"),
                od_path=file_path("od"),
                name=str(data.get("name", source.stem if source else "")),
                interval_minutes=float(data.get("interval_minutes", config.OD_INTERVAL_MIN)),
                period=str(data.get("period", config.ANALYSIS_PERIOD)),
                virus={k: float(v) for k, v in virus.items()},
                infection_rate=data.get("infection_rate", config.INFECTION_RATE),
                factors=scaling,
                branch_headway_min=float(service.get("branch_headway_min", config.BRANCH_HEADWAY_MIN)),
                h_ab_min=service.get("h_ab_min"),
                cars_per_train=service.get("cars_per_train", config.CARS_PER_TRAIN),
                car_shares=tuple(float(s) for s in service.get("car_shares", ())),
                susceptible_excludes_carriers=bool(data.get("susceptible_excludes_carriers", False)),
                truncation=str(data.get("truncation", config.TRUNCATION)),
                per_1000=bool(output.get("per_1000", False)),
                precision=int(output.get("precision", config.CSV_SIGNIFICANT_DIGITS)),
                source=source,
            )
        except (TypeError, ValueError) as e:
            raise ConfigError(f"{where}: {e}") from None

    # ============================================================
    # BUILDERS
    # ============================================================

    def rate_field(self) -> InfectionRateField:
        raw = self.infection_rate
        if isinstance(raw, bool):
            raise ConfigError(f"{self._where}: infection_rate: must be a number or an object")
        if isinstance(raw, (int, float)):
            return InfectionRateField.uniform_rate(raw)
        if isinstance(raw, dict):
            unknown = sorted(set(raw) - {"uniform", "groups", "default", "mode"})
            if unknown:
                raise ConfigError(f"{self._where}: infection_rate.{unknown[0]}: unknown field")
            return InfectionRateField(
                uniform=raw.get("uniform"),
                groups={str(k): float(v) for k, v in (raw.get("groups") or {}).items()},
                default=raw.get("default"),
                mode=raw.get("mode", "branch"),
            )
        raise ConfigError(f"{self._where}: infection_rate: must be a number or an object")

    @property
    def _where(self) -> str:
        return str(self.source) if self.source else "<scenario>"

    def build_case(self) -> RiskCase:
        """Load the files and assemble the base case"""
        topo = load_topology(self.topology_path)
        demand = load_od(self.od_path, topo, interval_minutes=self.interval_minutes, period=self.period)
        try:
            plan = ServicePlan.from_minutes(
                branch_headway_min=self.branch_headway_min,
                h_ab_min=self.h_ab_min,
                cars_per_train=self.cars_per_train,
                car_shares=self.car_shares,
                period=self.period,
            )
            env = VirusEnv(pi=self.rate_field(), **{k: float(v) for k, v in self.virus.items()})
        except RiskModelError as e:
            raise type(e)(f"{self._where}: {e}") from None
        case = RiskCase(
            topology=topo,
            demand=demand,
            plan=plan,
            env=env,
            susceptible_excludes_carriers=self.susceptible_excludes_carriers,
            truncation=self.truncation,
            name=self.name,
        )
        logger.info(f"📋 Scenario '{self.name}' ready: {len(demand.entries)} OD pairs, "
                    f"{plan.cars_per_train} cars, headway {self.branch_headway_min:g} min per branch")
        return case
