"""
Infection Rate Field
Carrier rate π per OD pair: one rate for the whole line, or rates by
station group looked up from the origin, the destination or branch membership.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Literal, Optional, Sequence

import numpy as np

from errors import InvalidParam, UnknownGroup
from topology import LineTopology, ODPair

logger = logging.getLogger(__name__)

RateMode = Literal["origin", "destination", "branch"]
RATE_MODES = ("origin", "destination", "branch")


@dataclass(frozen=True)
class InfectionRateField:
    """
    Either `uniform` is set, or `groups` maps station groups to rates.

    Modes:
        origin: group of the boarding station
        destination: group of the alighting station
        branch: group of the branch the ride ends on, else the origin's (trunk) group
    """
    uniform: Optional[float] = None
    groups: Dict[str, float] = field(default_factory=dict)
    default: Optional[float] = None  # rate for groups missing from the map
    mode: RateMode = "branch"

    def __post_init__(self):
        if self.mode not in RATE_MODES:
            raise InvalidParam(f"infection rate mode must be one of {RATE_MODES}, got '{self.mode}'")
        if self.uniform is None and not self.groups and self.default is None:
            raise InvalidParam("infection rate needs a uniform value or a group map")
        for label, value in [("uniform", self.uniform), ("default", self.default)] + list(self.groups.items()):
            if value is not None and not 0.0 <= value <= 1.0:
                raise InvalidParam(f"infection rate '{label}' must lie in [0, 1], got {value}")

    @classmethod
    def uniform_rate(cls, rate: float) -> "InfectionRateField":
        return cls(uniform=float(rate))

    @classmethod
    def spatial(cls, groups: Dict[str, float], default: Optional[float] = None,
                mode: RateMode = "branch") -> "InfectionRateField":
        return cls(groups={k: float(v) for k, v in groups.items()}, default=default, mode=mode)

    @property
    def is_uniform(self) -> bool:
        return self.uniform is not None

    def group_for(self, topo: LineTopology, od: ODPair) -> str:
        origin, destination = topo.station(od[0]), topo.station(od[1])
        if self.mode == "origin":
            return origin.group
        if self.mode == "destination":
            return destination.group
        if topo.branch_of(destination.id) is not None:
            return destination.group
        return origin.group

    def rate_for(self, topo: LineTopology, od: ODPair) -> float:
        if self.uniform is not None:
            return self.uniform
        group = self.group_for(topo, od)
        if group in self.groups:
            return self.groups[group]
        if self.default is not None:
            return self.default
        raise UnknownGroup(f"no infection rate for station group '{group}' ({od[0]} -> {od[1]})")

    def rates(self, topo: LineTopology, pairs: Sequence[ODPair]) -> np.ndarray:
        return np.array([self.rate_for(topo, od) for od in pairs], dtype=float)

    def to_dict(self) -> dict:
        if self.uniform is not None:
            return {"uniform": self.uniform}
        out = {"groups": dict(self.groups), "mode": self.mode}
        if self.default is not None:
            out["default"] = self.default
        return out


def equivalent_uniform_rate(rates: InfectionRateField, demand, topo: LineTopology) -> float:
    """
    Demand-weighted mean rate: the uniform π with the same expected number of
    carriers as the spatial field.
    """
    pairs = demand.pairs(topo)
    weights = np.array([demand.entries[od] for od in pairs], dtype=float)
    total = weights.sum()
    if total <= 0:
        return 0.0
    value = float(np.dot(weights, rates.rates(topo, pairs)) / total)
    logger.debug(f"Equivalent uniform infection rate: {value:.6f}")
    return value
