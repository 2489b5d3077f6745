"""
Demand & Service Plan
OD demand ingestion, the service plan (headways, cars, car shares) and
per-trip passenger loads for each train service and car.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, FrozenSet, IO, List, Optional, Sequence, Tuple, Union

import pandas as pd

from errors import (
    InvalidPlan, InvalidShares, MalformedRow, NegativeFactor, NegativeFlow,
    UnknownStation, UnreachablePair,
)
from topology import LineTopology, ODPair, path
import config

logger = logging.getLogger(__name__)

OD_COLUMNS = ["origin", "destination", "interval_start", "flow"]
SHARE_TOL = 1e-9


# ============================================================
# OD DEMAND
# ============================================================

@dataclass(frozen=True)
class ODDemand:
    """Period-average demand rate per OD pair, passengers/hour"""
    entries: Dict[ODPair, float]
    period: str = ""

    def rate(self, od: ODPair) -> float:
        return self.entries.get(od, 0.0)

    @property
    def total_rate(self) -> float:
        return sum(self.entries.values())

    def pairs(self, topo: LineTopology) -> List[ODPair]:
        """OD pairs in canonical topology order"""
        return sorted(self.entries, key=topo.pair_key)

    def section_totals(self, topo: LineTopology) -> Dict[str, float]:
        """Demand by destination section ('trunk' or branch label)"""
        out: Dict[str, float] = {"trunk": 0.0}
        out.update({label: 0.0 for label in topo.branches})
        for (o, d), rate in self.entries.items():
            out[topo.branch_of(d) or "trunk"] += rate
        return out

    @classmethod
    def from_rates(cls, topo: LineTopology, rates: Dict[ODPair, float],
                   period: str = "") -> "ODDemand":
        """Validated demand from in-memory rates (pax/hour)"""
        entries = {}
        for od, rate in rates.items():
            path(topo, *od)
            if rate < 0:
                raise NegativeFlow(f"{od[0]} -> {od[1]}: negative rate {rate}")
            entries[(od[0], od[1])] = float(rate)
        return cls(entries=entries, period=period)


def load_od(source: Union[str, Path, IO], topo: LineTopology,
            interval_minutes: float = config.OD_INTERVAL_MIN,
            period: str = "") -> ODDemand:
    """
    Load an OD CSV (origin,destination,interval_start,flow).

    Flows are passengers per interval. Every OD pair is averaged over all
    distinct slices in the file, so a pair missing from a slice counts as zero
    there, then converted to passengers/hour.

    Args:
        source: path or open text stream
        topo: line the stations must belong to
        interval_minutes: slice length declared by the scenario
        period: analysis window label kept on the result

    Raises:
        MalformedRow with the CSV line number, UnknownStation, UnreachablePair, NegativeFlow
    """
    name = getattr(source, "name", source)
    if not interval_minutes > 0:
        raise MalformedRow(f"{name}: interval length must be positive, got {interval_minutes}")

    try:
        frame = pd.read_csv(source, dtype=str, keep_default_na=False, skipinitialspace=True)
    except FileNotFoundError:
        raise MalformedRow(f"{name}: file not found") from None
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise MalformedRow(f"{name}: {e}") from None

    columns = [c.strip() for c in frame.columns]
    if columns[:len(OD_COLUMNS)] != OD_COLUMNS or len(columns) != len(OD_COLUMNS):
        raise MalformedRow(f"{name}: line 1: header must be {','.join(OD_COLUMNS)}, got {','.join(columns)}")
    frame.columns = columns

    flows = pd.to_numeric(frame["flow"], errors="coerce")
    slot_ok = frame["interval_start"].str.fullmatch(r"([01]?\d|2[0-3]):[0-5]\d")

    totals: Dict[ODPair, float] = {}
    seen = set()
    for idx, row in enumerate(frame.itertuples(index=False)):
        line = idx + 2  # header is line 1
        where = f"{name}: line {line}"
        if not row.origin or not row.destination:
            raise MalformedRow(f"{where}: missing station id")
        if not slot_ok.iat[idx]:
            raise MalformedRow(f"{where}: interval_start must be HH:MM, got '{row.interval_start}'")
        flow = flows.iat[idx]
        if pd.isna(flow) or not math.isfinite(flow):
            raise MalformedRow(f"{where}: flow must be a number, got '{row.flow}'")
        if flow < 0:
            raise NegativeFlow(f"{where}: negative flow {flow}")
        try:
            path(topo, row.origin, row.destination)
        except UnknownStation as e:
            raise UnknownStation(f"{where}: {e}") from None
        except UnreachablePair as e:
            raise UnreachablePair(f"{where}: {e}") from None

        key = (row.origin, row.destination, row.interval_start)
        if key in seen:
            raise MalformedRow(f"{where}: duplicate row for {row.origin} -> {row.destination} at {row.interval_start}")
        seen.add(key)
        od = (row.origin, row.destination)
        totals[od] = totals.get(od, 0.0) + float(flow)

    slices = frame["interval_start"].nunique()
    per_hour = 60.0 / interval_minutes
    entries = {od: total / slices * per_hour for od, total in totals.items()} if slices else {}

    demand = ODDemand(entries=entries, period=period)
    logger.info(
        f"📥 Loaded {len(entries)} OD pairs over {slices} slices from {name}: "
        f"{demand.total_rate:.1f} pax/h"
    )
    return demand


def scale_demand(od: ODDemand, gamma: float) -> ODDemand:
    """Multiply every rate by γ"""
    if gamma < 0:
        raise NegativeFactor(f"demand factor γ must be >= 0, got {gamma}")
    return replace(od, entries={pair: rate * gamma for pair, rate in od.entries.items()})


# ============================================================
# SERVICE PLAN
# ============================================================

@dataclass(frozen=True)
class ServicePlan:
    """
    Headways in hours. h_ab is the trunk headway of a first-branch train behind a
    second-branch train, h_ba the complement within one branch headway.
    """
    branch_headway: float
    h_ab: float
    cars_per_train: int = config.CARS_PER_TRAIN
    car_shares: Tuple[float, ...] = ()  # empty = even split
    period: str = ""

    def __post_init__(self):
        if not self.branch_headway > 0:
            raise InvalidPlan(f"branch headway must be positive, got {self.branch_headway}")
        if not 0 < self.h_ab < self.branch_headway:
            raise InvalidPlan(
                f"h_ab must lie strictly between 0 and the branch headway "
                f"({self.branch_headway * 60:g} min), got {self.h_ab * 60:g} min"
            )
        if isinstance(self.cars_per_train, bool) or not isinstance(self.cars_per_train, int) \
                or self.cars_per_train < 1:
            raise InvalidPlan(f"cars_per_train must be a positive integer, got {self.cars_per_train}")

        shares = tuple(float(s) for s in self.car_shares) if self.car_shares \
            else (1.0 / self.cars_per_train,) * self.cars_per_train
        object.__setattr__(self, "car_shares", validate_shares(shares, self.cars_per_train))

    @property
    def h_ba(self) -> float:
        return self.branch_headway - self.h_ab

    @classmethod
    def from_minutes(cls, branch_headway_min: float = config.BRANCH_HEADWAY_MIN,
                     h_ab_min: Optional[float] = None,
                     cars_per_train: int = config.CARS_PER_TRAIN,
                     car_shares: Sequence[float] = (),
                     period: str = config.ANALYSIS_PERIOD) -> "ServicePlan":
        if h_ab_min is None:
            h_ab_min = branch_headway_min / 2
        return cls(
            branch_headway=branch_headway_min / 60.0,
            h_ab=h_ab_min / 60.0,
            cars_per_train=cars_per_train,
            car_shares=tuple(car_shares),
            period=period,
        )

    def preceding_headway(self, service: str, services: Sequence[str]) -> float:
        """Trunk headway in front of a train of this service"""
        if len(services) == 2:
            return self.h_ab if service == services[0] else self.h_ba
        return self.branch_headway

    def trunk_headway(self, services: Sequence[str]) -> float:
        """Even trunk headway between consecutive trains of any service"""
        return self.branch_headway / len(services) if len(services) == 2 else self.branch_headway

    def scaled(self, beta: float) -> "ServicePlan":
        """All headways multiplied by β"""
        if not beta > 0:
            raise NegativeFactor(f"headway factor β must be positive, got {beta}")
        return replace(self, branch_headway=self.branch_headway * beta, h_ab=self.h_ab * beta)

    def with_h_ab(self, h_ab: float) -> "ServicePlan":
        return replace(self, h_ab=h_ab)

    def with_shares(self, shares: Sequence[float]) -> "ServicePlan":
        return replace(self, cars_per_train=len(shares), car_shares=tuple(shares))


def validate_shares(shares: Sequence[float], cars: int) -> Tuple[float, ...]:
    shares = tuple(float(s) for s in shares)
    if len(shares) != cars:
        raise InvalidShares(f"{len(shares)} car shares given for {cars} cars")
    if any(not math.isfinite(s) or s < 0 for s in shares):
        raise InvalidShares(f"car shares must be >= 0, got {list(shares)}")
    if abs(sum(shares) - 1.0) > SHARE_TOL:
        raise InvalidShares(f"car shares must sum to 1, got {sum(shares):.12g}")
    return shares


# ============================================================
# TRAIN LOADS
# ============================================================

@dataclass(frozen=True)
class TrainLoad:
    """Per-trip loads N_rs of one train service, per train and per car"""
    service: str
    headway: float  # trunk headway ahead of this train, hours
    loads: Dict[ODPair, float] = field(default_factory=dict)
    car_loads: Dict[Tuple[int, ODPair], float] = field(default_factory=dict)

    @property
    def cars(self) -> int:
        return 1 + max((car for car, _ in self.car_loads), default=-1)

    def car_vector(self, car: int) -> List[float]:
        return [self.car_loads[(car, od)] for od in self.loads]


def serving_services(topo: LineTopology, od: ODPair) -> FrozenSet[str]:
    """Train services a passenger of this OD pair can ride"""
    path(topo, *od)
    branch = topo.branch_of(od[1])
    if branch is not None:
        return frozenset({branch})
    return frozenset(topo.services)


def train_loads(od: ODDemand, plan: ServicePlan, topo: LineTopology) -> List[TrainLoad]:
    """
    Expected passengers per trip for every service.

    Branch-bound pairs ride only their branch's trains at rate × branch headway.
    Trunk-to-trunk pairs board the first train to arrive, so each service carries
    rate × the trunk headway in front of it.
    """
    services = topo.services
    ordered = od.pairs(topo)
    serving = {pair: serving_services(topo, pair) for pair in ordered}

    out = []
    for service in services:
        ahead = plan.preceding_headway(service, services)
        loads: Dict[ODPair, float] = {}
        for pair in ordered:
            if service not in serving[pair]:
                continue
            headway = ahead if len(serving[pair]) > 1 else plan.branch_headway
            loads[pair] = od.entries[pair] * headway

        car_loads = {
            (car, pair): n * share
            for car, share in enumerate(plan.car_shares)
            for pair, n in loads.items()
        }
        out.append(TrainLoad(service=service, headway=ahead, loads=loads, car_loads=car_loads))
        logger.debug(f"Service {service}: {len(loads)} OD pairs, {sum(loads.values()):.2f} pax/trip")
    return out
