"""
Line Topology
Trunk + branch rail line in the analysis direction.
Computes ride paths, shared ride segments of two OD pairs and their exposure time.
"""
import json
import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from errors import InvalidTopology, UnknownStation, UnreachablePair

logger = logging.getLogger(__name__)

ODPair = Tuple[str, str]

SINGLE_SERVICE = "single"
MAX_BRANCHES = 2


@dataclass(frozen=True)
class Station:
    """A stop on the line"""
    id: str
    name: str
    group: str  # infection-rate group, e.g. "trunk", "ashmont"


@dataclass(frozen=True)
class RideSegment:
    """Ordered stations from boarding to alighting, both inclusive"""
    boarding: str
    alighting: str
    stations: Tuple[str, ...]

    def __len__(self) -> int:
        return len(self.stations)


@dataclass(frozen=True)
class LineTopology:
    """
    Trunk stations in the analysis direction plus up to two branches that all
    attach at the last trunk station. Segment times are door-close to door-close
    hours between adjacent stations, so intermediate dwells are included.
    """
    trunk: Tuple[Station, ...]
    branches: Dict[str, Tuple[Station, ...]] = field(default_factory=dict)
    segment_times: Dict[ODPair, float] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        self._validate()

    def _validate(self):
        if not self.trunk:
            raise InvalidTopology("trunk: at least one station is required")
        if not self.branches and len(self.trunk) < 2:
            raise InvalidTopology("trunk: an unbranched line needs two stations")
        if len(self.branches) > MAX_BRANCHES:
            raise InvalidTopology(
                f"branches: at most {MAX_BRANCHES} branches are supported, got {len(self.branches)}"
            )

        seen = set()
        for where, stations in [("trunk", self.trunk)] + [
            (f"branches.{label}", line) for label, line in self.branches.items()
        ]:
            if where != "trunk" and not stations:
                raise InvalidTopology(f"{where}: branch has no stations")
            for k, station in enumerate(stations):
                if station.id in seen:
                    raise InvalidTopology(f"{where}[{k}]: duplicate station id '{station.id}'")
                seen.add(station.id)

        required = set()
        for line in self.lines.values():
            for a, b in zip(line, line[1:]):
                required.add((a, b))
                t = self.segment_times.get((a, b))
                if t is None:
                    raise InvalidTopology(f"segment_times: missing {a} -> {b}")
                if not t > 0:
                    raise InvalidTopology(f"segment_times: {a} -> {b} must be positive, got {t}")

        extra = [pair for pair in self.segment_times if pair not in required]
        if extra:
            a, b = extra[0]
            raise InvalidTopology(f"segment_times: {a} -> {b} is not an adjacent pair on the line")

    # ============================================================
    # STRUCTURE
    # ============================================================

    @property
    def is_branched(self) -> bool:
        return bool(self.branches)

    @property
    def services(self) -> Tuple[str, ...]:
        """Train service labels: branch names in declared order, or 'single'"""
        if not self.branches:
            return (SINGLE_SERVICE,)
        return tuple(self.branches)

    @cached_property
    def lines(self) -> Dict[str, Tuple[str, ...]]:
        """Station ids each service calls at, in order"""
        trunk_ids = tuple(s.id for s in self.trunk)
        if not self.branches:
            return {SINGLE_SERVICE: trunk_ids}
        return {
            label: trunk_ids + tuple(s.id for s in stations)
            for label, stations in self.branches.items()
        }

    @cached_property
    def stations(self) -> Dict[str, Station]:
        out = {s.id: s for s in self.trunk}
        for line in self.branches.values():
            out.update({s.id: s for s in line})
        return out

    @cached_property
    def _order(self) -> Dict[str, int]:
        ids = [s.id for s in self.trunk]
        for line in self.branches.values():
            ids.extend(s.id for s in line)
        return {sid: k for k, sid in enumerate(ids)}

    @cached_property
    def _branch_index(self) -> Dict[str, Tuple[str, int]]:
        return {
            s.id: (label, k)
            for label, line in self.branches.items()
            for k, s in enumerate(line)
        }

    @cached_property
    def _trunk_index(self) -> Dict[str, int]:
        return {s.id: k for k, s in enumerate(self.trunk)}

    def station(self, station_id: str) -> Station:
        try:
            return self.stations[station_id]
        except KeyError:
            raise UnknownStation(f"unknown station '{station_id}'") from None

    def branch_of(self, station_id: str) -> Optional[str]:
        """Branch label of a station, None for trunk stations"""
        self.station(station_id)
        entry = self._branch_index.get(station_id)
        return entry[0] if entry else None

    def pair_key(self, od: ODPair) -> Tuple[int, int]:
        """Canonical sort key: topology order of origin, then destination"""
        return self._order[od[0]], self._order[od[1]]

    def service_line(self, service: str) -> Tuple[str, ...]:
        try:
            return self.lines[service]
        except KeyError:
            raise UnreachablePair(f"unknown service '{service}'") from None

    def arrival_times(self, service: str) -> Dict[str, float]:
        """Cumulative hours from the head of the trunk along one service"""
        line = self.service_line(service)
        clock = 0.0
        out = {line[0]: 0.0}
        for a, b in zip(line, line[1:]):
            clock += self.segment_times[(a, b)]
            out[b] = clock
        return out

    # ============================================================
    # LOADING
    # ============================================================

    @classmethod
    def from_dict(cls, data: dict) -> "LineTopology":
        """Build from the topology file layout (already parsed JSON)"""
        if not isinstance(data, dict):
            raise InvalidTopology("top level must be an object")

        trunk = _parse_stations(data.get("trunk"), "trunk")
        raw_branches = data.get("branches") or {}
        if not isinstance(raw_branches, dict):
            raise InvalidTopology("branches: must be an object of station lists")
        branches = {
            str(label): _parse_stations(stations, f"branches.{label}")
            for label, stations in raw_branches.items()
        }

        times: Dict[ODPair, float] = {}
        raw_times = data.get("segment_times")
        if not isinstance(raw_times, list):
            raise InvalidTopology("segment_times: must be a list")
        for k, seg in enumerate(raw_times):
            where = f"segment_times[{k}]"
            if not isinstance(seg, dict) or "from" not in seg or "to" not in seg:
                raise InvalidTopology(f"{where}: needs 'from' and 'to'")
            if "hours" in seg:
                value = seg["hours"]
                scale = 1.0
            elif "minutes" in seg:
                value = seg["minutes"]
                scale = 1.0 / 60.0
            else:
                raise InvalidTopology(f"{where}: needs 'hours' or 'minutes'")
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise InvalidTopology(f"{where}: time must be a number")
            pair = (str(seg["from"]), str(seg["to"]))
            if pair in times:
                raise InvalidTopology(f"{where}: duplicate segment {pair[0]} -> {pair[1]}")
            times[pair] = float(value) * scale

        return cls(trunk=trunk, branches=branches, segment_times=times,
                   name=str(data.get("name", "")))


def _parse_stations(raw, where: str) -> Tuple[Station, ...]:
    if not isinstance(raw, list):
        raise InvalidTopology(f"{where}: must be a list of stations")
    out = []
    for k, item in enumerate(raw):
        if not isinstance(item, dict) or not item.get("id"):
            raise InvalidTopology(f"{where}[{k}]: station needs an 'id'")
        if "group" not in item:
            raise InvalidTopology(f"{where}[{k}]: station '{item['id']}' needs a 'group'")
        out.append(Station(
            id=str(item["id"]),
            name=str(item.get("name", item["id"])),
            group=str(item["group"]),
        ))
    return tuple(out)


def load_topology(path: Union[str, Path]) -> LineTopology:
    """
    Load and validate a topology JSON file.

    Raises:
        InvalidTopology naming the file and the first violated field
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InvalidTopology(f"{path}: file not found") from None
    except json.JSONDecodeError as e:
        raise InvalidTopology(f"{path}: line {e.lineno}: {e.msg}") from None

    try:
        topo = LineTopology.from_dict(data)
    except InvalidTopology as e:
        logger.warning(f"Rejected topology {path}: {e}")
        raise InvalidTopology(f"{path}: {e}") from None

    logger.info(
        f"🚇 Loaded topology '{topo.name or path.stem}': {len(topo.trunk)} trunk stations, "
        f"branches {[f'{k}({len(v)})' for k, v in topo.branches.items()]}"
    )
    return topo


# ============================================================
# RIDE GEOMETRY
# ============================================================

def path(topo: LineTopology, i: str, j: str) -> RideSegment:
    """
    Stations ridden from i to j along the unique directed path.

    Valid rides are trunk -> trunk, trunk -> branch, or within one branch.
    """
    topo.station(i)
    topo.station(j)

    ti, tj = topo._trunk_index.get(i), topo._trunk_index.get(j)
    bi, bj = topo._branch_index.get(i), topo._branch_index.get(j)
    trunk_ids = [s.id for s in topo.trunk]

    if ti is not None and tj is not None and ti < tj:
        stations = trunk_ids[ti:tj + 1]
    elif ti is not None and bj is not None:
        label, k = bj
        stations = trunk_ids[ti:] + [s.id for s in topo.branches[label][:k + 1]]
    elif bi is not None and bj is not None and bi[0] == bj[0] and bi[1] < bj[1]:
        line = topo.branches[bi[0]]
        stations = [s.id for s in line[bi[1]:bj[1] + 1]]
    else:
        raise UnreachablePair(f"no ride from '{i}' to '{j}' in the analysis direction")

    return RideSegment(boarding=i, alighting=j, stations=tuple(stations))


def overlap(topo: LineTopology, od1: ODPair, od2: ODPair) -> Optional[RideSegment]:
    """
    Shared part of two rides: from the later boarding to the earlier alighting.
    None when they share no segment.
    """
    first = path(topo, *od1)
    second = set(path(topo, *od2).stations)
    common = [s for s in first.stations if s in second]
    if len(common) < 2:
        return None
    return RideSegment(boarding=common[0], alighting=common[-1], stations=tuple(common))


def exposure_time(topo: LineTopology, od1: ODPair, od2: ODPair) -> float:
    """Hours two OD pairs spend on board together (0 when no overlap)"""
    shared = overlap(topo, od1, od2)
    if shared is None:
        return 0.0
    return sum(topo.segment_times[(a, b)] for a, b in zip(shared.stations, shared.stations[1:]))


def valid_pairs(topo: LineTopology) -> List[ODPair]:
    """Every reachable OD pair in canonical order"""
    ids = sorted(topo.stations, key=topo._order.get)
    out = []
    for i in ids:
        for j in ids:
            if i == j:
                continue
            try:
                path(topo, i, j)
            except UnreachablePair:
                continue
            out.append((i, j))
    return out
