"""
Scenario Lab
Studies built on the risk core: A×B iso-risk grids, compensation solvers,
headway and infection-rate sweeps, branch headway allocation, car-load
distributions, spatial infection rates and quanta calibration.
"""
import hashlib
import logging
import math
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

import config
from demand_service import scale_demand, validate_shares
from errors import (
    DegenerateMask, EmptyRange, InvalidAttackRate, InvalidGridSpec, InvalidParam,
    InvalidPlan, InvalidShares, NoFeasibleMask, NoFeasibleProportion, TargetUnreachable,
)
from grid_runner import get_grid_runner
from infection_rates import InfectionRateField, equivalent_uniform_rate
from risk_core import (
    RiskCase, RiskReport, ScalingFactors, VirusEnv, evaluate, meta_A, risk_with_meta,
    wells_riley,
)

logger = logging.getLogger(__name__)

META_AXES = ("A", "B")
LEVEL_AXES = ("headway", "pi", "fm", "alpha")
AXIS_NAMES = META_AXES + LEVEL_AXES


# ============================================================
# GRIDS
# ============================================================

@dataclass(frozen=True)
class Axis:
    """Inclusive range start..stop in steps; headway in minutes"""
    name: str
    start: float
    stop: float
    step: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.start, self.stop, self.step)):
            raise EmptyRange(f"axis {self.name}: bounds must be finite")
        if not self.step > 0:
            raise EmptyRange(f"axis {self.name}: step must be positive, got {self.step:g}")
        if self.stop < self.start:
            raise EmptyRange(f"axis {self.name}: stop {self.stop:g} is below start {self.start:g}")

    @property
    def values(self) -> Tuple[float, ...]:
        count = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return tuple(round(self.start + k * self.step, 12) for k in range(count))

    def __len__(self) -> int:
        return len(self.values)

    @classmethod
    def parse(cls, name: str, text: str) -> "Axis":
        """'lo:hi:step' -> Axis"""
        parts = text.split(":")
        if len(parts) != 3:
            raise InvalidGridSpec(f"axis {name}: expected lo:hi:step, got '{text}'")
        try:
            lo, hi, step = (float(p) for p in parts)
        except ValueError:
            raise InvalidGridSpec(f"axis {name}: expected numbers in lo:hi:step, got '{text}'") from None
        return cls(name=name, start=lo, stop=hi, step=step)

    def to_dict(self) -> dict:
        return {"name": self.name, "start": self.start, "stop": self.stop, "step": self.step}


def parse_grid(text: str) -> Tuple[Axis, Axis]:
    """'A=lo:hi:step,B=lo:hi:step' -> two axes"""
    items = [item.strip() for item in text.split(",") if item.strip()]
    if len(items) != 2:
        raise InvalidGridSpec(f"grid needs exactly two axes, got '{text}'")
    axes = []
    for item in items:
        name, sep, bounds = item.partition("=")
        name = name.strip()
        if not sep:
            raise InvalidGridSpec(f"axis '{item}' must look like name=lo:hi:step")
        if name not in AXIS_NAMES:
            raise InvalidGridSpec(f"unknown axis '{name}', expected one of {', '.join(AXIS_NAMES)}")
        axes.append(Axis.parse(name, bounds.strip()))
    names = {a.name for a in axes}
    if len(names) != 2:
        raise InvalidGridSpec(f"grid axes must differ, got '{text}'")
    if names & set(META_AXES) and names != set(META_AXES):
        raise InvalidGridSpec("A and B can only be swept together")
    return axes[0], axes[1]


@dataclass
class SweepGrid:
    """cells[i, j] = system_P at axis1.values[i], axis2.values[j]"""
    axis1: Axis
    axis2: Axis
    cells: np.ndarray
    metadata: Dict = field(default_factory=dict)

    def __post_init__(self):
        if self.cells.shape != (len(self.axis1), len(self.axis2)):
            raise InvalidParam(
                f"grid shape {self.cells.shape} does not match axes ({len(self.axis1)}, {len(self.axis2)})"
            )

    def rows(self) -> Iterator[Tuple[float, float, float]]:
        """Row-major (axis1, axis2, value)"""
        for i, v1 in enumerate(self.axis1.values):
            for j, v2 in enumerate(self.axis2.values):
                yield v1, v2, float(self.cells[i, j])


def case_fingerprint(case: RiskCase) -> str:
    """Short stable hash of everything the case's risk depends on"""
    parts = [
        case.topology.name,
        repr(sorted(case.topology.segment_times.items())),
        repr(sorted(case.demand.entries.items())),
        repr(case.plan),
        repr(case.env),
        repr((case.susceptible_excludes_carriers, case.truncation)),
    ]
    return hashlib.sha256("|".join(parts).encode("utf-8")).hexdigest()[:16]


def _grid_metadata(case: RiskCase, **extra) -> Dict:
    meta = {"scenario": case.name, "fixture": case.topology.name, "scenario_hash": case_fingerprint(case)}
    meta.update(extra)
    return meta


def _meta_cell(case: RiskCase, cell: Tuple[float, float]) -> Tuple[float, float, float]:
    report = risk_with_meta(case, cell[0], cell[1])
    return report.system_P_unmasked, report.system_P_masked, report.system_P


def _evaluate_cell(cell: Tuple[RiskCase, ScalingFactors]) -> float:
    case, factors = cell
    return evaluate(case, factors).system_P


def sweep_AB(case: RiskCase, a_axis: Axis, b_axis: Axis,
             workers: Optional[int] = None) -> Dict[str, SweepGrid]:
    """
    System-wide probability over meta-parameters A (rows) and B (columns).

    Returns:
        {"unmasked", "masked", "system"} grids: all susceptibles unmasked, all
        masked, and the f_m blend of the case
    """
    cells = [(a, b) for a in a_axis.values for b in b_axis.values]
    logger.info(f"🧮 A×B sweep: {len(a_axis)}×{len(b_axis)} cells")
    values = get_grid_runner(workers).map(partial(_meta_cell, case), cells)
    shape = (len(a_axis), len(b_axis))
    return {
        "unmasked": SweepGrid(a_axis, b_axis, np.array([v[0] for v in values]).reshape(shape),
                              _grid_metadata(case, susceptibles="unmasked")),
        "masked": SweepGrid(a_axis, b_axis, np.array([v[1] for v in values]).reshape(shape),
                            _grid_metadata(case, susceptibles="masked")),
        "system": SweepGrid(a_axis, b_axis, np.array([v[2] for v in values]).reshape(shape),
                            _grid_metadata(case, susceptibles="system", f_m=case.env.f_m)),
    }


def _cell_setting(case: RiskCase, base: ScalingFactors, trunk_headway_min: float,
                  assignment: Dict[str, float]) -> Tuple[RiskCase, ScalingFactors]:
    factors = dict(alpha=base.alpha, beta=base.beta, gamma=base.gamma,
                   delta=base.delta, epsilon=base.epsilon)
    env = case.env
    for name, value in assignment.items():
        if name == "headway":
            if not value > 0:
                raise EmptyRange(f"headway must be positive, got {value:g} min")
            factors["beta"] = value / trunk_headway_min
        elif name == "pi":
            env = env.with_rate(value)
        elif name == "fm":
            env = env.with_masks(f_m=value)
        elif name == "alpha":
            factors["alpha"] = value
        else:
            raise InvalidGridSpec(f"axis '{name}' cannot be combined with {LEVEL_AXES}")
    if env is not case.env:
        case = case.with_env(env)
    return case, ScalingFactors(**factors)


def sweep_parameters(case: RiskCase, axis1: Axis, axis2: Axis,
                     factors: ScalingFactors = ScalingFactors(),
                     workers: Optional[int] = None) -> SweepGrid:
    """
    System-wide probability over two of headway (trunk, minutes), pi, fm, alpha.
    Headway enters as β = headway / base trunk headway and replaces the base β;
    the other base factors (e.g. γ for off-peak demand) apply to every cell.
    """
    for axis in (axis1, axis2):
        if axis.name not in LEVEL_AXES:
            raise InvalidGridSpec(f"axis '{axis.name}' is not one of {LEVEL_AXES}")
    trunk_min = case.plan.trunk_headway(case.topology.services) * 60.0

    # one case per distinct env so cached loads and layouts are shared across cells
    variants: Dict[Tuple, RiskCase] = {}
    cells = []
    for v1 in axis1.values:
        for v2 in axis2.values:
            cell_case, cell_factors = _cell_setting(case, factors, trunk_min, {axis1.name: v1, axis2.name: v2})
            key = (cell_case.env.f_m, repr(cell_case.env.pi))
            cells.append((variants.setdefault(key, cell_case), cell_factors))

    logger.info(f"🧮 {axis1.name}×{axis2.name} sweep: {len(axis1)}×{len(axis2)} cells")
    values = get_grid_runner(workers).map(_evaluate_cell, cells)
    return SweepGrid(axis1, axis2, np.array(values, dtype=float).reshape(len(axis1), len(axis2)),
                     _grid_metadata(case, gamma=factors.gamma, base_trunk_headway_min=trunk_min))


def sweep_headway(case: RiskCase, headways: Axis, levels: Axis, gamma: float = 1.0,
                  workers: Optional[int] = None) -> SweepGrid:
    """Headway (rows) × one of pi / fm / alpha (columns)"""
    if headways.name != "headway":
        raise InvalidGridSpec(f"first axis must be 'headway', got '{headways.name}'")
    if levels.name not in ("pi", "fm", "alpha"):
        raise InvalidGridSpec(f"level axis must be pi, fm or alpha, got '{levels.name}'")
    return sweep_parameters(case, headways, levels, ScalingFactors(gamma=gamma), workers=workers)


def off_peak(case: RiskCase, factor: float = config.OFF_PEAK_DEMAND_FACTOR) -> RiskCase:
    """Same case with demand scaled to the off-peak level"""
    return case.with_demand(scale_demand(case.demand, factor))


# ============================================================
# SOLVERS
# ============================================================

def bisect_increasing(fn, target: float, lo: float, hi: float,
                      rel_tol: float = config.BISECTION_REL_TOL,
                      max_iter: int = config.BISECTION_MAX_ITER) -> float:
    """
    x in [lo, hi] with fn(x) = target for nondecreasing fn, within rel_tol of target.

    Raises:
        TargetUnreachable when target is outside [fn(lo), fn(hi)]
    """
    if not lo < hi:
        raise InvalidParam(f"search interval must have lo < hi, got [{lo:g}, {hi:g}]")
    tol = rel_tol * abs(target)
    f_lo, f_hi = fn(lo), fn(hi)
    if f_lo > target + tol or f_hi < target - tol:
        raise TargetUnreachable(
            f"target {target:.6g} outside [{f_lo:.6g}, {f_hi:.6g}] reached on [{lo:g}, {hi:g}]",
            bracket=(lo, hi), values=(f_lo, f_hi),
        )
    if abs(f_lo - target) <= tol:
        return lo
    if abs(f_hi - target) <= tol:
        return hi

    mid = 0.5 * (lo + hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        value = fn(mid)
        if abs(value - target) <= tol:
            return mid
        if value < target:
            lo = mid
        else:
            hi = mid
    logger.warning(f"Bisection stopped after {max_iter} iterations at {mid:.12g}")
    return mid


def compensate_B(case: RiskCase, target: float, A_new: float,
                 interval: Tuple[float, float] = (0.0, 2.0),
                 unmasked_A: Optional[float] = None) -> float:
    """
    Passenger-load meta-parameter B* restoring `target` system_P at viral load A_new.

    Args:
        case: base case
        target: system_P to restore
        A_new: new viral load meta-parameter (masked susceptibles)
        interval: B search bracket
        unmasked_A: unmasked meta-parameter, defaults to A_new / F_m
    """
    if not target > 0:
        raise InvalidParam(f"target risk must be positive, got {target}")

    def risk(B: float) -> float:
        return risk_with_meta(case, A_new, B, unmasked_A).system_P

    B = bisect_increasing(risk, target, *interval)
    logger.info(f"🎯 A={A_new:g} needs B={B:.6f} to hold P={target * config.PER_THOUSAND:.4f}/1000")
    return B


@dataclass(frozen=True)
class RestoringHeadway:
    alpha: float
    A: float
    B: float
    trunk_headway_min: float
    branch_headway_min: float


def restoring_headway(case: RiskCase, alpha: float,
                      factors: ScalingFactors = ScalingFactors(),
                      interval: Tuple[float, float] = (0.0, 2.0)) -> RestoringHeadway:
    """
    Headways that hold the risk of `factors` when infectiousness becomes α.
    The other factors stay; headways scale by B* / γ.
    """
    env = case.env
    target = evaluate(case, factors).system_P
    variant = replace(factors, alpha=alpha)
    A_new = meta_A(variant, env.f_m, env.R_m, env.F_m)
    unmasked = meta_A(variant, env.f_m, env.R_m, 1.0)
    B = compensate_B(case, target, A_new, interval, unmasked_A=unmasked)
    beta = B / factors.gamma
    services = case.topology.services
    return RestoringHeadway(
        alpha=alpha,
        A=A_new,
        B=B,
        trunk_headway_min=beta * case.plan.trunk_headway(services) * 60.0,
        branch_headway_min=beta * case.plan.branch_headway * 60.0,
    )


def solve_Fm_for_alpha(alpha: float, A_target: float, f_m: float, R_m: float,
                       delta: float = 1.0, epsilon: float = 1.0) -> float:
    """Inhale penetration F_m keeping A at A_target when infectiousness is α"""
    denominator = alpha * delta * (1.0 - f_m * (1.0 - R_m))
    if denominator == 0:
        raise NoFeasibleMask(f"no mask can hold A={A_target:g}: αδ(1 - f_m(1 - R_m)) is zero")
    F_m = A_target * epsilon / denominator
    if not 0.0 <= F_m <= 1.0:
        raise NoFeasibleMask(f"α={alpha:g} needs F_m={F_m:.6g}, outside [0, 1]")
    return F_m


def solve_fm_for_alpha(alpha: float, A_target: float, F_m: float, R_m: float,
                       delta: float = 1.0, epsilon: float = 1.0) -> float:
    """Mask-wearing share f_m keeping A at A_target when infectiousness is α"""
    if R_m == 1.0:
        raise DegenerateMask("R_m = 1: infector masks do not filter, f_m has no effect on A")
    denominator = alpha * delta * F_m
    if denominator == 0:
        raise NoFeasibleProportion(f"no mask share can hold A={A_target:g}: αδF_m is zero")
    f_m = (1.0 - A_target * epsilon / denominator) / (1.0 - R_m)
    if -1e-12 < f_m < 0.0:
        f_m = 0.0
    if not 0.0 <= f_m <= 1.0:
        raise NoFeasibleProportion(f"α={alpha:g} needs f_m={f_m:.6g}, outside [0, 1]")
    return f_m


@dataclass(frozen=True)
class MaskTradeoff:
    alpha: float
    F_m: Optional[float]  # None when no mask quality suffices
    f_m: Optional[float]  # None when no wearing share suffices


def mask_tradeoff_table(alphas: Sequence[float], A_target: float = 0.5,
                        f_m: float = config.MASK_FRACTION,
                        R_m: float = config.EXHALE_PENETRATION,
                        F_m: float = config.INHALE_PENETRATION,
                        delta: float = 1.0, epsilon: float = 1.0) -> List[MaskTradeoff]:
    """Iso-A curves: mask quality or mask share needed for each α"""
    rows = []
    for alpha in alphas:
        try:
            needed_F = solve_Fm_for_alpha(alpha, A_target, f_m, R_m, delta, epsilon)
        except NoFeasibleMask:
            needed_F = None
        try:
            needed_f = solve_fm_for_alpha(alpha, A_target, F_m, R_m, delta, epsilon)
        except (NoFeasibleProportion, DegenerateMask):
            needed_f = None
        rows.append(MaskTradeoff(alpha=alpha, F_m=needed_F, f_m=needed_f))
    return rows


def calibrate_q(P: float, I: float, p: float, t: float, Q: float) -> float:
    """Quanta rate q reproducing attack rate P: q = -Q ln(1 - P) / (I p t)"""
    if not 0.0 <= P < 1.0:
        raise InvalidAttackRate(f"attack rate must lie in [0, 1), got {P}")
    for name, value in (("I", I), ("p", p), ("t", t), ("Q", Q)):
        if not value > 0:
            raise InvalidParam(f"{name} must be positive, got {value}")
    return -Q * math.log1p(-P) / (I * p * t)


def check_calibration(q: float, I: float, p: float, t: float, Q: float) -> float:
    """Attack rate the calibrated q gives back"""
    return wells_riley(I, VirusEnv(q=q, p=p, Q=Q), t)


# ============================================================
# BRANCH HEADWAY ALLOCATION
# ============================================================

@dataclass(frozen=True)
class AllocationRow:
    h_ab: float  # hours
    h_ba: float
    system_P: float
    service_P: Dict[str, float]


@dataclass
class AllocationResult:
    table: List[AllocationRow]
    argmin_h_ab: float

    @property
    def best(self) -> AllocationRow:
        return next(row for row in self.table if row.h_ab == self.argmin_h_ab)


def _allocation_cell(cell: Tuple[RiskCase, ScalingFactors]) -> Tuple[float, Dict[str, float]]:
    report = evaluate(*cell)
    return report.system_P, {s: summary.P for s, summary in report.per_service.items()}


def allocate_branch_headways(case: RiskCase, h_ab_values: Sequence[float],
                             pi=None, factors: ScalingFactors = ScalingFactors(),
                             workers: Optional[int] = None) -> AllocationResult:
    """
    Risk for each trunk split h_ab / (branch headway - h_ab), in hours.
    Ties in the argmin go to the smallest h_ab.
    """
    if len(case.topology.services) != 2:
        raise InvalidPlan("headway allocation needs a line with two branches")
    if not h_ab_values:
        raise EmptyRange("no h_ab values to evaluate")
    if pi is not None:
        case = case.with_rates(pi)

    values = sorted(set(float(h) for h in h_ab_values))
    cases = [case.with_plan(case.plan.with_h_ab(h)) for h in values]
    logger.info(f"🔀 Headway allocation over {len(values)} splits")
    results = get_grid_runner(workers).map(_allocation_cell, [(c, factors) for c in cases])

    table = [
        AllocationRow(h_ab=h, h_ba=c.plan.h_ba, system_P=P, service_P=per_service)
        for h, c, (P, per_service) in zip(values, cases, results)
    ]
    best = table[0]
    for row in table[1:]:
        if row.system_P < best.system_P:
            best = row
    logger.info(f"🔀 Lowest risk at h_ab={best.h_ab * 60:g} min: {best.system_P * config.PER_THOUSAND:.4f}/1000")
    return AllocationResult(table=table, argmin_h_ab=best.h_ab)


# ============================================================
# CAR LOAD DISTRIBUTION
# ============================================================

@dataclass(frozen=True)
class CarDistributionResult:
    shares: Tuple[float, ...]
    system_P: float
    car_P: Tuple[float, ...]
    most_crowded_car: int
    most_crowded_P: float
    least_crowded_car: int
    least_crowded_P: float


def _car_cell(cell: Tuple[RiskCase, ScalingFactors]) -> CarDistributionResult:
    case, factors = cell
    report = evaluate(case, factors)
    car_P = tuple(report.per_car[c].P for c in range(case.plan.cars_per_train))
    most, least = report.most_crowded_car, report.least_crowded_car
    return CarDistributionResult(
        shares=case.plan.car_shares,
        system_P=report.system_P,
        car_P=car_P,
        most_crowded_car=most,
        most_crowded_P=car_P[most],
        least_crowded_car=least,
        least_crowded_P=car_P[least],
    )


def compare_car_distributions(case: RiskCase, share_vectors: Sequence[Sequence[float]],
                              factors: ScalingFactors = ScalingFactors(),
                              workers: Optional[int] = None) -> List[CarDistributionResult]:
    """System, most-crowded-car and least-crowded-car risk per share vector"""
    cars = case.plan.cars_per_train
    cells = []
    for k, shares in enumerate(share_vectors):
        try:
            checked = validate_shares(shares, cars)
        except InvalidShares as e:
            raise InvalidShares(f"share vector {k + 1}: {e}") from None
        cells.append((case.with_plan(case.plan.with_shares(checked)), factors))
    return get_grid_runner(workers).map(_car_cell, cells)


@dataclass(frozen=True)
class CarLevel:
    headway_min: float           # trunk headway
    pi: Optional[float]          # None keeps the case's infection rates
    results: List[CarDistributionResult]


def car_distribution_levels(case: RiskCase, share_vectors: Sequence[Sequence[float]],
                            headways_min: Sequence[float], pis: Sequence[float] = (),
                            factors: ScalingFactors = ScalingFactors(),
                            workers: Optional[int] = None) -> List[CarLevel]:
    """Car distribution study repeated for each trunk headway (and uniform π level)"""
    if not headways_min:
        raise EmptyRange("no headways to evaluate")
    trunk_min = case.plan.trunk_headway(case.topology.services) * 60.0
    levels = []
    for pi in (list(pis) or [None]):
        for h in headways_min:
            assignment = {"headway": h} if pi is None else {"headway": h, "pi": pi}
            cell_case, cell_factors = _cell_setting(case, factors, trunk_min, assignment)
            results = compare_car_distributions(cell_case, share_vectors, cell_factors, workers)
            levels.append(CarLevel(headway_min=float(h), pi=pi, results=results))
    logger.info(f"🚃 Car study over {len(levels)} headway/π levels")
    return levels


# ============================================================
# SPATIAL INFECTION RATES
# ============================================================

@dataclass
class SpatialComparison:
    spatial: RiskReport
    uniform: RiskReport
    uniform_rate: float

    @property
    def relative_change(self) -> float:
        """Spatial system_P relative to the equivalent uniform one"""
        return self.spatial.system_P / self.uniform.system_P - 1.0


def compare_spatial_rates(case: RiskCase, rates: InfectionRateField,
                          factors: ScalingFactors = ScalingFactors()) -> SpatialComparison:
    """Spatial rates against the uniform rate with the same expected carriers"""
    uniform_rate = equivalent_uniform_rate(rates, case.demand, case.topology)
    spatial = evaluate(case.with_rates(rates), factors)
    uniform = evaluate(case.with_rates(uniform_rate), factors)
    comparison = SpatialComparison(spatial=spatial, uniform=uniform, uniform_rate=uniform_rate)
    logger.info(
        f"🗺️ Spatial rates: {spatial.system_P * config.PER_THOUSAND:.4f}/1000 vs uniform "
        f"{uniform_rate:.4%}: {uniform.system_P * config.PER_THOUSAND:.4f}/1000 "
        f"({comparison.relative_change:+.2%})"
    )
    return comparison
