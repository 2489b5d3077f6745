"""
Risk Core
Wells-Riley transmission risk on scheduled trains.

Each car is one ventilated volume. A susceptible rider of OD pair (i, j) shares the
car with riders of every pair (r, s) whose ride overlaps theirs; carriers among
those riders are Poisson with mean N_rs·π, truncated at K = ceil(N_rs). The
non-infection probability is the product of the per-pair mixtures, accumulated
as a sum of logarithms in canonical (r, s) order.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

import config
from demand_service import ODDemand, ServicePlan, TrainLoad, train_loads
from errors import (
    EmptyDemand, InvalidParam, NegativeFactor, UnreachablePair, ZeroVentilation,
)
from infection_rates import InfectionRateField
from topology import LineTopology, ODPair

logger = logging.getLogger(__name__)

Truncation = Literal["conditional", "literal"]
TRUNCATIONS = ("conditional", "literal")


# ============================================================
# INPUT TYPES
# ============================================================

@dataclass(frozen=True)
class VirusEnv:
    """Virus, cabin and mask parameters (defaults are the base case)"""
    q: float = config.BASE_QUANTA_RATE      # quanta/hour
    p: float = config.BREATHING_RATE        # m3/hour
    Q: float = config.CAR_VENTILATION_RATE  # m3/hour per car
    f_m: float = config.MASK_FRACTION
    R_m: float = config.EXHALE_PENETRATION
    F_m: float = config.INHALE_PENETRATION
    pi: InfectionRateField = field(
        default_factory=lambda: InfectionRateField.uniform_rate(config.INFECTION_RATE)
    )

    def __post_init__(self):
        for name in ("q", "p"):
            if not getattr(self, name) >= 0:
                raise InvalidParam(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.Q == 0:
            raise ZeroVentilation("ventilation rate Q must be positive")
        if not self.Q > 0:
            raise InvalidParam(f"ventilation rate Q must be positive, got {self.Q}")
        for name in ("f_m", "R_m", "F_m"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidParam(f"{name} must lie in [0, 1], got {getattr(self, name)}")
        if isinstance(self.pi, (int, float)):
            object.__setattr__(self, "pi", InfectionRateField.uniform_rate(self.pi))

    def with_rate(self, pi) -> "VirusEnv":
        """Same environment with another infection rate (number or field)"""
        return replace(self, pi=pi if isinstance(pi, InfectionRateField)
                       else InfectionRateField.uniform_rate(pi))

    def with_masks(self, **changes) -> "VirusEnv":
        return replace(self, **changes)


@dataclass(frozen=True)
class ScalingFactors:
    """
    Multipliers on the base case: α quanta rate, β headway, γ demand,
    δ travel time, ε ventilation.
    """
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    delta: float = 1.0
    epsilon: float = 1.0

    def __post_init__(self):
        if self.epsilon == 0:
            raise ZeroVentilation("ventilation factor ε must be positive")
        for name in ("alpha", "beta", "gamma", "delta", "epsilon"):
            value = getattr(self, name)
            if not value >= 0 or not math.isfinite(value):
                raise NegativeFactor(f"scaling factor {name} must be >= 0, got {value}")


@dataclass(frozen=True)
class MetaParams:
    """Viral-load meta-parameter A (masked susceptibles), its unmasked twin, and B"""
    A: float
    B: float
    A_unmasked: float

    def __post_init__(self):
        for name in ("A", "B", "A_unmasked"):
            if not getattr(self, name) >= 0:
                raise InvalidParam(f"meta-parameter {name} must be >= 0, got {getattr(self, name)}")


@dataclass(frozen=True)
class ServiceLayout:
    """Canonical OD order, exposure matrix (hours) and rates of one service"""
    service: str
    pairs: Tuple[ODPair, ...]
    exposure: np.ndarray  # [i, r] shared hours of pair i with pair r
    rates: np.ndarray     # π per pair


@dataclass(frozen=True)
class RiskCase:
    """Base-case inputs: everything the risk of one scenario depends on"""
    topology: LineTopology
    demand: ODDemand
    plan: ServicePlan
    env: VirusEnv = field(default_factory=VirusEnv)
    susceptible_excludes_carriers: bool = False
    truncation: Truncation = config.TRUNCATION
    name: str = ""

    def __post_init__(self):
        if self.truncation not in TRUNCATIONS:
            raise InvalidParam(f"truncation must be one of {TRUNCATIONS}, got '{self.truncation}'")

    @cached_property
    def loads(self) -> List[TrainLoad]:
        return train_loads(self.demand, self.plan, self.topology)

    @cached_property
    def layouts(self) -> Dict[str, ServiceLayout]:
        return {tl.service: service_layout(self.topology, tl, self.env.pi) for tl in self.loads}

    def with_env(self, env: VirusEnv) -> "RiskCase":
        return replace(self, env=env)

    def with_plan(self, plan: ServicePlan) -> "RiskCase":
        return replace(self, plan=plan)

    def with_demand(self, demand: ODDemand) -> "RiskCase":
        return replace(self, demand=demand)

    def with_rates(self, pi) -> "RiskCase":
        return replace(self, env=self.env.with_rate(pi))


def service_layout(topo: LineTopology, loads: TrainLoad, pi: InfectionRateField) -> ServiceLayout:
    """Exposure matrix by interval intersection of arrival times along the service"""
    pairs = tuple(loads.loads)
    clock = topo.arrival_times(loads.service)
    start = np.array([clock[o] for o, _ in pairs], dtype=float)
    end = np.array([clock[d] for _, d in pairs], dtype=float)
    shared = np.minimum(end[:, None], end[None, :]) - np.maximum(start[:, None], start[None, :])
    return ServiceLayout(
        service=loads.service,
        pairs=pairs,
        exposure=np.maximum(shared, 0.0),
        rates=pi.rates(topo, pairs),
    )


# ============================================================
# RESULT TYPES
# ============================================================

@dataclass(frozen=True)
class ODRisk:
    """Risk of one OD pair in one car of one service, per trip"""
    service: str
    origin: str
    destination: str
    car: int
    flow: float  # susceptible riders per trip in this car
    pi: float
    P_m: float   # masked susceptible
    P_nm: float  # unmasked susceptible
    r: float     # expected infections per trip


@dataclass(frozen=True)
class RiskSummary:
    P: float
    r: float
    flow: float


@dataclass
class RiskReport:
    rows: List[ODRisk]
    system_P: float
    system_r: float
    susceptible_flow: float
    system_P_masked: float
    system_P_unmasked: float
    per_service: Dict[str, RiskSummary]
    per_car: Dict[int, RiskSummary]
    meta: MetaParams
    car_shares: Tuple[float, ...]
    f_m: float
    max_tail_mass: float = 0.0

    @property
    def most_crowded_car(self) -> int:
        return max(range(len(self.car_shares)), key=lambda c: (self.car_shares[c], -c))

    @property
    def least_crowded_car(self) -> int:
        return min(range(len(self.car_shares)), key=lambda c: (self.car_shares[c], c))

    def od_table(self) -> List[dict]:
        """
        Per OD pair across services and cars: blended P and expected infections.
        Rows follow first appearance in the report.
        """
        acc: Dict[ODPair, List[float]] = {}
        for row in self.rows:
            slot = acc.setdefault((row.origin, row.destination), [0.0, 0.0, row.pi])
            slot[0] += row.r
            slot[1] += row.flow
        return [
            {
                "origin": o,
                "destination": d,
                "pi": pi,
                "flow": flow,
                "r": r,
                "P": r / flow if flow > 0 else 0.0,
            }
            for (o, d), (r, flow, pi) in acc.items()
        ]


# ============================================================
# WELLS-RILEY PRIMITIVES
# ============================================================

def _check_nonnegative(**values):
    for name, value in values.items():
        if not value >= 0:
            raise InvalidParam(f"{name} must be >= 0, got {value}")


def wells_riley(I: float, env: VirusEnv, t: float) -> float:
    """P = 1 - exp(-I p q t / Q)"""
    _check_nonnegative(I=I, t=t)
    return -math.expm1(-I * env.p * env.q * t / env.Q)


def wells_riley_masked(I: float, env: VirusEnv, t: float) -> float:
    """Wells-Riley with infector masks (q -> R_m q) and susceptible masks (p -> F_m p)"""
    _check_nonnegative(I=I, t=t)
    return -math.expm1(-I * (env.F_m * env.p) * (env.R_m * env.q) * t / env.Q)


def _mixture(lam, bounds, a, conditional: bool) -> np.ndarray:
    """
    Σ_{n<=K} e^{-n a} Pois(n; λ) elementwise, by the recurrence
    term_{n+1} = term_n · λ e^{-a} / (n+1). With `conditional` the Poisson
    weights are renormalized over n <= K.
    """
    lam, bounds, a = np.broadcast_arrays(
        np.asarray(lam, dtype=float), np.asarray(bounds), np.asarray(a, dtype=float)
    )
    base = np.exp(-lam)
    term = base.copy()
    total = base.copy()
    decay = lam * np.exp(-a)
    mass_term = base.copy()
    mass = base.copy()

    kmax = int(bounds.max()) if bounds.size else 0
    for n in range(1, kmax + 1):
        live = bounds >= n
        term = term * decay / n
        total = total + np.where(live, term, 0.0)
        if conditional:
            mass_term = mass_term * lam / n
            mass = mass + np.where(live, mass_term, 0.0)

    return total / mass if conditional else total


def survival_term(N: float, pi: float, a: float, truncation: Truncation = config.TRUNCATION) -> float:
    """
    Probability that carriers among N riders of one OD pair infect nobody,
    given a per-carrier exponent a.

    Args:
        N: expected riders per trip (real-valued)
        pi: carrier rate
        a: exponent contributed by one carrier, e.g. F_m p (1 - f_m(1 - R_m)) q t / Q
    """
    _check_nonnegative(N=N, a=a)
    if not 0.0 <= pi <= 1.0:
        raise InvalidParam(f"pi must lie in [0, 1], got {pi}")
    if truncation not in TRUNCATIONS:
        raise InvalidParam(f"truncation must be one of {TRUNCATIONS}, got '{truncation}'")
    bound = math.ceil(N)
    return float(_mixture(N * pi, bound, a, truncation == "conditional"))


def poisson_tail(N, pi):
    """Poisson mass beyond the truncation bound K = ceil(N)"""
    N = np.asarray(N, dtype=float)
    return stats.poisson.sf(np.ceil(N), N * np.asarray(pi, dtype=float))


def expected_infections(demand, f_m: float, P_m, P_nm):
    """r = P_nm (1 - f_m) D + P_m f_m D"""
    if np.any(np.asarray(demand) < 0):
        raise InvalidParam("susceptible demand must be >= 0")
    return P_nm * (1.0 - f_m) * demand + P_m * f_m * demand


def system_risk(rows: Sequence[ODRisk]) -> Tuple[float, float]:
    """(system_P, system_r): expected infections over susceptible riders per cycle"""
    flow = math.fsum(row.flow for row in rows)
    if not flow > 0:
        raise EmptyDemand("no susceptible riders: total demand is zero")
    r = math.fsum(row.r for row in rows)
    return r / flow, r


# ============================================================
# META-PARAMETERS
# ============================================================

def meta_A(factors: ScalingFactors, f_m: float, R_m: float, F_m: float) -> float:
    """A = αδ/ε (1 - f_m(1 - R_m)) F_m"""
    if factors.epsilon == 0:
        raise ZeroVentilation("ventilation factor ε must be positive")
    return factors.alpha * factors.delta / factors.epsilon * (1.0 - f_m * (1.0 - R_m)) * F_m


def meta_B(factors: ScalingFactors) -> float:
    """B = βγ"""
    return factors.beta * factors.gamma


def meta_params(env: VirusEnv, factors: ScalingFactors) -> MetaParams:
    return MetaParams(
        A=meta_A(factors, env.f_m, env.R_m, env.F_m),
        B=meta_B(factors),
        A_unmasked=meta_A(factors, env.f_m, env.R_m, 1.0),
    )


# ============================================================
# EVALUATION
# ============================================================

def _log_survival(layout: ServiceLayout, car_loads: np.ndarray, B: float, A: float,
                  coef: float, conditional: bool, rows: Optional[Sequence[int]] = None) -> np.ndarray:
    """Σ_rs log survival for each susceptible pair (or only `rows`) of one car"""
    loads = B * car_loads
    lam = loads * layout.rates
    bounds = np.ceil(loads).astype(np.int64)
    exposure = layout.exposure if rows is None else layout.exposure[list(rows)]
    a = (A * coef) * exposure
    survival = _mixture(lam[None, :], bounds[None, :], a, conditional)
    # carriers with a zero exponent (no shared ride, or A = 0) cannot infect
    logs = np.log(survival, where=a > 0, out=np.zeros_like(a))
    return logs.sum(axis=1)


def _infection(log_survival):
    """1 - exp(log survival); log survival is never positive"""
    return np.abs(np.expm1(log_survival))


def p_infect_od(topo: LineTopology, od: ODPair, service: str, car: int, loads: TrainLoad,
                env: VirusEnv, factors: ScalingFactors = ScalingFactors(),
                truncation: Truncation = config.TRUNCATION) -> Tuple[float, float]:
    """
    (P_m, P_nm) of one OD pair riding one car of one service.

    `loads` are base-case loads; B = βγ and A from the factors are applied here.
    """
    if loads.service != service:
        raise UnreachablePair(f"loads belong to service '{loads.service}', not '{service}'")
    if od not in loads.loads:
        raise UnreachablePair(f"{od[0]} -> {od[1]} does not ride service '{service}'")
    if not 0 <= car < loads.cars:
        raise InvalidParam(f"car {car} out of range for a {loads.cars}-car train")

    meta = meta_params(env, factors)
    layout = service_layout(topo, loads, env.pi)
    base = np.array(loads.car_vector(car), dtype=float)
    row = [layout.pairs.index(od)]
    coef = env.p * env.q / env.Q
    conditional = truncation == "conditional"
    log_m = _log_survival(layout, base, meta.B, meta.A, coef, conditional, row)
    log_nm = _log_survival(layout, base, meta.B, meta.A_unmasked, coef, conditional, row)
    return float(_infection(log_m[0])), float(_infection(log_nm[0]))


def _summary(r: float, flow: float) -> RiskSummary:
    return RiskSummary(P=r / flow if flow > 0 else 0.0, r=r, flow=flow)


def _assemble(case: RiskCase, meta: MetaParams) -> RiskReport:
    env = case.env
    coef = env.p * env.q / env.Q
    conditional = case.truncation == "conditional"

    rows: List[ODRisk] = []
    by_service: Dict[str, List[float]] = {}
    by_car: Dict[int, List[float]] = {c: [0.0, 0.0] for c in range(case.plan.cars_per_train)}
    masked_sum = unmasked_sum = 0.0
    base_flow = tail = 0.0

    for tl in case.loads:
        layout = case.layouts[tl.service]
        service_acc = by_service.setdefault(tl.service, [0.0, 0.0])
        if not layout.pairs:
            continue
        for car in range(case.plan.cars_per_train):
            base = np.array(tl.car_vector(car), dtype=float)
            base_flow += float(base.sum())
            P_m = _infection(_log_survival(layout, base, meta.B, meta.A, coef, conditional))
            P_nm = _infection(_log_survival(layout, base, meta.B, meta.A_unmasked, coef, conditional))
            flow = meta.B * base
            if case.susceptible_excludes_carriers:
                flow = flow * (1.0 - layout.rates)
            r = expected_infections(flow, env.f_m, P_m, P_nm)

            if np.any(base > 0):
                tail = max(tail, float(np.max(poisson_tail(meta.B * base, layout.rates))))
            masked_sum += float(np.dot(P_m, flow))
            unmasked_sum += float(np.dot(P_nm, flow))

            for k, (o, d) in enumerate(layout.pairs):
                rows.append(ODRisk(
                    service=tl.service, origin=o, destination=d, car=car,
                    flow=float(flow[k]), pi=float(layout.rates[k]),
                    P_m=float(P_m[k]), P_nm=float(P_nm[k]), r=float(r[k]),
                ))
            car_r, car_flow = math.fsum(r), math.fsum(flow)
            service_acc[0] += car_r
            service_acc[1] += car_flow
            by_car[car][0] += car_r
            by_car[car][1] += car_flow

    flow_total = math.fsum(row.flow for row in rows)
    if flow_total == 0 and base_flow > 0:
        # B = 0: the scheduled demand is scaled away, nobody rides
        return RiskReport(
            rows=rows, system_P=0.0, system_r=0.0, susceptible_flow=0.0,
            system_P_masked=0.0, system_P_unmasked=0.0,
            per_service={s: _summary(*acc) for s, acc in by_service.items()},
            per_car={c: _summary(*acc) for c, acc in by_car.items()},
            meta=meta, car_shares=case.plan.car_shares, f_m=env.f_m, max_tail_mass=0.0,
        )
    system_P, system_r = system_risk(rows)
    return RiskReport(
        rows=rows,
        system_P=system_P,
        system_r=system_r,
        susceptible_flow=flow_total,
        system_P_masked=masked_sum / flow_total,
        system_P_unmasked=unmasked_sum / flow_total,
        per_service={s: _summary(*acc) for s, acc in by_service.items()},
        per_car={c: _summary(*acc) for c, acc in by_car.items()},
        meta=meta,
        car_shares=case.plan.car_shares,
        f_m=env.f_m,
        max_tail_mass=tail,
    )


def evaluate(case: RiskCase, factors: ScalingFactors = ScalingFactors()) -> RiskReport:
    """Risk report of the base case scaled by the factors"""
    report = _assemble(case, meta_params(case.env, factors))
    logger.debug(
        f"Evaluated {case.name or 'case'} (A={report.meta.A:g}, B={report.meta.B:g}): "
        f"P={report.system_P * config.PER_THOUSAND:.4f}/1000"
    )
    return report


def risk_with_meta(case: RiskCase, A: float, B: float, unmasked_A: Optional[float] = None,
                   pi=None, f_m: Optional[float] = None) -> RiskReport:
    """
    Risk report from meta-parameters: per-carrier exponents scaled by A, loads by B.

    Args:
        A: viral load meta-parameter seen by masked susceptibles
        B: passenger load meta-parameter
        unmasked_A: meta-parameter seen by unmasked susceptibles; defaults to A / F_m
        pi: optional infection rate (number or field) replacing the case's
        f_m: optional masked share of susceptibles replacing the case's
    """
    if pi is not None:
        case = case.with_rates(pi)
    if f_m is not None:
        case = case.with_env(case.env.with_masks(f_m=f_m))
    if unmasked_A is None:
        if case.env.F_m > 0:
            unmasked_A = A / case.env.F_m
        elif A == 0:
            unmasked_A = 0.0
        else:
            raise InvalidParam("F_m = 0: give the unmasked meta-parameter explicitly")
    return _assemble(case, MetaParams(A=A, B=B, A_unmasked=unmasked_A))
