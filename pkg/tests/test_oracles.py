"""Risk kernel against independent computations: closed form, enumeration, simulation"""
import itertools
import math
import os

import numpy as np
import pytest
from scipy import stats

from demand_service import ODDemand, ServicePlan, train_loads
from risk_core import VirusEnv, meta_params, ScalingFactors, p_infect_od, poisson_tail, survival_term
from topology import exposure_time, valid_pairs
from tests.conftest import make_line

SEED = int(os.getenv("RISK_SEED", "20201"))


# ============================================================
# CLOSED FORM
# ============================================================

@pytest.mark.parametrize("truncation", ["conditional", "literal"])
def test_mixture_within_tail_bound_of_closed_form(truncation):
    pi = 0.5
    for lam in np.linspace(0.0, 5.0, 50):
        N = lam / pi
        tail = float(poisson_tail(N, pi))
        for a in np.linspace(0.0, 1.0, 50):
            exact = math.exp(-lam * (1.0 - math.exp(-a)))
            assert abs(survival_term(N, pi, a, truncation) - exact) <= tail + 1e-12


# ============================================================
# ENUMERATION
# ============================================================

def _lines():
    """Unbranched lines of 2 to 4 stations and the smallest two-branch line"""
    rng = np.random.default_rng(SEED)
    out = []
    for n in (2, 3, 4):
        ids = [f"s{k}" for k in range(n)]
        times = {(a, b): float(rng.uniform(0.05, 0.3)) for a, b in zip(ids, ids[1:])}
        out.append(make_line(ids, times=times, name=f"line{n}"))
    out.append(make_line(
        ["t0", "t1"], branches={"A": ["a1"], "B": ["b1"]},
        times={("t0", "t1"): 0.1, ("t1", "a1"): 0.2, ("t1", "b1"): 0.15}, name="fork",
    ))
    return out


def _integer_case(topo, rng):
    """One-car trains every hour, so loads equal the integer rates"""
    rates = {od: float(rng.integers(0, 6)) for od in valid_pairs(topo)}
    if topo.is_branched:
        # trunk riders split between two trains 30 minutes apart: keep their loads whole
        rates = {od: (2 * r if topo.branch_of(od[1]) is None else r) for od, r in rates.items()}
    demand = ODDemand.from_rates(topo, rates)
    plan = ServicePlan.from_minutes(60.0, 30.0, cars_per_train=1)
    return demand, plan


def _enumerate(weights, doses):
    """Σ over joint carrier counts of Π weight · exp(-Σ n·dose)"""
    total = 0.0
    for counts in itertools.product(*(range(len(w)) for w in weights)):
        weight = math.prod(w[n] for w, n in zip(weights, counts))
        total += weight * math.exp(-sum(n * d for n, d in zip(counts, doses)))
    return 1.0 - total


def test_p_nm_matches_enumeration():
    rng = np.random.default_rng(SEED)
    env = VirusEnv(pi=0.01)
    meta = meta_params(env, ScalingFactors())
    coef = meta.A_unmasked * env.p * env.q / env.Q
    checked = 0
    for topo in _lines():
        demand, plan = _integer_case(topo, rng)
        for tl in train_loads(demand, plan, topo):
            for od, load in tl.loads.items():
                if load == 0:
                    continue
                riders = [(r, int(round(n))) for r, n in tl.loads.items()
                          if n > 0 and exposure_time(topo, od, r) > 0]
                doses = [coef * exposure_time(topo, od, r) for r, _ in riders]
                poisson = []
                binomial = []
                for _, n in riders:
                    pmf = stats.poisson.pmf(np.arange(n + 1), n * 0.01)
                    poisson.append(pmf / pmf.sum())
                    binomial.append(stats.binom.pmf(np.arange(n + 1), n, 0.01))

                _, P_nm = p_infect_od(topo, od, tl.service, 0, tl, env, truncation="conditional")
                assert P_nm == pytest.approx(_enumerate(poisson, doses), abs=1e-9)
                assert abs(P_nm - _enumerate(binomial, doses)) <= 2e-3
                checked += 1
    assert checked > 0


# ============================================================
# SIMULATION
# ============================================================

def _truncated_poisson(rng, lam, bound, size):
    draws = rng.poisson(lam, size=(size, len(lam)))
    over = draws > bound
    while over.any():
        draws[over] = rng.poisson(np.broadcast_to(lam, draws.shape)[over])
        over = draws > bound
    return draws


@pytest.mark.slow
def test_monte_carlo_attack_rate(redline_case):
    rng = np.random.default_rng(SEED)
    env = redline_case.env
    meta = meta_params(env, ScalingFactors())
    coef = meta.A_unmasked * env.p * env.q / env.Q
    cycles, chunk = 1_000_000, 100_000

    loads = {tl.service: tl for tl in redline_case.loads}
    layout = redline_case.layouts["B"]
    base = np.array(loads["B"].car_vector(2), dtype=float)
    lam = base * layout.rates
    bound = np.ceil(base).astype(np.int64)

    picks = rng.choice(len(layout.pairs), size=5, replace=False)
    for i in sorted(picks):
        od = layout.pairs[i]
        _, P_nm = p_infect_od(redline_case.topology, od, "B", 2, loads["B"], env,
                              truncation=redline_case.truncation)
        dose = coef * layout.exposure[i]
        live = dose > 0
        infected = 0
        for _ in range(cycles // chunk):
            carriers = _truncated_poisson(rng, lam[live], bound[live], chunk)
            p = -np.expm1(-(carriers @ dose[live]))
            infected += int((rng.random(chunk) < p).sum())
        rate = infected / cycles
        se = math.sqrt(max(P_nm * (1 - P_nm), 1e-12) / cycles)
        assert abs(rate - P_nm) <= 3 * se, od
