"""
Transit Risk Engine CLI
Schedule-based airborne transmission risk on a branched rail line:
- run: base-case risk report (system, per service, per car, per OD)
- sweep: two-parameter grids (A×B, headway, infection rate, masks, infectiousness)
- headways: trunk headway allocation between the two branches
- cars: passenger distribution among cars
- calibrate: quanta rate from an observed attack rate
- compensate: headway that restores base risk for a more infectious variant
- tradeoff: mask quality / mask share needed per infectiousness level
"""
import argparse
import logging
import sys
from typing import List, Optional, Sequence

import config
import reports
from errors import RiskModelError, UsageError
from fixtures import REDLINE_SCENARIO, fixture_path
from grid_runner import close_grid_runner
from risk_core import evaluate
from scenario import ScenarioConfig
from scenario_lab import (
    Axis, META_AXES, allocate_branch_headways, calibrate_q, car_distribution_levels,
    compare_car_distributions, compensate_B, mask_tradeoff_table, off_peak, parse_grid,
    restoring_headway, sweep_AB, sweep_parameters,
)

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s | %(levelname)s | %(name)s | %(message)s"


class RiskArgumentParser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so usage errors share the error path"""

    def error(self, message: str):
        raise UsageError(message)


def setup_logging(level: str):
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format=LOG_FORMAT,
        datefmt="%H:%M:%S",
        stream=sys.stderr,
        force=True,
    )


def _load(args) -> ScenarioConfig:
    return ScenarioConfig.load(args.config)


def _per_1000(args, cfg: ScenarioConfig) -> bool:
    return args.per_1000 or cfg.per_1000


def _float_list(text: str, what: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{what}: expected comma-separated numbers, got '{text}'") from None


# ============================================================
# COMMANDS
# ============================================================

def cmd_run(args) -> int:
    cfg = _load(args)
    case = cfg.build_case()
    report = evaluate(case, cfg.factors)
    reports.write_report_json(report, args.out, case)
    reports.write_od_table_csv(report, reports.sidecar(args.out, ".ods.csv"),
                               precision=cfg.precision, per_1000=_per_1000(args, cfg))
    logger.info(f"✅ System-wide risk {report.system_P * config.PER_THOUSAND:.4f}/1000 "
                f"over {report.susceptible_flow:.0f} trips/h")
    return 0


def cmd_sweep(args) -> int:
    axis1, axis2 = parse_grid(args.grid)
    cfg = _load(args)
    case = cfg.build_case()
    if args.off_peak:
        case = off_peak(case)

    if axis1.name in META_AXES:
        swap = axis1.name == "B"
        a_axis, b_axis = (axis2, axis1) if swap else (axis1, axis2)
        grids = sweep_AB(case, a_axis, b_axis, workers=args.threads)
        grid = grids[args.susceptibles]
        if swap:
            grid = type(grid)(axis1, axis2, grid.cells.T.copy(), grid.metadata)
    else:
        grid = sweep_parameters(case, axis1, axis2, cfg.factors, workers=args.threads)

    reports.write_grid(grid, args.out, precision=cfg.precision, per_1000=_per_1000(args, cfg))
    return 0


def cmd_headways(args) -> int:
    axis = Axis.parse("hab", args.hab)
    cfg = _load(args)
    case = cfg.build_case()
    result = allocate_branch_headways(case, [h / 60.0 for h in axis.values],
                                      factors=cfg.factors, workers=args.threads)
    reports.write_allocation(result, args.out, precision=cfg.precision, per_1000=_per_1000(args, cfg))
    logger.info(f"✅ Best split h_ab={result.best.h_ab * 60:g} min")
    return 0


def cmd_cars(args) -> int:
    cfg = _load(args)
    case = cfg.build_case()
    if args.shares:
        vectors = [_float_list(block, "--shares") for block in args.shares.split(";") if block.strip()]
    else:
        vectors = [list(v) for v in config.CAR_SHARE_SCENARIOS.values()]
    if args.headways:
        headways = _float_list(args.headways, "--headways")
        pis = _float_list(args.pi, "--pi") if args.pi else []
        levels = car_distribution_levels(case, vectors, headways, pis, cfg.factors, workers=args.threads)
        reports.write_car_levels(levels, args.out, precision=cfg.precision, per_1000=_per_1000(args, cfg))
        return 0
    results = compare_car_distributions(case, vectors, cfg.factors, workers=args.threads)
    reports.write_car_table(results, args.out, precision=cfg.precision, per_1000=_per_1000(args, cfg))
    for k, res in enumerate(results, start=1):
        logger.info(f"🚃 Scenario {k}: system {res.system_P * config.PER_THOUSAND:.4f}/1000, "
                    f"car {res.most_crowded_car + 1} {res.most_crowded_P * config.PER_THOUSAND:.4f}/1000")
    return 0


def cmd_calibrate(args) -> int:
    q = calibrate_q(args.attack_rate, args.infectors, args.breathing, args.hours, args.ventilation)
    print(f"{q:.{config.CALIBRATE_SIGNIFICANT_DIGITS}g}")
    return 0


def cmd_compensate(args) -> int:
    cfg = _load(args)
    case = cfg.build_case()
    if args.a_new is not None:
        target = evaluate(case, cfg.factors).system_P
        B = compensate_B(case, target, args.a_new)
        print(f"B={B:.{config.CALIBRATE_SIGNIFICANT_DIGITS}g}")
        return 0
    result = restoring_headway(case, args.alpha, cfg.factors)
    print(f"alpha={result.alpha:g} A={result.A:.6g} B={result.B:.6g} "
          f"trunk_headway_min={result.trunk_headway_min:.6g} "
          f"branch_headway_min={result.branch_headway_min:.6g}")
    return 0


def cmd_tradeoff(args) -> int:
    axis = Axis.parse("alpha", args.alphas)
    cfg = _load(args)
    virus = {**dict(f_m=config.MASK_FRACTION, R_m=config.EXHALE_PENETRATION,
                    F_m=config.INHALE_PENETRATION), **cfg.virus}
    rows = mask_tradeoff_table(axis.values, A_target=args.target, f_m=virus["f_m"],
                               R_m=virus["R_m"], F_m=virus["F_m"])
    reports.write_tradeoff(rows, args.out, precision=cfg.precision)
    return 0


# ============================================================
# PARSER
# ============================================================

def build_parser() -> RiskArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=str(fixture_path(REDLINE_SCENARIO)),
                        help="scenario JSON (default: frozen redline fixture)")
    common.add_argument("--threads", type=int, default=None,
                        help="sweep workers, 0 = one per CPU (default: RISK_THREADS)")
    common.add_argument("--per-1000", action="store_true", help="report probabilities per 1000 trips")
    common.add_argument("--log-level", default=None, help="overrides LOG_LEVEL")

    parser = RiskArgumentParser(prog="transit-risk", description="Schedule-based transit transmission risk")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=RiskArgumentParser)

    p = sub.add_parser("run", parents=[common], help="base-case risk report")
    p.add_argument("--out", required=True, help="JSON report path")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", parents=[common], help="two-parameter risk grid")
    p.add_argument("--grid", required=True, help='e.g. "A=0.1:1.5:0.1,B=0.1:1.5:0.1" or "headway=2:10:1,pi=0:0.02:0.005"')
    p.add_argument("--susceptibles", choices=("unmasked", "masked", "system"), default="unmasked",
                   help="which A×B grid to write")
    p.add_argument("--off-peak", action="store_true", help="scale demand to the off-peak level")
    p.add_argument("--out", required=True, help="CSV path")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("headways", parents=[common], help="trunk headway allocation between branches")
    p.add_argument("--hab", required=True, help="h_ab range in minutes, lo:hi:step")
    p.add_argument("--out", required=True, help="CSV path")
    p.set_defaults(func=cmd_headways)

    p = sub.add_parser("cars", parents=[common], help="passenger distribution among cars")
    p.add_argument("--shares", default=None, help='"s1,s2,...;t1,t2,..." (default: built-in scenarios)')
    p.add_argument("--headways", default=None, help="trunk headways in minutes, e.g. 4,5.5,7 (repeats the study per headway)")
    p.add_argument("--pi", default=None, help="uniform infection rates for --headways, e.g. 0.0092,0.02")
    p.add_argument("--out", required=True, help="CSV path")
    p.set_defaults(func=cmd_cars)

    p = sub.add_parser("calibrate", parents=[common], help="quanta rate from an attack rate")
    p.add_argument("--attack-rate", type=float, required=True)
    p.add_argument("--infectors", type=float, default=1.0)
    p.add_argument("--hours", type=float, required=True)
    p.add_argument("--ventilation", type=float, default=config.CAR_VENTILATION_RATE)
    p.add_argument("--breathing", type=float, default=config.BREATHING_RATE)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("compensate", parents=[common], help="load reduction restoring base risk")
    p.add_argument("--alpha", type=float, default=2.0, help="infectiousness multiplier")
    p.add_argument("--a-new", type=float, default=None, help="solve B* for this A instead")
    p.set_defaults(func=cmd_compensate)

    p = sub.add_parser("tradeoff", parents=[common], help="iso-A mask requirements")
    p.add_argument("--alphas", required=True, help="alpha range, lo:hi:step")
    p.add_argument("--target", type=float, default=0.5, help="A to hold")
    p.add_argument("--out", required=True, help="CSV path")
    p.set_defaults(func=cmd_tradeoff)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    setup_logging(config.LOG_LEVEL)
    try:
        args = build_parser().parse_args(argv)
        if args.log_level:
            setup_logging(args.log_level)
        logger.info(f"🚀 {args.command}")
        return args.func(args)
    except RiskModelError as e:
        logger.error(f"❌ {e.code}: {e}")
        print(f"error: {e.code}: {e}".replace("\n", " "), file=sys.stderr)
        return e.exit_code
    finally:
        close_grid_runner()


if __name__ == "__main__":
    sys.exit(main())
