"""
Reports
JSON reports and plot-ready CSV tables. JSON floats use the shortest
round-trip repr; CSV numbers use a fixed count of significant digits.
Row order is canonical, so equal inputs give byte-identical files.
"""
import json
import logging
import math
from dataclasses import asdict
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import pandas as pd

import config
from risk_core import RiskCase, RiskReport
from scenario_lab import AllocationResult, CarDistributionResult, CarLevel, MaskTradeoff, SweepGrid

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def sidecar(path: PathLike, suffix: str) -> Path:
    """report.csv -> report<suffix>"""
    path = Path(path)
    return path.with_name(path.stem + suffix)


def _scale(per_1000: bool) -> float:
    return config.PER_THOUSAND if per_1000 else 1.0


def _write_json(data: Dict, path: PathLike):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, allow_nan=False) + "\n", encoding="utf-8")


def _write_csv(frame: pd.DataFrame, path: PathLike, precision: int):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=f"%.{precision}g", lineterminator="\n")


# ============================================================
# RISK REPORT
# ============================================================

def report_to_dict(report: RiskReport, case: Optional[RiskCase] = None) -> Dict:
    """Whole report: system figures raw and per 1000, breakdowns, per-OD rows"""
    per_k = config.PER_THOUSAND
    out: Dict = {}
    if case is not None:
        out["scenario"] = case.name
        out["fixture"] = case.topology.name
        out["period"] = case.plan.period or case.demand.period
    out.update({
        "system_P": report.system_P,
        "system_P_per_1000": report.system_P * per_k,
        "system_r": report.system_r,
        "susceptible_flow": report.susceptible_flow,
        "system_P_masked": report.system_P_masked,
        "system_P_unmasked": report.system_P_unmasked,
        "meta": asdict(report.meta),
        "f_m": report.f_m,
        "max_tail_mass": report.max_tail_mass,
        "per_service": {
            s: {**asdict(summary), "P_per_1000": summary.P * per_k}
            for s, summary in report.per_service.items()
        },
        "per_car": [
            {"car": c, "share": report.car_shares[c], **asdict(summary), "P_per_1000": summary.P * per_k}
            for c, summary in report.per_car.items()
        ],
        "most_crowded_car": report.most_crowded_car,
        "least_crowded_car": report.least_crowded_car,
        "rows": [asdict(row) for row in report.rows],
    })
    return out


def write_report_json(report: RiskReport, path: PathLike, case: Optional[RiskCase] = None):
    _write_json(report_to_dict(report, case), path)
    logger.info(f"💾 Report written to {path}")


def read_report_json(path: PathLike) -> Dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def recompute_system_P(data: Dict) -> float:
    """System probability from the per-OD rows of a stored report"""
    rows = data["rows"]
    return math.fsum(row["r"] for row in rows) / math.fsum(row["flow"] for row in rows)


def write_od_table_csv(report: RiskReport, path: PathLike,
                       precision: int = config.CSV_SIGNIFICANT_DIGITS, per_1000: bool = False):
    """Per OD pair: blended P and expected infections (spatial risk pattern)"""
    frame = pd.DataFrame(report.od_table(), columns=["origin", "destination", "pi", "flow", "r", "P"])
    frame["P"] = frame["P"] * _scale(per_1000)
    _write_csv(frame, path, precision)


# ============================================================
# SCENARIO TABLES
# ============================================================

def write_grid(grid: SweepGrid, path: PathLike,
               precision: int = config.CSV_SIGNIFICANT_DIGITS, per_1000: bool = False):
    """One row per cell, row-major: axis1,axis2,value; metadata in a JSON sidecar"""
    scale = _scale(per_1000)
    frame = pd.DataFrame(
        [(v1, v2, value * scale) for v1, v2, value in grid.rows()],
        columns=[grid.axis1.name, grid.axis2.name, "value"],
    )
    _write_csv(frame, path, precision)
    _write_json({
        "axis1": grid.axis1.to_dict(),
        "axis2": grid.axis2.to_dict(),
        "shape": list(grid.cells.shape),
        "units": "per_1000" if per_1000 else "probability",
        **grid.metadata,
    }, sidecar(path, ".json"))
    logger.info(f"💾 Grid {grid.cells.shape[0]}×{grid.cells.shape[1]} written to {path}")


def write_allocation(result: AllocationResult, path: PathLike,
                     precision: int = config.CSV_SIGNIFICANT_DIGITS, per_1000: bool = False):
    scale = _scale(per_1000)
    services = list(result.table[0].service_P) if result.table else []
    frame = pd.DataFrame(
        [
            [round(row.h_ab * 60.0, 9), round(row.h_ba * 60.0, 9), row.system_P * scale]
            + [row.service_P[s] * scale for s in services]
            for row in result.table
        ],
        columns=["h_ab_min", "h_ba_min", "system_P"] + [f"P_{s}" for s in services],
    )
    _write_csv(frame, path, precision)
    best = result.best
    _write_json({
        "argmin_h_ab_min": round(best.h_ab * 60.0, 9),
        "argmin_h_ba_min": round(best.h_ba * 60.0, 9),
        "argmin_h_ab_hours": best.h_ab,
        "system_P": best.system_P,
        "units": "per_1000" if per_1000 else "probability",
        "rows": len(result.table),
    }, sidecar(path, ".json"))


CAR_COLUMNS = ["scenario", "car", "share", "car_P", "system_P", "most_crowded_P", "least_crowded_P"]


def _car_rows(results: Sequence[CarDistributionResult], scale: float) -> List[list]:
    rows: List[list] = []
    for k, res in enumerate(results, start=1):
        for car, (share, P) in enumerate(zip(res.shares, res.car_P)):
            rows.append([k, car + 1, share, P * scale, res.system_P * scale,
                         res.most_crowded_P * scale, res.least_crowded_P * scale])
    return rows


def write_car_table(results: Sequence[CarDistributionResult], path: PathLike,
                    precision: int = config.CSV_SIGNIFICANT_DIGITS, per_1000: bool = False):
    """One block per share vector, one row per car"""
    frame = pd.DataFrame(_car_rows(results, _scale(per_1000)), columns=CAR_COLUMNS)
    _write_csv(frame, path, precision)
    _write_json({
        "scenarios": [
            {
                "scenario": k,
                "shares": list(res.shares),
                "system_P": res.system_P,
                "most_crowded_car": res.most_crowded_car + 1,
                "most_crowded_P": res.most_crowded_P,
                "least_crowded_car": res.least_crowded_car + 1,
                "least_crowded_P": res.least_crowded_P,
            }
            for k, res in enumerate(results, start=1)
        ],
    }, sidecar(path, ".json"))


def write_tradeoff(rows: Sequence[MaskTradeoff], path: PathLike,
                   precision: int = config.CSV_SIGNIFICANT_DIGITS):
    frame = pd.DataFrame([(r.alpha, r.F_m, r.f_m) for r in rows], columns=["alpha", "F_m", "f_m"])
    _write_csv(frame, path, precision)


def write_car_levels(levels: Sequence[CarLevel], path: PathLike,
                     precision: int = config.CSV_SIGNIFICANT_DIGITS, per_1000: bool = False):
    """Car table per trunk headway and π level; empty pi means the scenario's rates"""
    scale = _scale(per_1000)
    rows = [
        [level.headway_min, level.pi] + row
        for level in levels
        for row in _car_rows(level.results, scale)
    ]
    frame = pd.DataFrame(rows, columns=["headway_min", "pi"] + CAR_COLUMNS)
    _write_csv(frame, path, precision)
    logger.info(f"💾 Car study over {len(levels)} levels written to {path}")
