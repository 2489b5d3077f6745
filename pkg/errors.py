"""
Risk Engine Errors
Every failure carries a machine-readable code and the exit code the CLI returns.
"""
from typing import Optional, Tuple


class RiskModelError(Exception):
    """Base error of the risk engine"""
    code = "risk_error"
    exit_code = 2

    def __init__(self, message: str = ""):
        super().__init__(message)
        self.message = message

    def __str__(self) -> str:
        return self.message or self.code


class ValidationError(RiskModelError):
    """Bad input: files, fields, parameters (exit 1)"""
    code = "validation"
    exit_code = 1


class ComputationError(RiskModelError):
    """Inputs were valid but the requested result cannot be produced (exit 2)"""
    code = "computation"
    exit_code = 2


# ============================================================
# VALIDATION
# ============================================================

class UnknownStation(ValidationError):
    code = "unknown_station"


class UnreachablePair(ValidationError):
    code = "unreachable_pair"


class InvalidTopology(ValidationError):
    code = "invalid_topology"


class MalformedRow(ValidationError):
    code = "malformed_row"


class NegativeFlow(ValidationError):
    code = "negative_flow"


class NegativeFactor(ValidationError):
    code = "negative_factor"


class InvalidPlan(ValidationError):
    code = "invalid_plan"


class InvalidShares(ValidationError):
    code = "invalid_shares"


class InvalidParam(ValidationError):
    code = "invalid_param"


class ZeroVentilation(ValidationError):
    code = "zero_ventilation"


class InvalidAttackRate(ValidationError):
    code = "invalid_attack_rate"


class EmptyRange(ValidationError):
    code = "empty_range"


class InvalidGridSpec(ValidationError):
    code = "invalid_grid_spec"


class ConfigError(ValidationError):
    code = "config_error"


class UnknownGroup(ValidationError):
    code = "unknown_group"


# ============================================================
# COMPUTATION
# ============================================================

class EmptyDemand(ComputationError):
    code = "empty_demand"


class TargetUnreachable(ComputationError):
    """Bisection bracket does not contain the target"""
    code = "target_unreachable"

    def __init__(self, message: str, bracket: Optional[Tuple[float, float]] = None,
                 values: Optional[Tuple[float, float]] = None):
        super().__init__(message)
        self.bracket = bracket  # (lo, hi) searched
        self.values = values    # system_P at lo and hi


class NoFeasibleMask(ComputationError):
    code = "no_feasible_mask"


class NoFeasibleProportion(ComputationError):
    code = "no_feasible_proportion"


class DegenerateMask(ComputationError):
    code = "degenerate_mask"


class UsageError(ValidationError):
    """Bad command line"""
    code = "usage"
