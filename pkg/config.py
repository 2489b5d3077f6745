"""
Transit Risk Engine Configuration
Base case parameters for schedule-based airborne transmission risk.
"""
import os
from pathlib import Path
from dotenv import load_dotenv

load_dotenv()

# ============================================================
# VIRUS & CABIN (base case)
# ============================================================
BASE_QUANTA_RATE = 270.0        # q°, quanta/hour (back-calculated)
BREATHING_RATE = 0.72           # p, m3/hour per passenger
CAR_VENTILATION_RATE = 1958.0   # Q°, m3/hour per car
INFECTION_RATE = 0.0092         # π, share of riders who are carriers

# ============================================================
# MASKS
# ============================================================
MASK_FRACTION = 0.0             # f_m, nobody masked in the base case
EXHALE_PENETRATION = 0.5        # R_m, normal face covering
INHALE_PENETRATION = 0.5        # F_m

# ============================================================
# SERVICE PLAN
# ============================================================
BRANCH_HEADWAY_MIN = 9.0        # each branch sees a train every 9 min
TRUNK_HEADWAY_ALLOCATION_MIN = 4.5  # h_ab, coordinated trunk headway
CARS_PER_TRAIN = 6
OD_INTERVAL_MIN = 15            # OD slices are 15 minutes long
ANALYSIS_PERIOD = "16:00-18:30"

# ============================================================
# SCENARIOS
# ============================================================
# Off-peak hourly demand relative to the PM peak
OFF_PEAK_DEMAND_FACTOR = 0.32

# Spatial infection rates by station group (scenario 1)
SPATIAL_SCENARIO_RATES = {
    "trunk": 0.008,
    "braintree": 0.005,
    "ashmont": 0.015,
}

# Passenger distribution among the six cars
CAR_SHARE_SCENARIOS = {
    "scenario_1": (0.125, 0.125, 0.25, 0.25, 0.125, 0.125),
    "scenario_2": (0.19, 0.24, 0.19, 0.16, 0.16, 0.06),
}

# ============================================================
# SOLVERS
# ============================================================
BISECTION_REL_TOL = 1e-6        # on system_P
BISECTION_MAX_ITER = 200

# Poisson truncation: "conditional" renormalizes over n <= K, "literal" does not
TRUNCATION = os.getenv("RISK_TRUNCATION", "conditional")

# ============================================================
# OUTPUT
# ============================================================
CSV_SIGNIFICANT_DIGITS = 9
CALIBRATE_SIGNIFICANT_DIGITS = 6
PER_THOUSAND = 1000.0

# ============================================================
# RUNTIME
# ============================================================
WORKERS = int(os.getenv("RISK_THREADS", "1"))  # 0 = one per CPU
DATA_DIR = Path(os.getenv("RISK_DATA_DIR", Path(__file__).resolve().parent / "data"))

# ============================================================
# LOGGING
# ============================================================
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
