"""
Configuration centralisée du compteur d'orbites.

Valeurs par défaut utilisées quand une expérience JSON ne les surcharge pas.
"""
import os

# ============================================================================
# TOOL IDENTITY
# ============================================================================
TOOL_NAME = "skew-orbit-counter"
TOOL_VERSION = "1.0.0"
SCHEMA_VERSION = 1

# ============================================================================
# POLYNOMIAL ARITHMETIC
# ============================================================================
COEFF_EPSILON = 1e-14      # coefficient relatif considéré nul
EVAL_EPSILON = 1e-12       # |P|, |Q| relatifs considérés nuls à l'évaluation

# ============================================================================
# ROOT FINDING
# ============================================================================
ROOT_CLUSTER_TOL = 1e-8
ROOT_RESIDUAL_CEILING = 1e-6
ROOT_MAX_ITERATIONS = 500
ROOT_SEED = 20240611       # perturbation angulaire des points de départ
ROOT_STEP_TOL = 1e-15      # arrêt individuel d'une racine
MACHINE_EPSILON = 2.220446049250313e-16

# ============================================================================
# SKEW DYNAMICS
# ============================================================================
PERIOD_CLOSURE_TOL = 1e-7
ORBIT_MATCH_TOL = 1e-6
ORBIT_WEIGHT_TOL = 1e-8
SHIFT_CHECK_N = 4          # contrôle du décalage constant par énumération
SHIFT_CHECK_REL = 1e-6
JULIA_CHECK_N = 6          # période maximale de recherche des cycles attractifs

# ============================================================================
# CAPS
# ============================================================================
MAX_DEGREE = 1024
MAX_WORDS = 4096
ZETA_MAX_TERMS = 10_000_000
ZETA_MARGIN = 0.05
MEISSEL_MAX_TERMS = 5_000_000

# ============================================================================
# PRECISION
# ============================================================================
EXTENDED_PRECISION_DEGREE = 512
EXTENDED_PRECISION_DPS = 32

# ============================================================================
# ANALYSIS
# ============================================================================
BURN_IN = 5
BAND_CEILING = 4.0
MIN_WINDOW = 5
LAMBDA_FIT_RESIDUAL_CEILING = 0.1
RHO_RADIUS_MARGIN = 0.99
RHO_MAX_TERMS = 20_000
DEFAULT_K_GRID = [0.1, 0.5, 1.0, 2.0]
REFERENCE_K_GRID = [0.1, 0.5, 1.0, 2.0, 5.0]
DEFAULT_Z_GRID = [2.0]
DEFAULT_RHO_FRACTIONS = [0.5, 0.9, 0.99]
MEISSEL_TAIL_TOL = 1e-6
DIRICHLET_WINDOW_START = 10

# ============================================================================
# EXECUTION
# ============================================================================
DEFAULT_WORKERS = 1
DEFAULT_OUTPUT_DIRECTORY = "output"
DEFAULT_FORMATS = ["csv", "json", "plotdata"]

# ============================================================================
# LOGGING
# ============================================================================
LOG_LEVEL = os.getenv("SKEW_LOG_LEVEL", "INFO")
LOG_FORMAT = '%(asctime)s | %(levelname)-8s | %(name)s | %(message)s'
LOG_DATEFMT = '%Y-%m-%d %H:%M:%S'
LOG_FILE_NAME = "run.log"
