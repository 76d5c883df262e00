# settings.py - Default application settings

TOOL_NAME = "mixzone"
TOOL_VERSION = "0.3.0"

# --- User Settings File ---
# Optional JSON file that overrides any of the DEFAULT_* values below (lower-case keys,
# without the DEFAULT_ prefix, e.g. {"ga_population_size": 40}).
USER_SETTINGS_FILE = "mixzone_settings.json"
SETTINGS_ENV_VAR = "MIXZONE_SETTINGS"
SEED_ENV_VAR = "MIXZONE_SEED"

# --- Road Networks ---
DEFAULT_LINK_LENGTH = 1.0             # meters, line/grid generators
DEFAULT_GRID_SPACING = 100.0          # meters
DEFAULT_CONNECTION_RANGE = 1500.0     # meters, r(N) for Poisson networks (mean degree about 7 at the default density)
DEFAULT_POISSON_WIDTH = 10000.0       # 10 x 10 km region
DEFAULT_POISSON_HEIGHT = 10000.0
DEFAULT_POISSON_INTENSITY = 1e-6      # nodes per square meter (about 100 nodes in 10x10 km)

# --- Linear Placement ---
ORACLE_MAX_N = 30
ORACLE_MAX_MZ = 6

# --- Cost Model ---
DEFAULT_COST_Z = 1.0
DEFAULT_COST_ALPHA = 2.0
DEFAULT_COST_GAMMA = 2.0
DEFAULT_COST_BUDGET = 1.0
DEFAULT_ORACLE_RESTARTS = 200
DEFAULT_ORACLE_GRID_STEPS = 10000
DEFAULT_ORACLE_REL_TOL = 1e-6

# --- Weber Solver ---
DEFAULT_WEBER_EPSILON = 1e-6
DEFAULT_WEBER_STEP_TOL_FACTOR = 1e-7  # times the instance diameter
DEFAULT_WEBER_MAX_ITERS = 100000
DEFAULT_WEBER_MODE = "weiszfeld"      # Options: "weiszfeld", "smoothed_gradient"

# --- Placement Search (GA + local search) ---
DEFAULT_GA_POPULATION_SIZE = 30
DEFAULT_GA_CROSSOVER_PROB = 0.8
DEFAULT_GA_MUTATION_PROB = 0.2
DEFAULT_GA_MAXGEN = 200
DEFAULT_GA_TOURNAMENT_SIZE = 2
DEFAULT_GA_LOCAL_SEARCH = True
DEFAULT_GA_INIT = "weber"             # Options: "weber" (best locations), "random" (optimal placement)
DEFAULT_GA_METRIC = "avg_hops"        # Options: "avg_hops", "total_cost", "weighted_distance"
DEFAULT_WORKERS = 1

# Backbone detection for normal-traffic networks
BACKBONE_MIN_COVERAGE = 0.7           # share of intersections within one hop of the backbone

# --- Privacy Simulation ---
DEFAULT_SIM_VEHICLES = 200
DEFAULT_SIM_TRIPS = 3
DEFAULT_SIM_MEAN_SPEED = 13.9         # m/s, about 50 km/h
DEFAULT_SIM_DWELL_WINDOW = 60.0       # seconds
DEFAULT_SIM_DURATION = 3600.0         # seconds
DEFAULT_SIM_MIXING = "zone"           # Options: "zone", "network"
DEFAULT_SIM_MC_TRIALS = 10000
DEFAULT_SIM_TRACKING = "exact"        # Options: "exact", "monte_carlo"
DEFAULT_SIM_MAX_J = 3
DEFAULT_INTERSECTION_STRENGTH = 1000.0  # I_T, aggregate traffic the network can carry

# --- Reports ---
DEFAULT_CHART_WIDTH = 640
DEFAULT_CHART_HEIGHT = 360
