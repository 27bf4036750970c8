# A set of CMDP_TOOLKIT settings dicts that can be used in tests

RANDOM_DUAL_INIT = {"DUAL_INITIALIZATION": "random", "DUAL_INIT_SEED": 7}
COARSE_GRID = {"GRID_POINTS_PER_AXIS": 5}
SHORT_HORIZON = {"MAX_OUTER_ITERATIONS": 5}
FEW_FIT_ROWS = {"RATE_FIT_MIN_ROWS": 3}
LOOSE_SOFT_VI = {"SOFT_VI_TOLERANCE": 1e-6}
CUSTOM_GENERATORS = {
    "RANDOM_GENERATOR_CLASS": "tests.utils.FixedRandomGenerator",
    "LP_SOLVER_CLASS": "tests.utils.CountingSimplex",
}
