from .networks import gen_network
from .outcomes import gen_covariates, gen_errors, nonlinear_term, simulate_outcomes
from .sweep import SweepSettings, run_power_sweep, write_power_csv
