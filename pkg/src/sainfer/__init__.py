"""Online statistical inference for stochastic approximation on Markovian data.

The package runs the recursion x_{t+1} = x_t - eta_t H(x_t, xi_t) on
single-trajectory Markovian streams, self-normalizes the averaged iterates
with O(1)-per-step random-scaling statistics, simulates the pivot's
asymptotic critical values, and reproduces coverage/length experiments for
three worked problems (AR-noise linear regression, Markov-covariate
logistic regression, asynchronous Q-learning) plus a multiplier-bootstrap
baseline.
"""

from .bootstrap import BootstrapEnsemble, bootstrap_ci, run_bootstrap
from .critvals import (CriticalValueTable, embedded_table, empirical_density,
                       simulate_fm_samples, simulate_hm_samples,
                       simulate_table, two_sided_quantile)
from .engine import (DivergenceError, SARun, SparseUpdate, StepSchedule,
                     oracle_linreg, oracle_logistic, qlearning_oracle, run)
from .harness import (CoverageReport, CoverageRow, ExperimentConfig,
                      emit_report, load_config, optimal_alpha, parse_report,
                      run_coverage, single_run_trace)
from .inference import (ConfidenceInterval, DegeneratePivotError,
                        RandomScalingAccumulator, confidence_interval,
                        f_m_statistic, sigma_m_offline, trapezoid_m2)
from .mdp import (MDP, bellman_residual, load_mdp, optimality_gap, random_mdp,
                  save_mdp, uniform_q_average, value_iteration)
from .streams import (LinRegARStream, LogisticARStream, MDPStream, child_rng,
                      scaled_ball_coordinate)

__version__ = "0.1.0"

__all__ = [
    "BootstrapEnsemble", "bootstrap_ci", "run_bootstrap",
    "CriticalValueTable", "embedded_table", "empirical_density",
    "simulate_fm_samples", "simulate_hm_samples", "simulate_table",
    "two_sided_quantile",
    "DivergenceError", "SARun", "SparseUpdate", "StepSchedule",
    "oracle_linreg", "oracle_logistic", "qlearning_oracle", "run",
    "CoverageReport", "CoverageRow", "ExperimentConfig", "emit_report",
    "load_config", "optimal_alpha", "parse_report", "run_coverage",
    "single_run_trace",
    "ConfidenceInterval", "DegeneratePivotError", "RandomScalingAccumulator",
    "confidence_interval", "f_m_statistic", "sigma_m_offline", "trapezoid_m2",
    "MDP", "bellman_residual", "load_mdp", "optimality_gap", "random_mdp",
    "save_mdp", "uniform_q_average", "value_iteration",
    "LinRegARStream", "LogisticARStream", "MDPStream", "child_rng",
    "scaled_ball_coordinate",
    "__version__",
]
