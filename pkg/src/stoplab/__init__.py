"""Data-driven optimal stopping of ergodic diffusions.

Simulation, tuning-free estimation of hitting-time curves, threshold-rule
regret experiments and the numerical lab for two-hypothesis lower bounds.
"""

from .drifts import (DriftSpec, InvariantLaw, check_sigma_membership,
                     default_law, eval_drift, invariant_law, make_drift)
from .errors import StoplabError
from .estimators import (Kernel, XiEstimate, barrier_grid, cdf_estimate,
                         density_estimate, estimate_barrier, xi_hat)
from .experiments import (CumulativeRecord, ExperimentConfig, RegretRecord,
                          empirical_pac_check, fit_rate_slope, pac_bounds,
                          run_exploration_exploitation,
                          run_simple_regret_sweep)
from .oracle import (HypothesisPair, build_hypotheses, phi_star,
                     simple_regret, stationary_kl, verify_separation,
                     xi_closed_form, xi_curve, xi_exact_curve, xi_true)
from .payoffs import (MarginParams, PayoffSpec, check_class_G, check_margin,
                      check_vicinity, make_payoff)
from .sde import (DiffusionPath, first_hitting_time,
                  simulate_impulse_controlled, simulate_path, split_seed)

__version__ = "0.1.0"
