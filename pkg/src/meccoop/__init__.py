"""Minimum-energy cooperative computation offloading for a user, a helper
and an access point."""
from .model import (Allocation, ConstraintReport, DomainError, EnergyBreakdown, Scenario,
                    achievable_rate, compute_energy, invert_rate, path_loss_gain,
                    total_energy, validate_allocation)
from .lp import LinearProgram, LpSolution, LpStatus, max_supportable_bits, recover_primal, solve_lp
from .dual import DualPoint, EllipsoidConfig, SolveReport, SolveStatus, eval_dual, solve_joint
from .oracle import GridSpec, brute_force_min_energy
from .schemes import SCHEMES, SchemeResult, run_scheme
from .experiments import ExperimentConfig, build_scenario, load_config, parse_config, run_sweep

__version__ = "0.1.0"
