"""Coarse personalization: choose a small menu of treatments and assign
every individual to one, maximizing total profit."""

from .errors import (ConfigurationError, CoarseError, DataError, DomainError,
                     EnumerationCapError, StructuralError)
from .model import (HOLDOUT, FeasibleTreatment, Individual, Population, ProfitReport,
                    SegmentedPolicy, TreatmentSpace, cate_value, incremental_profit,
                    policy_profit, treatment_cost)
from .granular import (GranularSolution, best_return, optimal_treatment,
                       optimal_treatment_numeric, regret, solve_granular)
from .lloyd import (MenuCost, SolverConfig, SolveResult, assign, foc_residual,
                    round_policy_expost, solve, solve_menu, solve_path,
                    within_dimension_order_violations)
from .oracle import grid_solve, refine_solve, speed_benchmark
from .benchmarks import ab_test_policy, blanket, kmeans, segment_then_personalize
from .surplus import surplus_decomposition
from .synth import SynthConfig, generate_population
from .bootstrap import bootstrap_second_step
from .experiment import ExperimentSpec, run_experiment

__version__ = "0.1.0"
