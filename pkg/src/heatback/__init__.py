"""Boundary-temperature reconstruction for the 1-D heat equation from an interior sensor."""
from .bounds import (ErrorBoundReport, MultiplierCheck, MultiplierPoint, error_bound,
                     inverse_multiplier_bound_check, multiplier_deficit, spectral_multiplier,
                     tau_bar)
from .core import (GridMismatchError, HeatbackError, ProblemConfig, ResolutionError,
                   SampledFunction, TimeGrid, h2_seminorm_pair, inner, l2_norm)
from .experiment import (ExperimentRecord, Instance, ProfileKind, TruthProfile, add_noise,
                         generate_truth, run_experiment, sweep)
from .forward import (ModeCoefficients, TemperatureField, evolve_mode, fd_oracle_solve,
                      solve_forward)
from .operator import (OperatorMatrix, apply_adjoint, apply_operator, assemble_operator,
                       kernel_partial_sum)
from .tikhonov import (BracketingError, NoiseDominatesError, PenaltyMatrix, RegularizedSolution,
                       assemble_penalty, residual_at, select_alpha_discrepancy,
                       solve_regularized)

__version__ = "0.1.0"
