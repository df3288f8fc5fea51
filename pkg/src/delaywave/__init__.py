"""Stability and stationarity tools for damped second-order equations with delay and noise.

States live in energy coordinates ``(A^{1/2} u, u')`` on a finite modal
truncation, so every norm is the Euclidean norm of the coefficient vector.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source checkout
    __version__ = "0.1.0"

from .delay import (DelayKernel, GreenOperator, assemble_delay, delay_semigroup_decay, delay_transfer,
                    derivative_galerkin_matrix, green_operator, series_criterion, solve_delay,
                    stability_criterion, structure_operator_apply)
from .exceptions import (ConfigError, NonDissipativeError, PreconditionError, SimulationDiverged,
                         SingularOperatorError, WrongTheoremError)
from .noise import FixedNormJumps, GaussianJumps, JumpSpec, NoiseSpec, ParetoJumps
from .operators import (BlockOperator, DampingSpec, SpectralOperator, apply_semigroup, build_reduction,
                        check_generation_conditions, from_energy_coordinates, inverse_block, semigroup_norm,
                        to_energy_coordinates)
from .presets import damped_delay_wave, standing_wave_init
from .sde import (DiffusionSpec, lipschitz_check, order_check, paired_paths, simulate_path, simulate_paths,
                  variation_of_constants_check)
from .spectral import (bound_reports, decay_envelope, gamma_bounds, gpg_numeric_growth_bound,
                       growth_bound_estimate, lyapunov_residual, lyapunov_solution, resolvent_bound_imag_axis,
                       resolvent_norm, spectral_bound_scalar_damping)
from .stationarity import (EmpiricalMeasure, bl_metric_estimate, cauchy_diagnostic, example_thresholds,
                           levy_additive_condition, sufficient_condition_levy, sufficient_condition_wiener)
