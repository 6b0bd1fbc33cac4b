"""Periodic homogenization toolkit for stable-noise driven SDEs and nonlocal PDEs."""

__version__ = "0.1.0"

from .config import RunConfig, load_model, save_model
from .ergodic import (EmpiricalMeasure, compare_measures,
                      estimate_invariant_measure, invariance_check,
                      mixing_diagnostic, stationary_average)
from .fields import FourierField, GridField, VectorField, grid_points
from .homogenize import (HomogenizedModel, effective_drift,
                         effective_jump_measure, effective_potential,
                         fclt_diagnostics, homogenize_model,
                         stationary_node_weights)
from .jumpmaps import (LinearJumpMap, MatrixField, PerturbedJumpMap,
                       SeparableJumpMap, SphereMap)
from .levy import StableMeasureSpec, sample_jump_stream, sample_limit_process
from .model import (CoefficientModel, ValidationReport, kernel_bounds,
                    kernel_density, validate_assumptions)
from .nonlocal_solver import (Corrector, compute_corrector, corrector_residual,
                              resolvent_mc, solve_resolvent)
from .pde import (PotentialOverflowError, homogenization_error,
                  solve_limit_mc, solve_limit_spectral, solve_u_eps_mc)
from .presets import PRESETS, get_preset, preset_names
from .sde import (OscillatingResult, SimResult, simulate_fast_chain,
                  simulate_oscillating, simulate_single_path)
