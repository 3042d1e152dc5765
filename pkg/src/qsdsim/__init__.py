"""Stochastic pure-state simulation of open quantum systems.

Single trajectories diffuse under seeded complex noise; their ensemble
mean reproduces the deterministic density-matrix evolution, which ships
here as the cross-checking oracle.  Scenario presets, a classical
companion integrator and a CLI round out the toolkit.
"""

from .errors import (QsdError, DimensionError, HermiticityError, ExpressionError,
                     InvalidStepError, BlowupError, LeakError,
                     IntegratorStepError, ConfigError)
from .fock import (StateVector, OperatorMatrix, DensityMatrix, annihilation,
                   creation, number, identity, position, momentum, basis_state,
                   coherent_state, apply, expectation, variance,
                   projector_fidelity, pure_density, top_level_leak,
                   position_eigenbasis)
from .exprs import OperatorExpr, parse_expr, eval_expr
from .noise import NoiseStream, sample_increments, fork_stream, moment_suite
from .trajectory import (PulseSchedule, OpenSystemModel, TrajectoryConfig,
                         TrajectoryRecord, TrajectoryResult, pulse_value,
                         drift, diffusion_vectors, step, run_trajectory)
from .master import lindblad_rhs, integrate_master, trace_distance
from .ensemble import (EnsembleResult, BornTally, run_ensemble, born_tally,
                       observable_series)
from .scenarios import (KaosParams, ClassicalState, ClassicalTrajectory,
                        PoincarePoint, PRESET_NAMES, preset, kaos_params,
                        kaos_step_size, beta_scale, classical_rhs,
                        integrate_classical, poincare_section,
                        double_well_operators)
from .config import RunConfig, parse_config, resolve_run
from .output import emit_series, write_ensemble_series, write_oracle_series, \
    write_poincare, read_series

__version__ = "0.1.0"
