"""Joint limit laws for maxima of Gaussian processes over continuous time and grids."""

from .errors import (ConfigMismatch, EqualSpacings, GridMeshMismatch, InsufficientExceedances,
                     InvalidHorizon, MissingConstant, NonEmbeddable, NonPSD, PiterbargError,
                     PreconditionError, UnclassifiableGrid)
from .gp_sim import (CorrelationModel, MixingVector, SimulationMesh, VectorProcessSpec,
                     sample_fbm, sample_scalar_paths, sample_vector_paths, support_maxima)
from .limit_laws import (ConstantSpacing, GaussHermite, MonteCarlo, PickandsBank,
                         PickandsSpacing, PiterbargParams, PowerLogSpacing, TheoremCase,
                         classify_grid, eval_G, f_case, norm_constants)
from .pickands import (estimate_H_alpha, estimate_H_D, estimate_H_D1D2, estimate_H_x_z1z2,
                       estimate_H_xy, field_maxima, tail_prob_check)
from .harness import (ExperimentConfig, convergence_sweep, independence_check, run_experiment,
                      tail_check_lemmaA5)

__version__ = "0.1.0"
