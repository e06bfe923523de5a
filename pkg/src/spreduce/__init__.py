"""Singular-perturbation model reduction of stable LTI systems.

Chooses which states, or which transformed state directions, to eliminate so
that the H2 norm of the output error is small: a greedy elimination over the
original states and a Stiefel-manifold optimizer over orthonormal retained
bases.
"""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .generate import GeneratorConfig, generate, preset
from .greedy import GreedyTrace, Termination, candidate_set, greedy_reduce
from .io import load_model, load_reduced, save_model, save_reduced
from .lti import (
    ErrorSystem,
    ReducedModel,
    StateSpaceModel,
    build_error_system,
    h2_error,
    impulse_response_error,
    white_noise_error,
)
from .sp import ProjectionPair, check_range_condition, compute_pi, reduce, selection_pair
from .stiefel import (
    OptimizationReport,
    StiefelPoint,
    TransformedModel,
    align_from_greedy,
    optimize,
    stabilizing_transform,
    stiefel_reduce,
)
