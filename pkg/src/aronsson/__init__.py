"""General cones, comparison checkers and singularity tools for Aronsson equations.

The package evaluates the cones C_k^H(x) = max{p.x : H(p) = k} of a uniformly
convex Hamiltonian H, tests comparison properties of sampled fields against
them, relaxes the Aronsson equation D^2u H_p(Du).H_p(Du) = 0 on 2-D grids and
classifies isolated singularities by blow-up.
"""
from ._backend import BACKEND, get_threads, set_threads
from .cone import ConeValue, cone_gradient, cone_level, cone_values, eval_cone, eval_cone_hat, level_for_slope
from .errors import ConvergenceError, InputError
from .field import Domain, Field, slope_estimate, slope_limit, slope_minus, slope_plus
from .hamiltonian import Hamiltonian, estimate_bounds, level_extremes, make_builtin, parse_hamiltonian, reflect, scaled

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConeValue",
    "ConvergenceError",
    "Domain",
    "Field",
    "Hamiltonian",
    "InputError",
    "cone_gradient",
    "cone_level",
    "cone_values",
    "estimate_bounds",
    "eval_cone",
    "eval_cone_hat",
    "get_threads",
    "level_extremes",
    "level_for_slope",
    "make_builtin",
    "parse_hamiltonian",
    "reflect",
    "scaled",
    "set_threads",
    "slope_estimate",
    "slope_limit",
    "slope_minus",
    "slope_plus",
]
