"""Normalized solutions of Choquard equations with combined nonlinearities on radial grids."""
from .exceptions import *  # noqa: F401,F403
from .params import ProblemParams, classify_regime, load_params, xi_threshold  # noqa: F401

__version__ = "0.1.0"
