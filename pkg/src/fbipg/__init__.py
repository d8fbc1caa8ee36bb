"""Accelerated bi-level proximal gradient with decaying regularization weights."""

from .exceptions import (ConfigurationError, DimensionError, EstimationError,
                         NumericError, SpecError, UnsupportedError)
from .estimators import FBiPGLogisticClassifier, FBiPGRegressor
from .problem import BilevelProblem, assemble_problem, combined_prox, lift, load_problem
from .rates import RateParams
from .solver import FBiPGConfig, IterateTrace, run_fbipg, run_fista_fixed

__version__ = "0.1.0"
