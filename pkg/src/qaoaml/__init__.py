"""Machine-learning warm starts for QAOA MaxCut.

Simulate depth-p QAOA circuits, find optimal gate parameters with
instrumented classical optimisers, learn how depth-1 optima map to
higher-depth optima, and measure the optimiser calls saved by starting
from predicted parameters.
"""

from .errors import DomainError, ObjectiveError, ResourceError, TrainingError
from .graphs import CutTable, Graph, cut_table, cut_value, erdos_renyi, max_cut
from .optimizers import OptimizerConfig, SolveResult, minimize, multistart_solve, random_params, solve_instance
from .simulator import ParameterVector, expectation

__version__ = "0.1.0"

__all__ = [
    "CutTable",
    "DomainError",
    "Graph",
    "ObjectiveError",
    "OptimizerConfig",
    "ParameterVector",
    "ResourceError",
    "SolveResult",
    "TrainingError",
    "cut_table",
    "cut_value",
    "erdos_renyi",
    "expectation",
    "max_cut",
    "minimize",
    "multistart_solve",
    "random_params",
    "solve_instance",
]
