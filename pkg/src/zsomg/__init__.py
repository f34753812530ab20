"""Bounding the value of two-player zero-sum partially observable stochastic games.

Heuristic search over occupancy states with Lipschitz-continuous upper and
lower value bounds, plus a brute-force normal-form oracle for checking.
"""

__version__ = "0.1.0"

from .model import PosgModel, builtin, load_model  # noqa: E402
from .occupancy import OccupancyState, initial_occupancy, transition  # noqa: E402
from .hsvi import SolverConfig, SolveResult, extract_strategies, solve  # noqa: E402
from .oracle import oracle_value, solve_matrix_game  # noqa: E402

__all__ = ["PosgModel", "builtin", "load_model", "OccupancyState", "initial_occupancy",
           "transition", "SolverConfig", "SolveResult", "extract_strategies", "solve",
           "oracle_value", "solve_matrix_game", "__version__"]
