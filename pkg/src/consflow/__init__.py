"""Consensus-based distributed optimization flows with integral feedback.

Simulates multi-agent networks minimizing a sum of local convex objectives
under local linear constraints, driven by continuous-time flows: plain
consensus, a projected diminishing-gain baseline, and the constant-gain
integral-feedback update that converges exponentially. Ships a centralized
oracle for ground truth and Lyapunov-level verification of trajectories.
"""

__version__ = "0.1.0"

from .constraint import LinearConstraint, build as build_constraint, \
    feasible_point, randomize_feasible, stacked_rank_guard
from .dynamics import DisturbanceSource, Flow, NetworkState, Problem, make_flow
from .graph import Graph, from_neighbor_lists, is_connected, kron_laplacian, laplacian
from .integrator import IntegratorConfig, StopRule, Trajectory, integrate, \
    integrate_to_convergence
from .metrics import TrajectoryRecord, consensus_error, constraint_violation, w_metric
from .objective import ExpSum, Linear, ObjectiveSpec, QuarticNorm, \
    ScaledSquaredNorm, Zero
from .harness import build_paper_example_5agent, generate_random_instance, run_experiment

__all__ = [
    "__version__",
    "Graph", "from_neighbor_lists", "is_connected", "laplacian", "kron_laplacian",
    "ObjectiveSpec", "ScaledSquaredNorm", "ExpSum", "QuarticNorm", "Linear", "Zero",
    "LinearConstraint", "build_constraint", "feasible_point", "randomize_feasible",
    "stacked_rank_guard",
    "Problem", "NetworkState", "DisturbanceSource", "Flow", "make_flow",
    "IntegratorConfig", "StopRule", "Trajectory", "integrate",
    "integrate_to_convergence",
    "TrajectoryRecord", "w_metric", "consensus_error", "constraint_violation",
    "build_paper_example_5agent", "generate_random_instance", "run_experiment",
]
