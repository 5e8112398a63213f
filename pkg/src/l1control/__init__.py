"""Sparse optimal control of elliptic PDEs with L1 cost and box constraints.

P1 finite elements on the unit square, a dual formulation solved by an
sGS-based majorized accelerated block coordinate descent (with an optional
semismooth Newton-CG inner solver), primal recovery with duality-gap and
KKT certificates, and reference oracles for testing.
"""
from .dual import DualIterate, SolveResult, SolverConfig, dual_objective, solve
from .errors import (BreakdownError, ConvergenceError, DimensionError, EllipticityError,
                     L1ControlError, MeshError, NoFreeNodesError)
from .mesh import TriangleMesh, mesh_size, uniform_refine, unit_square_mesh
from .primal import PrimalSolution, beta_zero, evaluate_iterate, primal_solution
from .problem import DiscretizedDual, ProblemSpec, default_problem, discretize, with_beta
from .prox import Box

__version__ = "0.1.0"
