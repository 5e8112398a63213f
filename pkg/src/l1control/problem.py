"""Problem data: the continuous problem description and its P1 discretisation.

``DiscretizedDual`` bundles everything the dual algorithms touch (K, M, W,
alpha, beta, the box, projected data) together with the linear solvers for
M, K and ``G = M + alpha K M^{-1} K``.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import fem
from .errors import DimensionError
from .linalg import DiagonalMatrix, LinearOperator, cg_solve
from .mesh import TriangleMesh, unit_square_mesh
from .prox import Box

GAMMA_2D = 4.0


def _sin_sin(x1, x2):
    return np.sin(np.pi * x1) * np.sin(np.pi * x2)


@dataclass(frozen=True)
class ProblemSpec:
    alpha: float = 1e-2
    beta: float = 5e-3
    a: float = -1.0
    b: float = 1.0
    y_d: fem.ScalarField = _sin_sin
    y_r: fem.ScalarField = 0.0
    diffusion: fem.ScalarField = 1.0
    reaction: fem.ScalarField = 0.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        Box(self.a, self.b)

    @property
    def box(self) -> Box:
        return Box(self.a, self.b)


def default_problem(**overrides) -> ProblemSpec:
    """The benchmark instance: -Laplace, y_r = 0, y_d = sin(pi x1) sin(pi x2),
    alpha = 1e-2, beta = 5e-3, [a, b] = [-1, 1]."""
    return ProblemSpec(**overrides)


class LinearSolvers:
    """Solves with M, K and G.

    ``backend="direct"`` factorises M and K with SuperLU and solves G through
    the sparse saddle-point system ``[[M, alpha K], [K, -M]] [p; s] = [r; 0]``
    whose first block row is ``G p = r`` after eliminating ``s = M^{-1} K p``.
    ``backend="cg"`` uses Jacobi-preconditioned CG for M and K and plain CG
    on the matrix-free G operator (each G application does one inner M solve).
    """

    def __init__(self, K, M, alpha, backend="direct", cg_tol=1e-10, inner_tol=1e-12):
        if backend not in ("direct", "cg"):
            raise ValueError(f"unknown linear-solver backend {backend!r}")
        self.K, self.M, self.alpha = K, M, alpha
        self.backend = backend
        self.cg_tol = cg_tol
        self.inner_tol = inner_tol
        self.n = K.shape[0]
        self.cg_iterations = 0
        self.n_solves = 0
        self._mdiag = M.diagonal()
        self._kdiag = K.diagonal()
        if backend == "direct":
            self._Mlu = spla.splu(M.tocsc())
            self._Klu = spla.splu(K.tocsc())
            S = sp.bmat([[M, alpha * K], [K, -M]], format="csc")
            self._Glu = spla.splu(S)
        self.G = LinearOperator((self.n, self.n), matvec=self.apply_G, dtype=float)

    def _cg(self, A, b, tol, precond):
        x, it = cg_solve(A, b, tol=tol, precond=precond, maxit=max(3 * self.n, 100))
        self.cg_iterations += it
        return x

    def solve_M(self, b):
        self.n_solves += 1
        if self.backend == "direct":
            return self._Mlu.solve(b)
        return self._cg(self.M, b, self.inner_tol, self._mdiag)

    def solve_K(self, b):
        self.n_solves += 1
        if self.backend == "direct":
            return self._Klu.solve(b)
        return self._cg(self.K, b, self.inner_tol, self._kdiag)

    def apply_G(self, x):
        x = np.asarray(x, dtype=float).ravel()
        return self.M @ x + self.alpha * (self.K @ self.solve_M(self.K @ x))

    def solve_G(self, b):
        self.n_solves += 1
        if self.backend == "direct":
            rhs = np.concatenate([b, np.zeros(self.n)])
            return self._Glu.solve(rhs)[: self.n]
        return self._cg(self.G, b, self.cg_tol, None)


@dataclass(eq=False)
class DiscretizedDual:
    mesh: TriangleMesh
    K: sp.csr_matrix
    M: sp.csr_matrix
    W: DiagonalMatrix
    alpha: float
    beta: float
    box: Box
    yd: np.ndarray
    yr: np.ndarray
    gamma: float = GAMMA_2D
    backend: str = "direct"
    cg_tol: float = 1e-10
    inner_tol: float = 1e-12
    solvers: LinearSolvers = field(init=False, repr=False)

    def __post_init__(self):
        n = self.K.shape[0]
        for name in ("yd", "yr"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (n,):
                raise DimensionError(f"{name} must have length {n}")
            setattr(self, name, v)
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("alpha and beta must be positive")
        self.solvers = LinearSolvers(self.K, self.M, self.alpha, self.backend,
                                     self.cg_tol, self.inner_tol)
        self.Myd = self.M @ self.yd
        self.Myr = self.M @ self.yr
        # right-hand side of the p-subproblem, up to the M(lambda + mu) term
        self.p_rhs = self.alpha * (self.K @ self.yd - self.Myr)
        self.winv = 1.0 / self.W.diag

    @property
    def n(self) -> int:
        return self.K.shape[0]


def discretize(spec: ProblemSpec, mesh: TriangleMesh | int, backend: str = "direct",
               cg_tol: float = 1e-10, inner_tol: float = 1e-12) -> DiscretizedDual:
    if not isinstance(mesh, TriangleMesh):
        mesh = unit_square_mesh(int(mesh))
    K = fem.assemble_stiffness(mesh, spec.diffusion, spec.reaction)
    M = fem.assemble_mass(mesh)
    W = fem.assemble_lumped_mass(mesh)
    yd = fem.l2_project(spec.y_d, mesh).coefficients
    yr = fem.l2_project(spec.y_r, mesh).coefficients
    return DiscretizedDual(mesh, K, M, W, spec.alpha, spec.beta, spec.box, yd, yr,
                           backend=backend, cg_tol=cg_tol, inner_tol=inner_tol)


def with_beta(prob: DiscretizedDual, beta: float) -> DiscretizedDual:
    """Same discrete data and factorisations with a different L1 weight."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    new = copy.copy(prob)
    new.beta = float(beta)
    return new
