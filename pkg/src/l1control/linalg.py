"""Sparse linear algebra: CSR and diagonal matrices, CG, Rayleigh extremes.

CSR storage is scipy's ``csr_matrix`` with canonical format (sorted column
indices, duplicates summed). Composite operators such as
``G = M + alpha K M^{-1} K`` are ``scipy.sparse.linalg.LinearOperator``
instances and are never materialised.
"""
from __future__ import annotations

from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import BreakdownError, ConvergenceError, DimensionError

LinearOperator = spla.LinearOperator


class DiagonalMatrix:
    """Diagonal matrix stored by its diagonal."""

    def __init__(self, diag):
        self.diag = np.asarray(diag, dtype=float)
        self.diag.setflags(write=False)

    @property
    def shape(self):
        n = self.diag.size
        return (n, n)

    def __matmul__(self, x):
        x = np.asarray(x)
        if x.ndim == 1:
            return self.diag * x
        return self.diag[:, None] * x

    def solve(self, x):
        return np.asarray(x) / self.diag

    def inverse(self) -> "DiagonalMatrix":
        return DiagonalMatrix(1.0 / self.diag)

    def toarray(self):
        return np.diag(self.diag)

    def tocsr(self):
        return sp.diags(self.diag, format="csr")


def csr_from_triplets(rows, cols, vals, n) -> sp.csr_matrix:
    """Assemble an ``n x n`` CSR matrix, summing duplicate entries."""
    A = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def _apply(A, x):
    if isinstance(A, (DiagonalMatrix, np.ndarray)) or sp.issparse(A):
        return A @ x
    if isinstance(A, spla.LinearOperator):
        return A.matvec(x)
    return A(x)


def _dim(A):
    if hasattr(A, "shape"):
        return A.shape[1]
    return None


def matvec(A, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = _dim(A)
    if n is not None and x.shape[0] != n:
        raise DimensionError(f"operator has dimension {n}, vector has length {x.shape[0]}")
    return np.asarray(_apply(A, x)).ravel()


def weighted_norm(B, x) -> float:
    """sqrt(x^T B x)."""
    x = np.asarray(x, dtype=float)
    val = float(x @ matvec(B, x))
    return float(np.sqrt(max(val, 0.0)))


def cg_solve(
    A,
    b,
    tol: float = 1e-10,
    maxit: int | None = None,
    precond=None,
    x0=None,
) -> tuple[np.ndarray, int]:
    """Preconditioned conjugate gradients.

    Stops once ``||b - A x||_2 <= tol * ||b||_2``. ``precond`` is either the
    diagonal of a Jacobi preconditioner (array or ``DiagonalMatrix``) or a
    callable applying the inverse of a preconditioner.

    Returns ``(x, iterations)``. Raises ``ConvergenceError`` when ``maxit`` is
    exhausted and ``BreakdownError`` when a search direction has
    ``p.Ap <= 0``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if _dim(A) is not None and _dim(A) != n:
        raise DimensionError(f"operator has dimension {_dim(A)}, rhs has length {n}")
    if maxit is None:
        maxit = 3 * n
    if precond is None:
        apply_prec: Callable = lambda r: r
    elif isinstance(precond, DiagonalMatrix):
        apply_prec = precond.solve
    elif callable(precond):
        apply_prec = precond
    else:
        d = np.asarray(precond, dtype=float)
        apply_prec = lambda r: r / d

    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0:
        return np.zeros(n), 0
    r = b - matvec(A, x) if x0 is not None else b.copy()
    target = tol * bnorm
    if np.linalg.norm(r) <= target:
        return x, 0
    z = apply_prec(r)
    p = z.copy()
    rz = r @ z
    for it in range(1, maxit + 1):
        Ap = matvec(A, p)
        pAp = p @ Ap
        if not pAp > 0.0:
            raise BreakdownError(f"CG breakdown at iteration {it}: p.Ap = {pAp:.3e}")
        step = rz / pAp
        x += step * p
        r -= step * Ap
        if np.linalg.norm(r) <= target:
            return x, it
        z = apply_prec(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    res = np.linalg.norm(b - matvec(A, x))
    raise ConvergenceError(
        f"CG did not reach relative residual {tol:.1e} in {maxit} iterations (got {res / bnorm:.3e})",
        iterations=maxit,
        residual=res / bnorm,
    )


def _as_operator(A, n):
    if sp.issparse(A) or isinstance(A, np.ndarray):
        return A
    if isinstance(A, DiagonalMatrix):
        return A.tocsr()
    return spla.LinearOperator((n, n), matvec=lambda v: matvec(A, v), dtype=float)


def rayleigh_extremes(A, B=None, iters: int = 500, tol: float = 1e-10) -> tuple[float, float]:
    """Smallest and largest generalised Rayleigh quotient x^T A x / x^T B x.

    Uses Lanczos (ARPACK) on the pencil (A, B); ``B=None`` means the
    identity. The small end runs in shift-invert mode about zero, which needs
    A explicitly (sparse or dense). For very small problems a dense
    generalised eigensolve is used instead.
    """
    n = A.shape[0]
    if n <= 60:
        Ad = _dense(A, n)
        Bd = np.eye(n) if B is None else _dense(B, n)
        import scipy.linalg as sla

        w = sla.eigh(Ad, Bd, eigvals_only=True)
        return float(w[0]), float(w[-1])
    Aop = _as_operator(A, n)
    Bop = None if B is None else _as_operator(B, n)
    # deterministic start vector
    v0 = np.random.default_rng(0).standard_normal(n)
    try:
        hi = spla.eigsh(Aop, k=1, M=Bop, which="LA", maxiter=iters * n, tol=tol, v0=v0,
                        return_eigenvectors=False)[0]
        if sp.issparse(A) or isinstance(A, np.ndarray):
            lo = spla.eigsh(Aop, k=1, M=Bop, sigma=0.0, which="LM", maxiter=iters * n, tol=tol,
                            v0=v0, return_eigenvectors=False)[0]
        else:
            lo = spla.eigsh(Aop, k=1, M=Bop, which="SA", maxiter=iters * n, tol=tol, v0=v0,
                            return_eigenvectors=False)[0]
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceError(f"Rayleigh quotient iteration did not converge: {exc}") from exc
    return float(lo), float(hi)


def _dense(A, n):
    if sp.issparse(A):
        return A.toarray()
    if isinstance(A, DiagonalMatrix):
        return A.toarray()
    if isinstance(A, np.ndarray):
        return A
    return np.column_stack([matvec(A, e) for e in np.eye(n)])


def write_matrix_market(path, A) -> None:
    """Dump a matrix in MatrixMarket coordinate format."""
    import scipy.io

    if isinstance(A, DiagonalMatrix):
        A = A.tocsr()
    scipy.io.mmwrite(str(path), sp.coo_matrix(A))
