"""P1 finite elements on ``TriangleMesh``.

Matrices are returned on the free (interior) nodes by default; pass
``full=True`` for the all-node versions, which are what partition-of-unity
identities such as ``1^T M 1 = |Omega|`` refer to.

Scalar fields are either numbers or vectorised callables ``f(x1, x2)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, EllipticityError, MeshError
from .linalg import DiagonalMatrix, cg_solve, csr_from_triplets
from .mesh import TriangleMesh, coarse_to_fine_index, free_nodes

ScalarField = Union[float, Callable[[np.ndarray, np.ndarray], np.ndarray]]

LOCAL_MASS_REF = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


def evaluate_field(f: ScalarField, x1, x2) -> np.ndarray:
    x1 = np.asarray(x1, dtype=float)
    if callable(f):
        out = f(x1, np.asarray(x2, dtype=float))
        return np.broadcast_to(np.asarray(out, dtype=float), x1.shape).copy()
    return np.full(x1.shape, float(f))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """P1 function given by its values on the free nodes (zero on the boundary)."""

    mesh: TriangleMesh
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        if c.shape != (self.mesh.n_free,):
            raise DimensionError(f"expected {self.mesh.n_free} coefficients, got shape {c.shape}")
        object.__setattr__(self, "coefficients", c)

    def nodal_values(self) -> np.ndarray:
        """Values at every vertex, boundary included."""
        v = np.zeros(self.mesh.n_vertices)
        v[free_nodes(self.mesh)] = self.coefficients
        return v

    def __call__(self, i: int) -> float:
        return float(self.nodal_values()[i])

    def dump(self) -> str:
        head = f"# m = {self.mesh.m}\n# N_h = {self.mesh.n_free}\n"
        return head + "".join(f"{c!r}\n" for c in self.coefficients.tolist())


# ---------------------------------------------------------------- geometry

def _gradients(p):
    """Barycentric gradients (T, 3, 2) and areas (T,) for vertex arrays (T, 3, 2)."""
    x, y = p[..., 0], p[..., 1]
    area2 = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    grads = np.stack([b, c], axis=2) / area2[:, None, None]
    return grads, 0.5 * np.abs(area2)


def _edge_midpoints(p):
    """Midpoints of edges (0,1), (1,2), (2,0); shape (T, 3, 2)."""
    return 0.5 * np.stack([p[:, 0] + p[:, 1], p[:, 1] + p[:, 2], p[:, 2] + p[:, 0]], axis=1)


# basis values at the edge midpoints, row = midpoint, column = local basis
_PHI_AT_MID = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])


def element_stiffness(p: np.ndarray, a: ScalarField = 1.0, c0: ScalarField = 0.0) -> np.ndarray:
    """Element matrices of ``a grad.grad + c0 uv`` for triangles ``p`` (T, 3, 2).

    Coefficients are sampled at the three edge midpoints. Raises
    ``EllipticityError`` if ``a <= 0`` or ``c0 < 0`` at any sample.
    """
    p = np.asarray(p, dtype=float).reshape(-1, 3, 2)
    grads, area = _gradients(p)
    mids = _edge_midpoints(p)
    av = evaluate_field(a, mids[..., 0], mids[..., 1])
    cv = evaluate_field(c0, mids[..., 0], mids[..., 1])
    if np.any(av <= 0):
        bad = mids[av <= 0][0]
        raise EllipticityError(f"diffusion coefficient not positive at ({bad[0]:.4g}, {bad[1]:.4g})")
    if np.any(cv < 0):
        bad = mids[cv < 0][0]
        raise EllipticityError(f"reaction coefficient negative at ({bad[0]:.4g}, {bad[1]:.4g})")
    gg = np.einsum("tik,tjk->tij", grads, grads)
    local = (area * av.mean(axis=1))[:, None, None] * gg
    if np.any(cv):
        w = (area / 3.0)[:, None] * cv
        local = local + np.einsum("tq,qi,qj->tij", w, _PHI_AT_MID, _PHI_AT_MID)
    return local


def element_mass(p: np.ndarray) -> np.ndarray:
    """Closed-form P1 element mass matrices (area/12)[[2,1,1],[1,2,1],[1,1,2]]."""
    p = np.asarray(p, dtype=float).reshape(-1, 3, 2)
    _, area = _gradients(p)
    return area[:, None, None] * LOCAL_MASS_REF[None]


def _scatter(mesh: TriangleMesh, local: np.ndarray, full: bool) -> sp.csr_matrix:
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    A = csr_from_triplets(rows, cols, local.ravel(), mesh.n_vertices)
    if full:
        return A
    f = free_nodes(mesh)
    A = A[f][:, f].tocsr()
    A.sort_indices()
    return A


def assemble_stiffness(mesh: TriangleMesh, a: ScalarField = 1.0, c0: ScalarField = 0.0,
                       full: bool = False) -> sp.csr_matrix:
    """Galerkin matrix of ``int a grad(y).grad(v) + c0 y v`` (see ``element_stiffness``)."""
    return _scatter(mesh, element_stiffness(mesh.vertices[mesh.triangles], a, c0), full)


def assemble_mass(mesh: TriangleMesh, full: bool = False) -> sp.csr_matrix:
    return _scatter(mesh, element_mass(mesh.vertices[mesh.triangles]), full)


def assemble_lumped_mass(mesh: TriangleMesh, full: bool = False) -> DiagonalMatrix:
    """W_ii = int phi_i = (1/3) * sum of areas of the triangles at vertex i."""
    w = np.zeros(mesh.n_vertices)
    np.add.at(w, mesh.triangles.ravel(), np.repeat(mesh.areas() / 3.0, 3))
    if not full:
        w = w[free_nodes(mesh)]
    return DiagonalMatrix(w)


def load_vector(f: ScalarField, mesh: TriangleMesh, full: bool = False) -> np.ndarray:
    """b_i = int f phi_i by the 3-edge-midpoint rule."""
    p = mesh.vertices[mesh.triangles]
    mids = _edge_midpoints(p)
    fv = evaluate_field(f, mids[..., 0], mids[..., 1])
    local = (mesh.areas() / 3.0)[:, None] * (fv @ _PHI_AT_MID)
    b = np.zeros(mesh.n_vertices)
    np.add.at(b, mesh.triangles.ravel(), local.ravel())
    return b if full else b[free_nodes(mesh)]


def l2_project(f: ScalarField, mesh: TriangleMesh, full: bool = False, tol: float = 1e-12):
    """L2 projection onto P1 (zero boundary values unless ``full``).

    Returns a ``GridFunction`` for the free-node space, a plain all-node
    coefficient array when ``full`` is set.
    """
    M = assemble_mass(mesh, full=full)
    b = load_vector(f, mesh, full=full)
    c, _ = cg_solve(M, b, tol=tol, precond=M.diagonal())
    return c if full else GridFunction(mesh, c)


def nodal_interpolate(f: ScalarField, mesh: TriangleMesh) -> GridFunction:
    x = mesh.vertices[free_nodes(mesh)]
    return GridFunction(mesh, evaluate_field(f, x[:, 0], x[:, 1]))


def quasi_interpolate(u: GridFunction, M=None, W=None) -> GridFunction:
    """Basis-weighted averaging pi_i(u) = int u phi_i / int phi_i, i.e. W^{-1} M u."""
    if M is None:
        M = assemble_mass(u.mesh)
    if W is None:
        W = assemble_lumped_mass(u.mesh)
    return GridFunction(u.mesh, W.solve(M @ u.coefficients))


def quasi_interpolate_values(values: np.ndarray, mesh: TriangleMesh) -> np.ndarray:
    """All-node variant acting on a full vector of vertex values."""
    M = assemble_mass(mesh, full=True)
    W = assemble_lumped_mass(mesh, full=True)
    return W.solve(M @ values)


# ---------------------------------------------------------------- exact integrals

def _abs_linear_integral(area, v, snap: float = 1e-14):
    """Exact int_T |l| for linear l with vertex values v (shape (T, 3))."""
    v = np.array(v, dtype=float)
    scale = np.max(np.abs(v), axis=1, keepdims=True)
    v[np.abs(v) < snap * scale] = 0.0
    s = np.sign(v)
    same = (np.all(s >= 0, axis=1)) | (np.all(s <= 0, axis=1))
    out = np.empty(v.shape[0])
    out[same] = area[same] * np.abs(v[same]).sum(axis=1) / 3.0
    mixed = np.flatnonzero(~same)
    if mixed.size:
        vm = v[mixed]
        sm = s[mixed]
        # isolated vertex: nonzero and the other two not of its sign
        iso = np.zeros_like(vm, dtype=bool)
        for k in range(3):
            o1, o2 = (k + 1) % 3, (k + 2) % 3
            iso[:, k] = (sm[:, k] != 0) & (sm[:, k] * sm[:, o1] <= 0) & (sm[:, k] * sm[:, o2] <= 0)
        k = np.argmax(iso, axis=1)
        rows = np.arange(mixed.size)
        a = vm[rows, k]
        b = vm[rows, (k + 1) % 3]
        c = vm[rows, (k + 2) % 3]
        t1 = a / (a - b)
        t2 = a / (a - c)
        frac = t1 * t2  # area fraction of the sub-triangle carrying a's sign
        out[mixed] = area[mixed] / 3.0 * (frac * np.abs(a) + np.abs(a + b + c - frac * a))
    return out


def exact_l1_norm(u: GridFunction) -> float:
    """int |u_h| dx, exact for piecewise-linear u_h."""
    vals = u.nodal_values()[u.mesh.triangles]
    return float(_abs_linear_integral(u.mesh.areas(), vals).sum())


def exact_l1_values(values: np.ndarray, mesh: TriangleMesh) -> float:
    return float(_abs_linear_integral(mesh.areas(), values[mesh.triangles]).sum())


def l1_lumped(u, W: DiagonalMatrix) -> float:
    c = _coeffs(u)
    if c.size != W.diag.size:
        raise DimensionError(f"W has dimension {W.diag.size}, vector has length {c.size}")
    return float(np.abs(W @ c).sum())


def l1_mass(u, M) -> float:
    c = _coeffs(u)
    if c.size != M.shape[0]:
        raise DimensionError(f"M has dimension {M.shape[0]}, vector has length {c.size}")
    return float(np.abs(M @ c).sum())


def _coeffs(u):
    return u.coefficients if isinstance(u, GridFunction) else np.asarray(u, dtype=float)


def l2_norm_values(values: np.ndarray, mesh: TriangleMesh) -> float:
    M = assemble_mass(mesh, full=True)
    return float(np.sqrt(max(values @ (M @ values), 0.0)))


def h1_seminorm(u: GridFunction) -> float:
    K = assemble_stiffness(u.mesh)
    return float(np.sqrt(u.coefficients @ (K @ u.coefficients)))


# ---------------------------------------------------------------- nested meshes

def prolongate_values(values: np.ndarray, m_coarse: int) -> np.ndarray:
    """One red-refinement level of a P1 function given by all-node values.

    New vertices sit on edge midpoints (horizontal, vertical or the
    lower-left/upper-right diagonal) and take the average of the two ends.
    """
    n = m_coarse + 1
    V = values.reshape(n, n)  # [j, i]
    nf = 2 * m_coarse + 1
    F = np.empty((nf, nf))
    F[::2, ::2] = V
    F[::2, 1::2] = 0.5 * (V[:, :-1] + V[:, 1:])
    F[1::2, ::2] = 0.5 * (V[:-1, :] + V[1:, :])
    F[1::2, 1::2] = 0.5 * (V[:-1, :-1] + V[1:, 1:])
    return F.ravel()


def prolongate(u: GridFunction, fine_mesh: TriangleMesh) -> GridFunction:
    m = u.mesh.m
    if fine_mesh.m % m or (fine_mesh.m // m) & (fine_mesh.m // m - 1):
        raise MeshError(f"m={fine_mesh.m} mesh is not obtained from m={m} by uniform refinement")
    vals = u.nodal_values()
    while m < fine_mesh.m:
        vals = prolongate_values(vals, m)
        m *= 2
    return GridFunction(fine_mesh, vals[free_nodes(fine_mesh)])


def l2_error_nested(u_coarse: GridFunction, u_fine: GridFunction, M_fine=None) -> float:
    """Exact L2 distance between a coarse P1 function and a fine one on a
    nested mesh."""
    up = prolongate(u_coarse, u_fine.mesh)
    d = u_fine.coefficients - up.coefficients
    if M_fine is None:
        M_fine = assemble_mass(u_fine.mesh)
    return float(np.sqrt(max(d @ (M_fine @ d), 0.0)))


__all__ = [
    "GridFunction", "ScalarField", "evaluate_field", "element_stiffness", "element_mass",
    "assemble_stiffness", "assemble_mass", "assemble_lumped_mass", "load_vector",
    "l2_project", "nodal_interpolate", "quasi_interpolate", "exact_l1_norm", "exact_l1_values",
    "l1_lumped", "l1_mass", "prolongate", "l2_error_nested", "coarse_to_fine_index",
]
