"""Structured triangulations of the unit square.

Vertices are numbered row-major on the lattice ``(i/m, j/m)``, index
``j*(m+1) + i``. Every lattice cell is split along the diagonal running from
its lower-left to its upper-right corner, and both triangles are stored
counterclockwise.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MeshError, NoFreeNodesError


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    vertices: np.ndarray  # (V, 2)
    triangles: np.ndarray  # (T, 3), counterclockwise
    boundary_mask: np.ndarray  # (V,), bool
    m: int
    _free: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        for arr in (self.vertices, self.triangles, self.boundary_mask):
            arr.setflags(write=False)
        free = np.flatnonzero(~self.boundary_mask)
        free.setflags(write=False)
        object.__setattr__(self, "_free", free)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def n_free(self) -> int:
        return self._free.size

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def areas(self) -> np.ndarray:
        return np.abs(self.signed_areas())

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct undirected edges (sorted vertex pairs) and how many
        triangles share each one."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        e.sort(axis=1)
        uniq, counts = np.unique(e, axis=0, return_counts=True)
        return uniq, counts

    def diameters(self) -> np.ndarray:
        # edge vectors measured on the integer lattice, then scaled by 1/m, so
        # that refinement halves the result exactly in floating point
        q = np.rint(self.vertices * self.m)[self.triangles]
        lengths = [np.hypot(*(q[:, i] - q[:, j]).T) for i, j in ((0, 1), (1, 2), (2, 0))]
        return np.max(lengths, axis=0) / self.m

    def inradii(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        perim = sum(np.linalg.norm(p[:, i] - p[:, j], axis=1) for i, j in ((0, 1), (1, 2), (2, 0)))
        return 2.0 * self.areas() / perim

    def dump(self) -> str:
        """Plain-text dump: header ``m V T``, vertex lines ``x y flag``,
        then triangle lines ``i j k``."""
        lines = [f"{self.m} {self.n_vertices} {self.n_triangles}"]
        lines += [f"{x!r} {y!r} {int(f)}" for (x, y), f in zip(self.vertices.tolist(), self.boundary_mask)]
        lines += [f"{i} {j} {k}" for i, j, k in self.triangles.tolist()]
        return "\n".join(lines) + "\n"


def unit_square_mesh(m: int) -> TriangleMesh:
    if int(m) != m or m < 1:
        raise MeshError(f"subdivision m must be a positive integer, got {m!r}")
    m = int(m)
    n = m + 1
    grid = np.arange(n)
    ii, jj = np.meshgrid(grid, grid)  # jj varies slowest -> row-major
    vertices = np.column_stack([ii.ravel() / m, jj.ravel() / m])
    boundary = (ii == 0) | (ii == m) | (jj == 0) | (jj == m)

    ci, cj = np.meshgrid(np.arange(m), np.arange(m))
    v00 = (cj * n + ci).ravel()
    v10 = v00 + 1
    v01 = v00 + n
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    # interleave so the two halves of a cell are adjacent
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)
    return TriangleMesh(vertices, triangles.astype(np.int64), boundary.ravel(), m)


def uniform_refine(mesh: TriangleMesh) -> TriangleMesh:
    """Red refinement. For the structured family this is exactly the mesh
    with subdivision 2m, and coarse vertex coordinates are reproduced
    bit-for-bit (``2i/(2m)`` and ``i/m`` round to the same double)."""
    return unit_square_mesh(2 * mesh.m)


def mesh_size(mesh: TriangleMesh) -> float:
    return float(np.max(mesh.diameters()))


def free_nodes(mesh: TriangleMesh) -> np.ndarray:
    if mesh.n_free == 0:
        raise NoFreeNodesError(f"no free nodes on the m={mesh.m} mesh")
    return mesh._free


def coarse_to_fine_index(m_coarse: int, m_fine: int) -> np.ndarray:
    """Fine-lattice vertex index of every coarse vertex."""
    if m_fine % m_coarse:
        raise MeshError(f"m={m_fine} mesh is not a refinement of m={m_coarse}")
    r = m_fine // m_coarse
    g = np.arange(m_coarse + 1) * r
    ii, jj = np.meshgrid(g, g)
    return (jj * (m_fine + 1) + ii).ravel()
