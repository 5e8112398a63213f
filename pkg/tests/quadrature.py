"""Degree-4 six-point triangle rule, used by tests as an independent L2 oracle."""
import numpy as np

_A, _B = 0.445948490915965, 0.091576213509771
BARY = np.array([[_A, _A, 1 - 2 * _A], [_A, 1 - 2 * _A, _A], [1 - 2 * _A, _A, _A],
                 [_B, _B, 1 - 2 * _B], [_B, 1 - 2 * _B, _B], [1 - 2 * _B, _B, _B]])
WEIGHTS = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3)


def l2_error(f, vertex_values, mesh):
    """||f - u_h||_{L2} with u_h given by its values at all vertices."""
    p = mesh.vertices[mesh.triangles]
    x = np.einsum("qk,tkd->tqd", BARY, p)
    uh = np.einsum("qk,tk->tq", BARY, vertex_values[mesh.triangles])
    fx = f(x[..., 0], x[..., 1])
    return float(np.sqrt(np.sum(mesh.areas()[:, None] * WEIGHTS * (fx - uh) ** 2)))


def slope(h, e):
    return float(np.polyfit(np.log(h), np.log(e), 1)[0])
