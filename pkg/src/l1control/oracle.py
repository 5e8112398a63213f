"""Slow reference computations used to validate the fast paths.

Nothing in here is used by the solvers themselves. Everything works on
dense arrays and is meant for tiny meshes.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ConvergenceError
from .fem import GridFunction
from .prox import Box, support_box_value


@dataclass
class OracleReport:
    quantity: str
    fast: float
    oracle: float
    abs_err: float
    rel_err: float
    tol: float
    passed: bool

    @classmethod
    def compare(cls, quantity, fast, oracle, tol, relative=False):
        fast, oracle = float(fast), float(oracle)
        abs_err = abs(fast - oracle)
        rel_err = abs_err / max(abs(oracle), 1e-300)
        err = rel_err if relative else abs_err
        return cls(quantity, fast, oracle, abs_err, rel_err, tol, bool(err <= tol))


def append_audit(path, reports) -> None:
    path = Path(path)
    new = not path.exists()
    with path.open("a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(OracleReport.__dataclass_fields__))
        if new:
            w.writeheader()
        for r in reports:
            w.writerow(asdict(r))


# ---------------------------------------------------------------- L1 quadrature

def adaptive_l1_quadrature(u: GridFunction, tol: float = 1e-12, max_depth: int = 40) -> float:
    """int |u_h| by recursive 4-way subdivision and the centroid rule.

    Only sub-triangles on which ``u_h`` changes sign are refined; elsewhere
    the centroid rule is exact for the linear function.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    mesh = u.mesh
    vals = u.nodal_values()[mesh.triangles]
    area = mesh.areas()
    settled = 0.0
    active_v, active_a = vals, area
    prev = None
    for depth in range(max_depth + 1):
        lo, hi = active_v.min(axis=1), active_v.max(axis=1)
        crossing = (lo < 0) & (hi > 0)
        settled += float(np.sum(active_a[~crossing] * np.abs(active_v[~crossing].mean(axis=1))))
        active_v, active_a = active_v[crossing], active_a[crossing]
        est = settled + float(np.sum(active_a * np.abs(active_v.mean(axis=1))))
        if active_v.shape[0] == 0:
            return est
        if prev is not None and abs(est - prev) < tol:
            return est
        prev = est
        a, b, c = active_v[:, 0], active_v[:, 1], active_v[:, 2]
        ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
        active_v = np.concatenate([
            np.column_stack([a, ab, ca]), np.column_stack([ab, b, bc]),
            np.column_stack([ca, bc, c]), np.column_stack([ab, bc, ca]),
        ])
        active_a = np.tile(active_a / 4.0, 4)
    raise ConvergenceError(f"adaptive L1 quadrature hit the depth cap of {max_depth}")


# ---------------------------------------------------------------- prox

def scalar_prox_gridsearch(c: float, d: float, box: Box, grid_step: float = 1e-5) -> float:
    """argmin over a grid of supp_[a,b](nu) + (d/2)(nu - c)^2."""
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")
    half = 5.0 * (abs(c) + 1.0)
    nu = np.arange(c - half, c + half + grid_step / 2, grid_step)
    obj = box.b * np.maximum(nu, 0.0) + box.a * np.minimum(nu, 0.0) + 0.5 * d * (nu - c) ** 2
    # include the kink exactly when it lies in range
    best = nu[np.argmin(obj)]
    if c - half <= 0.0 <= c + half and 0.5 * d * c * c <= obj.min():
        best = 0.0
    return float(best)


# ---------------------------------------------------------------- dense QP helpers

def projected_gradient(grad, x0, step, lo=None, hi=None, iters=10_000, tol=0.0):
    """Projected gradient with constant step; stops early once the update
    stalls below ``tol`` (max norm)."""
    x = np.array(x0, dtype=float)
    for _ in range(iters):
        x_new = x - step * grad(x)
        if lo is not None:
            x_new = np.clip(x_new, lo, hi)
        if np.max(np.abs(x_new - x), initial=0.0) <= tol:
            return x_new
        x = x_new
    return x


def _dense(prob):
    K = prob.K.toarray()
    M = prob.M.toarray()
    W = np.diag(prob.W.diag)
    Minv = np.linalg.inv(M)
    return K, M, W, Minv


def dense_dual_objective(prob, lam, p, mu) -> float:
    K, M, _, Minv = _dense(prob)
    if np.any(np.abs(lam) > prob.beta * (1 + 1e-12)):
        return math.inf
    r = K @ p - M @ prob.yd
    s = lam + mu - p
    return float(0.5 * r @ Minv @ r + 0.5 / prob.alpha * s @ M @ s + (M @ prob.yr) @ p
                 + support_box_value(M @ mu, prob.box) - 0.5 * prob.yd @ M @ prob.yd)


def _quad_p_min(K, M, Minv, prob, center, iters, tol):
    """argmin_p 1/2||Kp - M yd||^2_{M^-1} + 1/(2a)||p - center||^2_M + <M yr, p>."""
    H = K @ Minv @ K + M / prob.alpha
    g0 = K @ prob.yd - M @ prob.yr + M @ center / prob.alpha
    L = np.linalg.eigvalsh(H)[-1]
    return projected_gradient(lambda x: H @ x - g0, center, 1.0 / L, iters=iters, tol=tol)


def _box_quadratic_mu(M, H, g, box, iters, tol):
    """argmin_mu supp(M mu) + 1/2 mu^T H mu - g^T mu via its box-constrained dual
    max_{w in [a,b]} -1/2 (g - M w)^T H^{-1} (g - M w), mu = H^{-1}(g - M w*)."""
    Hinv = np.linalg.inv(H)
    Q = M @ Hinv @ M
    L = np.linalg.eigvalsh(Q)[-1]
    w = projected_gradient(lambda w: Q @ w - M @ Hinv @ g, np.zeros(M.shape[0]), 1.0 / L,
                           box.a, box.b, iters=iters, tol=tol)
    return Hinv @ (g - M @ w)


def literal_sgs_step(prob, lam_t, p_t, mu_t, iters=100_000, tol=1e-16):
    """One sGS iteration with every subproblem solved by (projected) gradient
    descent on the subproblem exactly as stated, in dense arithmetic."""
    K, M, W, Minv = _dense(prob)
    a = prob.alpha
    p_hat = _quad_p_min(K, M, Minv, prob, lam_t + mu_t, iters, tol)
    # lam: (1/2a)||lam - (p_hat - mu_t)||^2_M + (1/2a)||lam - lam_t||^2_{W-M} on the box
    H = W / a
    g = (M @ (p_hat - mu_t) + (W - M) @ lam_t) / a
    L = np.max(np.diag(H))
    lam = projected_gradient(lambda x: H @ x - g, lam_t, 1.0 / L, -prob.beta, prob.beta, iters, tol)
    p = _quad_p_min(K, M, Minv, prob, lam + mu_t, iters, tol)
    # mu: supp(M mu) + (1/2a)||mu - (p - lam)||^2_M + (1/2a)||mu - mu_t||^2_{gamma M W^-1 M - M}
    T = prob.gamma * M @ np.linalg.inv(W) @ M - M
    Hm = (M + T) / a
    gm = (M @ (p - lam) + T @ mu_t) / a
    mu = _box_quadratic_mu(M, Hm, gm, prob.box, iters, tol)
    return lam, p, mu


def baseline_dual_solve(prob, iters: int = 2000, inner: int = 10_000, kkt_tol: float = 1e-6,
                        inner_tol: float = 1e-15):
    """Cyclic exact block minimisation of Phi over (lam, p, mu), no majorization
    and no momentum. Each block is solved by (projected) gradient descent.

    Only meant for N_h <= 25. Returns a ``DualIterate``; raises
    ``ConvergenceError`` when the KKT residual target is not met.
    """
    from .dual import DualIterate
    from . import primal

    if prob.n > 25:
        raise ValueError(f"baseline solver is limited to N_h <= 25, got {prob.n}")
    K, M, _, Minv = _dense(prob)
    a = prob.alpha
    n = prob.n
    lam, p, mu = np.zeros(n), np.zeros(n), np.zeros(n)
    LM = np.linalg.eigvalsh(M)[-1] / a
    Hm = M / a
    for sweep in range(1, iters + 1):
        # lam-block: box-constrained quadratic
        c = p - mu
        lam = projected_gradient(lambda x: M @ (x - c) / a, lam, 1.0 / LM, -prob.beta, prob.beta,
                                 inner, inner_tol)
        p = _quad_p_min(K, M, Minv, prob, lam + mu, inner, inner_tol)
        mu = _box_quadratic_mu(M, Hm, M @ (p - lam) / a, prob.box, inner, inner_tol)
        z = DualIterate(lam, p, mu)
        if sweep % 10 == 0:
            ev = primal.evaluate_iterate(z, prob)
            if ev["kkt"] <= kkt_tol:
                return z
    ev = primal.evaluate_iterate(z, prob)
    if ev["kkt"] <= kkt_tol:
        return z
    raise ConvergenceError(f"baseline solver stopped at KKT residual {ev['kkt']:.3e}",
                           iterations=iters, residual=ev["kkt"])


# ---------------------------------------------------------------- finite differences

def fd_gradient_check(functional, gradient, point, h_fd: float = 1e-5, directions=None) -> float:
    """Max relative error between central differences and ``gradient(point)``.

    With ``directions=None`` every coordinate direction is probed.
    """
    x = np.asarray(point, dtype=float)
    g = np.asarray(gradient(x), dtype=float)
    if directions is None:
        directions = np.eye(x.size)
    fd = np.array([(functional(x + h_fd * e) - functional(x - h_fd * e)) / (2 * h_fd) for e in directions])
    an = np.asarray(directions) @ g
    return float(np.max(np.abs(fd - an)) / max(np.max(np.abs(an)), 1e-300))
