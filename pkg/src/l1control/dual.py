"""Accelerated block coordinate descent on the discretised dual problem.

Two variants share the mu-update and the momentum step:

* ``sgs``: the (lam, p) block is handled by a backward/forward Gauss-Seidel
  sweep, p-hat -> lam -> p, each an exact minimisation.
* ``sncg``: lam is eliminated in closed form and the remaining p-problem is
  solved by a semismooth Newton method with CG inner solves.

The dual objective (minimisation form) is

    Phi(lam, p, mu) = 1/2 ||K p - M yd||^2_{M^-1} + 1/(2 alpha) ||lam + mu - p||^2_M
                      + <M yr, p> + supp_[a,b](M mu) - 1/2 ||yd||^2_M

restricted to ``|lam| <= beta``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConvergenceError
from .linalg import cg_solve
from .prox import project_interval, prox_support_box, support_box_value, support_subdifferential_gap
from . import primal

log = logging.getLogger(__name__)


@dataclass
class DualIterate:
    lam: np.ndarray
    p: np.ndarray
    mu: np.ndarray
    lam_t: np.ndarray = None
    p_t: np.ndarray = None
    mu_t: np.ndarray = None
    t: float = 1.0
    k: int = 0

    def __post_init__(self):
        if self.lam_t is None:
            self.lam_t = self.lam.copy()
        if self.p_t is None:
            self.p_t = self.p.copy()
        if self.mu_t is None:
            self.mu_t = self.mu.copy()

    @classmethod
    def zeros(cls, n: int) -> "DualIterate":
        return cls(np.zeros(n), np.zeros(n), np.zeros(n))

    def blocks(self):
        return self.lam, self.p, self.mu

    def copy(self) -> "DualIterate":
        return DualIterate(self.lam.copy(), self.p.copy(), self.mu.copy(), self.lam_t.copy(),
                           self.p_t.copy(), self.mu_t.copy(), self.t, self.k)


@dataclass
class SolverConfig:
    variant: str = "sgs"
    max_iters: int = 5000
    stop_tol: float = 1e-6
    cg_tol: float = 1e-10
    inner_tol: float = 1e-12
    armijo: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 50
    max_newton: int = 30
    newton_rtol: float = 1e-10
    newton_atol: float = 1e-12
    newton_cg_tol: float = 1e-9
    switch_threshold: int | None = None
    certify_every: int = 0
    record_history: bool = True

    def __post_init__(self):
        if self.variant not in ("sgs", "sncg"):
            raise ValueError(f"variant must be 'sgs' or 'sncg', got {self.variant!r}")
        for name in ("stop_tol", "cg_tol", "inner_tol", "newton_rtol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


# ---------------------------------------------------------------- objective

def dual_objective(prob, z) -> float:
    """Phi_h(z); ``math.inf`` when some |lam_i| > beta."""
    lam, p, mu = z.lam, z.p, z.mu
    if np.any(np.abs(lam) > prob.beta * (1 + 1e-14)):
        return math.inf
    r = prob.K @ p - prob.Myd
    s = lam + mu - p
    M = prob.M
    return float(0.5 * r @ prob.solvers.solve_M(r) + 0.5 / prob.alpha * s @ (M @ s)
                 + prob.Myr @ p + support_box_value(M @ mu, prob.box) - 0.5 * prob.yd @ prob.Myd)


def smooth_dual_gradient(prob, lam, p, mu):
    """Gradient of the smooth part of Phi with respect to (lam, p, mu)."""
    M = prob.M
    Ms = M @ (lam + mu - p) / prob.alpha
    gp = prob.K @ prob.solvers.solve_M(prob.K @ p - prob.Myd) - Ms + prob.Myr
    return Ms, gp, Ms


# ---------------------------------------------------------------- block updates

def solve_p(prob, lam, mu):
    """argmin_p 1/2||Kp - M yd||^2_{M^-1} + 1/(2a)||p - lam - mu||^2_M + <M yr, p>,
    i.e. G p = alpha (K yd - M yr) + M (lam + mu)."""
    return prob.solvers.solve_G(prob.p_rhs + prob.M @ (lam + mu))


def lam_update(prob, p, lam_t, mu_t):
    """Minimiser of the lam-subproblem with the W - M proximal term."""
    return project_interval(lam_t + prob.winv * (prob.M @ (p - mu_t - lam_t)), prob.beta)


def mu_center(prob, p, lam, mu_t):
    g = prob.gamma
    return (prob.W.diag * ((p - lam) - mu_t)) / g + prob.M @ mu_t


def mu_weights(prob):
    return (prob.gamma / prob.alpha) * prob.winv


def mu_update(prob, p, lam, mu_t):
    """mu-subproblem solved in nu = M mu, where the gamma M W^{-1} M metric is diagonal."""
    nu = prox_support_box(mu_center(prob, p, lam, mu_t), mu_weights(prob), prob.box)
    return prob.solvers.solve_M(nu), nu


def _momentum(z_new, z_old, t):
    t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
    beta_k = (t - 1.0) / t_next
    z_new.lam_t = z_new.lam + beta_k * (z_new.lam - z_old.lam)
    z_new.p_t = z_new.p + beta_k * (z_new.p - z_old.p)
    z_new.mu_t = z_new.mu + beta_k * (z_new.mu - z_old.mu)
    z_new.t = t_next
    return z_new


def sgs_step(prob, z: DualIterate, info: dict | None = None) -> DualIterate:
    """One iteration of the sGS variant from the extrapolated point of ``z``."""
    p_hat = solve_p(prob, z.lam_t, z.mu_t)
    lam = lam_update(prob, p_hat, z.lam_t, z.mu_t)
    p = solve_p(prob, lam, z.mu_t)
    mu, nu = mu_update(prob, p, lam, z.mu_t)
    if info is not None:
        info.update(p_hat=p_hat, nu=nu)
    z_new = DualIterate(lam, p, mu, k=z.k + 1)
    return _momentum(z_new, z, z.t)


# ---------------------------------------------------------------- semismooth Newton

class NewtonSubproblem:
    """Reduced (lam, p)-subproblem of the SNCG variant.

    With ``lam(p) = Pi_[-beta,beta](lam_t + W^{-1} M (p - mu_t - lam_t))`` the
    value function is

        v(p) = 1/(2a) ||p - lam(p) - mu_t||^2_M + 1/(2a) ||lam(p) - lam_t||^2_{W-M}
               + 1/2 ||K p - M yd||^2_{M^-1} + <M yr, p>

    and by Danskin's theorem its gradient is
    ``F(p) = (1/a) M (p - lam(p) - mu_t) + K M^{-1} (K p - M yd) + M yr``.
    """

    def __init__(self, prob, lam_t, mu_t):
        self.prob = prob
        self.lam_t = lam_t
        self.mu_t = mu_t

    def q(self, p):
        prob = self.prob
        return self.lam_t + prob.winv * (prob.M @ (p - self.mu_t - self.lam_t))

    def lam(self, p):
        return project_interval(self.q(p), self.prob.beta)

    def value(self, p, lam=None):
        prob = self.prob
        M = prob.M
        if lam is None:
            lam = self.lam(p)
        s = p - lam - self.mu_t
        d = lam - self.lam_t
        r = prob.K @ p - prob.Myd
        return float(0.5 / prob.alpha * (s @ (M @ s) + d @ (prob.W.diag * d) - d @ (M @ d))
                     + 0.5 * r @ prob.solvers.solve_M(r) + prob.Myr @ p)

    def gradient(self, p, lam=None):
        prob = self.prob
        if lam is None:
            lam = self.lam(p)
        return (prob.M @ (p - lam - self.mu_t)) / prob.alpha \
            + prob.K @ prob.solvers.solve_M(prob.K @ p - prob.Myd) + prob.Myr

    def jacobian_operator(self, p):
        """Generalised Jacobian ``(1/a)(M - M Theta W^{-1} M) + K M^{-1} K``.

        Theta_i = 1 where the projection defining lam(p) is inactive; ties
        at |q_i| = beta count as active.
        """
        prob = self.prob
        theta = (np.abs(self.q(p)) < prob.beta).astype(float)
        M, K = prob.M, prob.K
        a = prob.alpha

        def apply(d):
            Md = M @ d
            return (Md - M @ (theta * prob.winv * Md)) / a + K @ prob.solvers.solve_M(K @ d)

        return apply, theta


def newton_solve(prob, lam_t, mu_t, p0, config: SolverConfig, info: dict | None = None):
    """Semismooth Newton-CG with Armijo backtracking on the reduced p-problem."""
    sub = NewtonSubproblem(prob, lam_t, mu_t)
    p = p0.copy()
    lam = sub.lam(p)
    F = sub.gradient(p, lam)
    v = sub.value(p, lam)
    r0 = np.linalg.norm(F)
    # floor for the residual: rounding in F is relative to the size of its terms
    M = prob.M
    scale = ((np.linalg.norm(M @ p) + np.linalg.norm(M @ lam) + np.linalg.norm(M @ mu_t)) / prob.alpha
             + np.linalg.norm(prob.K @ prob.solvers.solve_M(prob.K @ p)) + np.linalg.norm(prob.Myd)
             + np.linalg.norm(prob.Myr))
    target = max(config.newton_atol * scale, config.newton_rtol * r0)
    residuals = [r0]
    cg_total = 0
    # G / alpha is spectrally close to the Jacobian: use alpha G^{-1} as preconditioner
    prec = lambda r: prob.alpha * prob.solvers.solve_G(r)
    for _ in range(config.max_newton):
        if residuals[-1] <= target:
            break
        apply_V, _ = sub.jacobian_operator(p)
        d, it = cg_solve(apply_V, -F, tol=config.newton_cg_tol, precond=prec, maxit=500)
        cg_total += it
        slope = F @ d
        step = 1.0
        for _ in range(config.max_backtracks):
            p_try = p + step * d
            lam_try = sub.lam(p_try)
            v_try = sub.value(p_try, lam_try)
            if v_try <= v + config.armijo * step * slope:
                break
            # near the solution the decrease drowns in rounding of v; fall back
            # to a decrease of the residual norm
            if abs(v_try - v) <= 1e-13 * max(1.0, abs(v)):
                F_try = sub.gradient(p_try, lam_try)
                if np.linalg.norm(F_try) < residuals[-1]:
                    break
            step *= config.backtrack
        else:
            raise ConvergenceError("SNCG line search failed", iterations=len(residuals))
        p, lam, v = p_try, lam_try, v_try
        F = sub.gradient(p, lam)
        residuals.append(np.linalg.norm(F))
    else:
        if residuals[-1] > target:
            raise ConvergenceError(
                f"semismooth Newton did not converge in {config.max_newton} steps "
                f"(residual {residuals[-1]:.3e}, target {target:.3e})",
                iterations=config.max_newton, residual=residuals[-1])
    if info is not None:
        info.update(newton_residuals=residuals, newton_cg=cg_total)
    return p, lam


def sncg_step(prob, z: DualIterate, config: SolverConfig | None = None,
              info: dict | None = None) -> DualIterate:
    """One iteration of the SNCG variant from the extrapolated point of ``z``."""
    config = config or SolverConfig(variant="sncg")
    p, _ = newton_solve(prob, z.lam_t, z.mu_t, z.p_t, config, info)
    lam = lam_update(prob, p, z.lam_t, z.mu_t)
    mu, nu = mu_update(prob, p, lam, z.mu_t)
    if info is not None:
        info.update(nu=nu)
    z_new = DualIterate(lam, p, mu, k=z.k + 1)
    return _momentum(z_new, z, z.t)


# ---------------------------------------------------------------- majorization constants

def majorization_norm(prob, z, variant: str = "sgs") -> float:
    """1/2 ||z||^2_S with S the block-diagonal majorization of the variant.

    sgs:  (1/a) diag(M G^{-1} M + W - M, 0, gamma M W^{-1} M)
    sncg: (1/a) diag(W - M, 0, gamma M W^{-1} M)
    """
    lam, mu = z.lam, z.mu
    M = prob.M
    Ml = M @ lam
    lam_part = lam @ (prob.W.diag * lam) - lam @ Ml
    if variant == "sgs":
        lam_part += Ml @ prob.solvers.solve_G(Ml)
    elif variant != "sncg":
        raise ValueError(f"unknown variant {variant!r}")
    Mm = M @ mu
    mu_part = prob.gamma * Mm @ (prob.winv * Mm)
    return float(0.5 / prob.alpha * (lam_part + mu_part))


def subtract(z1, z2) -> DualIterate:
    return DualIterate(z1.lam - z2.lam, z1.p - z2.p, z1.mu - z2.mu)


# ---------------------------------------------------------------- outer loop

@dataclass
class SolveResult:
    z: DualIterate
    converged: bool
    iterations: int
    history: list = field(default_factory=list)
    best_phi: float = math.inf

    @property
    def final(self):
        return self.history[-1] if self.history else None


HISTORY_FIELDS = ("k", "Phi", "best_Phi", "kkt_res", "gap", "cg_inner_total")


def certify_step(prob, z_old, z_new, info, tol=1e-10):
    """Optimality certificates of the three block updates of one step."""
    M = prob.M
    # lam: projected fixed-point equation, exact
    p_used = info.get("p_hat", z_new.p)
    lam_chk = lam_update(prob, p_used, z_old.lam_t, z_old.mu_t)
    assert np.array_equal(lam_chk, z_new.lam), "lam-update fixed point violated"
    assert np.all(np.abs(z_new.lam) <= prob.beta), "lam left [-beta, beta]"
    # mu: scalar prox optimality in nu = M mu
    nu = info["nu"]
    c = mu_center(prob, z_new.p, z_new.lam, z_old.mu_t)
    d = mu_weights(prob)
    gap = support_subdifferential_gap(nu, d * (c - nu), prob.box)
    assert np.max(gap, initial=0.0) <= tol * max(1.0, np.max(np.abs(d * c))), "mu prox certificate failed"
    # p: G-system residual
    if "p_hat" in info:
        rhs = prob.p_rhs + M @ (z_new.lam + z_old.mu_t)
        res = np.linalg.norm(prob.solvers.apply_G(z_new.p) - rhs)
        assert res <= max(1e-8, 1e3 * prob.cg_tol) * max(np.linalg.norm(rhs), 1e-300), \
            f"p-solve residual {res:.2e} too large"


def solve(prob, config: SolverConfig | None = None, z0: DualIterate | None = None,
          callback=None) -> SolveResult:
    """Iterate until both the KKT residual and |gap| drop below ``stop_tol``,
    or ``max_iters`` is reached.

    On exhaustion the best iterate (smallest KKT residual) is returned with
    ``converged=False``.
    """
    config = config or SolverConfig()
    z = z0.copy() if z0 is not None else DualIterate.zeros(prob.n)
    if np.any(np.abs(z.lam) > prob.beta):
        raise ValueError("initial lam must lie in [-beta, beta]")
    z.t, z.k = 1.0, 0
    variant = config.variant
    history = []
    best_phi = math.inf
    best = (math.inf, z)
    start_cg = prob.solvers.cg_iterations
    newton_cg = 0
    for k in range(1, config.max_iters + 1):
        if config.switch_threshold is not None and k > config.switch_threshold:
            variant = "sncg"
        info = {}
        z_old = z
        if variant == "sgs":
            z = sgs_step(prob, z_old, info)
        else:
            z = sncg_step(prob, z_old, config, info)
        if config.certify_every and k % config.certify_every == 0:
            certify_step(prob, z_old, z, info)
        newton_cg += info.get("newton_cg", 0)
        ev = primal.evaluate_iterate(z, prob)
        best_phi = min(best_phi, ev["Phi"])
        if ev["kkt"] < best[0]:
            best = (ev["kkt"], z)
        if config.record_history:
            history.append({
                "k": k, "Phi": ev["Phi"], "best_Phi": best_phi, "kkt_res": ev["kkt"],
                "gap": ev["gap"], "J": ev["J"],
                "cg_inner_total": prob.solvers.cg_iterations - start_cg + newton_cg,
                "variant": variant,
                "newton_residuals": info.get("newton_residuals"),
            })
        if callback is not None:
            callback(k, z, ev)
        if ev["kkt"] <= config.stop_tol and abs(ev["gap"]) <= config.stop_tol:
            return SolveResult(z, True, k, history, best_phi)
    log.warning("dual solver stopped after %d iterations (best KKT %.3e)", config.max_iters, best[0])
    return SolveResult(best[1], False, config.max_iters, history, best_phi)
