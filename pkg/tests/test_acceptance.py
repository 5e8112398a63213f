"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected into RESULTS and repeated in the terminal
summary (see conftest.py), so they show up without ``-s``.
"""
import time

import numpy as np
import pytest

from l1control import fem, primal, studies
from l1control.config import ExperimentConfig, StudyBlock
from l1control.dual import (DualIterate, NewtonSubproblem, SolverConfig, dual_objective,
                            majorization_norm, sgs_step, sncg_step, solve, subtract)
from l1control.linalg import rayleigh_extremes
from l1control.mesh import unit_square_mesh
from l1control.oracle import baseline_dual_solve, fd_gradient_check, scalar_prox_gridsearch
from l1control.problem import default_problem, discretize
from l1control.prox import Box, prox_support_box

from conftest import MIXED

RESULTS = {}


def report(n, ok, detail):
    line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def prob16():
    return discretize(default_problem(), 16)


@pytest.fixture(scope="module")
def long_run(prob16):
    """10^4 sGS iterations from zero; the reference z*, Phi*, J*, u*."""
    return solve(prob16, SolverConfig(max_iters=10_000, stop_tol=1e-300))


@pytest.fixture(scope="module")
def default_run(prob16):
    us = []
    res = solve(prob16, SolverConfig(stop_tol=1e-6), callback=lambda k, z, ev: us.append(ev["u_hat"]))
    return res, np.array(us)


def test_criterion_01_element_matrices():
    ref = np.array([[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]])
    K_ref = 0.5 * np.array([[2, -1, -1], [-1, 1, 0], [-1, 0, 1]])
    err_k = np.max(np.abs(fem.element_stiffness(ref)[0] - K_ref))
    rng = np.random.default_rng(1)
    p = rng.random((200, 3, 2)) * 3 - 1
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    A = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    keep = A > 1e-3
    local = np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]) / 12.0
    err_m = np.max(np.abs(fem.element_mass(p[keep]) - A[keep, None, None] * local))
    # assembled local blocks: every triangle of a structured mesh has area 1/(2 m^2)
    mesh = unit_square_mesh(5)
    err_a = np.max(np.abs(fem.element_mass(mesh.vertices[mesh.triangles]) - local / 50.0))
    err = max(err_k, err_m, err_a)
    report(1, err <= 1e-14, f"max element-matrix error {err:.2e} (tol 1e-14)")


def test_criterion_02_gamma_bound():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst_lo = worst_hi = -np.inf
    for m in (4, 8, 16):
        mesh = unit_square_mesh(m)
        M = fem.assemble_mass(mesh)
        w = fem.assemble_lumped_mass(mesh).diag
        Z = rng.standard_normal((1000, M.shape[0]))
        zm = np.einsum("ij,ij->i", Z, (M @ Z.T).T)
        zw = np.einsum("ij,j,ij->i", Z, w, Z)
        worst_lo = max(worst_lo, np.max(zm - zw))
        worst_hi = max(worst_hi, np.max(zw - 4.0 * zm))
    dt = time.perf_counter() - t0
    ok = worst_lo <= 1e-12 and worst_hi <= 1e-12 and dt < 5
    report(2, ok, f"max(zM-zW) {worst_lo:.2e}, max(zW-4zM) {worst_hi:.2e}, {dt:.2f} s")


def test_criterion_03_l1_schemes():
    t0 = time.perf_counter()
    cfg = ExperimentConfig(study=StudyBlock(meshes=(8, 16, 32, 64)))
    res = studies.l1_schemes_study(cfg)
    # chain on further functions: random sign-changing and smooth fields
    rng = np.random.default_rng(3)
    chain = res.checks["norm_chain"]
    for m in (8, 16, 32, 64):
        mesh = unit_square_mesh(m)
        M, W = fem.assemble_mass(mesh), fem.assemble_lumped_mass(mesh)
        fields = [rng.standard_normal(mesh.n_free) for _ in range(5)]
        fields.append(fem.nodal_interpolate(lambda x1, x2: np.cos(3 * x1) - x2, mesh).coefficients)
        for c in fields:
            z = fem.GridFunction(mesh, c)
            q = fem.exact_l1_norm(fem.quasi_interpolate(z, M, W))
            mass, exact, lump = fem.l1_mass(z, M), fem.exact_l1_norm(z), fem.l1_lumped(z, W)
            tol = 1e-12 * max(1.0, lump)
            chain &= q <= mass + tol and mass <= exact + tol and exact <= lump + tol
    dt = time.perf_counter() - t0
    s1, s2 = res.meta["slope_lumped_exact"], res.meta["slope_exact_mass"]
    ok = chain and 0.8 <= s1 <= 1.5 and 1.7 <= s2 <= 2.5 and dt < 30
    gaps = ", ".join(f"{r[6]:.1e}" for r in res.rows)
    report(3, ok, f"chain {chain}; slope lumped-exact {s1:.3f} (gaps {gaps}), "
                  f"slope exact-mass {s2:.3f}; {dt:.1f} s")


def test_criterion_04_oracle_equivalence():
    t0 = time.perf_counter()
    du = dphi = 0.0
    for spec in (default_problem(), MIXED):
        prob = discretize(spec, 3)
        zb = baseline_dual_solve(prob, kkt_tol=1e-9)
        za = solve(prob, SolverConfig(stop_tol=1e-12, max_iters=20_000)).z
        ua = primal.recover_control(za, prob.alpha, prob.box)[1]
        ub = primal.recover_control(zb, prob.alpha, prob.box)[1]
        du = max(du, np.max(np.abs(ua - ub)))
        dphi = max(dphi, abs(dual_objective(prob, za) - dual_objective(prob, zb)))
    rng = np.random.default_rng(4)
    dprox = 0.0
    for _ in range(100):
        box = Box(-2 * rng.random(), 2 * rng.random())
        c, d = 3 * rng.normal(), rng.uniform(0.2, 5.0)
        fast = prox_support_box(np.array([c]), np.array([d]), box)[0]
        dprox = max(dprox, abs(fast - scalar_prox_gridsearch(c, d, box, 1e-5)))
    dt = time.perf_counter() - t0
    ok = du <= 1e-5 and dphi <= 1e-8 and dprox <= 1e-5 and dt < 180
    report(4, ok, f"max|u_a-u_b| {du:.2e}, |dPhi| {dphi:.2e}, prox vs grid {dprox:.2e}; {dt:.1f} s")


def test_criterion_05_dual_rate(prob16, long_run):
    z_star = long_run.z
    phi_star = min(h["Phi"] for h in long_run.history)
    tau1 = majorization_norm(prob16, subtract(DualIterate.zeros(prob16.n), z_star), "sgs")
    k = np.array([h["k"] for h in long_run.history])
    gap = np.array([h["Phi"] for h in long_run.history]) - phi_star
    excess = gap - 4 * tau1 / (k + 1) ** 2
    ok = k[0] == 1 and np.all(excess <= 1e-10)
    report(5, ok, f"tau1 {tau1:.3e}, max(Phi_k - Phi* - 4tau1/(k+1)^2) {np.max(excess):.2e} "
                  f"over {len(k)} iterations")


def test_criterion_06_primal_envelopes(prob16, long_run, default_run):
    res, us = default_run
    J = np.array([h["J"] for h in res.history])
    u_star = primal.recover_control(long_run.z, prob16.alpha, prob16.box)[1]
    J_star = primal.primal_objective(u_star, prob16, "mass")
    k = np.arange(1, len(J) + 1)
    d = J - J_star
    C1 = np.max((d * (1 + k))[:10])
    ex1 = np.max(d[10:] - C1 / (1 + k[10:]))
    diff = us - u_star
    e = np.sqrt(np.einsum("ki,ki->k", diff, (prob16.M @ diff.T).T))
    C2 = np.max((e * np.sqrt(k + 1))[:10])
    ex2 = np.max(e[10:] - C2 / np.sqrt(k[10:] + 1))
    ok = ex1 <= 1e-12 and ex2 <= 1e-12 and np.min(d) >= -1e-12
    report(6, ok, f"C1 {C1:.3e} (max excess {ex1:.2e}), C2 {C2:.3e} (max excess {ex2:.2e}), "
                  f"{len(k)} iterations")


def test_criterion_07_certification(prob16, default_run, long_run):
    res, _ = default_run
    ev = primal.evaluate_iterate(res.z, prob16)
    min_gap = min(h["gap"] for h in res.history + long_run.history)
    ok = res.converged and abs(ev["gap"]) <= 1e-6 and ev["kkt"] <= 1e-6 and min_gap >= -1e-9
    report(7, ok, f"|gap| {abs(ev['gap']):.2e}, kkt {ev['kkt']:.2e}, min gap over iterates {min_gap:.2e}")


def test_criterion_08_mesh_independence():
    t0 = time.perf_counter()
    cfg = ExperimentConfig(study=StudyBlock(meshes=(8, 16, 32, 64)))
    res = studies.mesh_independence_study(cfg)
    its = [r[2] for r in res.rows]
    dt = time.perf_counter() - t0
    ratio = res.meta["iteration_ratio"]
    ok = res.converged and ratio <= 2.0 and dt < 180
    report(8, ok, f"iterations {its}, ratio {ratio:.2f}; {dt:.1f} s")


def test_criterion_09_sparsity_threshold():
    cfg = ExperimentConfig()
    res = studies.sparsity_threshold_study(cfg)
    sup = {r[0]: r[2] for r in res.rows}
    max_u = {r[0]: r[3] for r in res.rows}
    viol = max(r[5] for r in res.rows)
    ok = res.converged and res.passed
    report(9, ok, f"beta0 {res.meta['beta0']:.4e}; support {sup}; max|u| at 1.05 beta0 {max_u[1.05]:.1e}; "
                  f"max |u_i| on |p_i|<beta {viol:.2e} (tol 1e-8)")


def test_criterion_10_control_order():
    t0 = time.perf_counter()
    res = studies.convergence_study(ExperimentConfig())
    dt = time.perf_counter() - t0
    errs = [r[2] for r in res.rows]
    dec = all(b < a for a, b in zip(errs, errs[1:]))
    slope = res.meta["fitted_order"]
    ok = res.converged and dec and slope >= 0.8 and dt < 300
    report(10, ok, f"errors {', '.join(f'{e:.3e}' for e in errs)} vs m={res.meta['reference_m']}, "
                   f"fitted order {slope:.3f}; {dt:.1f} s")


def test_criterion_11_sncg(prob16):
    a = solve(prob16, SolverConfig(stop_tol=1e-8))
    b = solve(prob16, SolverConfig(variant="sncg", stop_tol=1e-8))
    ua = primal.recover_control(a.z, prob16.alpha, prob16.box)[1]
    ub = primal.recover_control(b.z, prob16.alpha, prob16.box)[1]
    du = np.max(np.abs(ua - ub))
    info = {}
    sncg_step(prob16, DualIterate.zeros(prob16.n), SolverConfig(variant="sncg"), info)
    r = np.array(info["newton_residuals"])
    ratio = r[-1] / r[-2]
    # Danskin gradient of the reduced value function, sampled off kinks
    rng = np.random.default_rng(11)
    z = DualIterate.zeros(prob16.n)
    for _ in range(5):
        z = sgs_step(prob16, z)
    sub = NewtonSubproblem(prob16, z.lam_t, z.mu_t)
    fd, samples = 0.0, 0
    while samples < 5:
        p = z.p_t + 1e-3 * rng.standard_normal(prob16.n)
        margin = np.min(np.abs(np.abs(sub.q(p)) - prob16.beta))
        if margin < 1e-3 * prob16.beta:
            continue
        dirs = rng.standard_normal((10, prob16.n))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        h = min(1e-5, 0.1 * margin / np.max(np.abs(prob16.winv * (prob16.M @ dirs.T).T)))
        fd = max(fd, fd_gradient_check(sub.value, sub.gradient, p, h, dirs))
        samples += 1
    ok = a.converged and b.converged and du <= 1e-6 and ratio < 0.1 and fd <= 1e-5
    report(11, ok, f"max|u_sncg-u_sgs| {du:.2e}, final Newton ratio {ratio:.2e}, Danskin FD {fd:.2e}")


def test_criterion_12_spectral_scaling():
    ext = []
    for m in (8, 16, 32):
        ext.append(rayleigh_extremes(fem.assemble_mass(unit_square_mesh(m))))
    lo = [ext[i][0] / ext[i + 1][0] for i in range(2)]
    hi = [ext[i][1] / ext[i + 1][1] for i in range(2)]
    ok = all(3.5 <= r <= 4.5 for r in lo + hi)
    report(12, ok, f"lambda_min ratios {', '.join(f'{r:.3f}' for r in lo)}; "
                   f"lambda_max ratios {', '.join(f'{r:.3f}' for r in hi)}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
