"""Robust-residual LMI builders: analytic value, soundness, tightness.

The builders certify  max over ||e|| <= delta of ||psi(h_hat + e)||^2 <= tau
with a multiplier lambda. Tests check the certified minimal tau against a
sampled maximum (soundness and losslessness) and against an independent
bisection-over-tau / golden-section-over-lambda eigenvalue oracle that
never touches the conic solver.
"""

import numpy as np
import pytest

from rsprecoder.conic import ConicProblem, solve
from rsprecoder.lmi import (
    ComplexVar,
    add_complex_var,
    build_common_lmi,
    build_power_constraint,
    build_private_lmi,
    build_scalar_square_epigraph,
)


def sampled_max_residual(h_hat, delta, M, g, target, n, rng):
    """Sampled maximum of ||g h^H M - target^T||^2 over the ball.

    The residual column vector is c + B e with c = (g h_hat^H M - t^T)^H
    and B = conj(g) M^H, so the squared norm is convex in e and the
    maximum sits on the boundary. Boundary samples seed a fixed-point
    ascent e <- delta * unit(B^H (c + B e)), which climbs the convex
    objective along the sphere to the maximizer.
    """
    Nt = h_hat.shape[0]
    c = (g * (h_hat.conj() @ M) - target).conj()
    B = np.conj(g) * M.conj().T  # maps e to the residual perturbation

    def value(e):
        return float(np.sum(np.abs(c + B @ e) ** 2))

    best_e = np.zeros(Nt, complex)
    best = value(best_e)
    for _ in range(n):
        e = rng.standard_normal(Nt) + 1j * rng.standard_normal(Nt)
        e *= delta / np.linalg.norm(e)
        if value(e) > best:
            best, best_e = value(e), e
    if delta > 0:
        e = best_e if np.linalg.norm(best_e) > 0 else delta * np.ones(Nt) / np.sqrt(Nt)
        for _ in range(200):
            grad = B.conj().T @ (c + B @ e)
            nrm = np.linalg.norm(grad)
            if nrm == 0:
                break
            e = delta * grad / nrm
        best = max(best, value(e))
    return best


def certified_min_tau(h_hat, delta, M, g, k=None):
    """Minimal certified tau via the SDP (k=None means the common stream)."""
    problem = ConicProblem()
    tau = problem.add_var("tau")[0]
    lam = problem.add_var("lam")[0]
    if k is None:
        build_common_lmi(problem, h_hat, delta, M, g, tau, lam)
    else:
        build_private_lmi(problem, h_hat, delta, M, g, k, tau, lam)
    problem.set_objective([(tau, 1.0)], sense="min")
    sol = solve(problem)
    assert sol.status == "Optimal"
    return float(sol.objective), sol


def oracle_min_tau(h_hat, delta, M, g, k, tau_hi=None, tol=1e-7):
    """Solver-free reference: bisect tau; for each tau maximize the minimum
    eigenvalue over lambda by golden-section (the minimum eigenvalue of an
    affine matrix pencil is concave in lambda)."""
    Nt = h_hat.shape[0]
    ncols = M.shape[1]
    target = np.zeros(ncols, complex)
    target[k] = 1.0
    psi = (g * (h_hat.conj() @ M) - target).conj()

    def block(tau, lam):
        dim = 1 + ncols + Nt
        out = np.zeros((dim, dim), complex)
        out[0, 0] = tau - lam
        out[0, 1:1 + ncols] = psi.conj()
        out[1:1 + ncols, 0] = psi
        out[1:1 + ncols, 1:1 + ncols] = np.eye(ncols)
        cross = -delta * g * M
        out[1 + ncols:, 1:1 + ncols] = cross
        out[1:1 + ncols, 1 + ncols:] = cross.conj().T
        out[1 + ncols:, 1 + ncols:] = lam * np.eye(Nt)
        return out

    def best_mineig(tau):
        lo, hi = 0.0, tau + (delta * abs(g) * np.linalg.norm(M, 2)) ** 2 + 1.0
        phi = (np.sqrt(5.0) - 1.0) / 2.0
        a, b = lo, hi
        c, d = b - phi * (b - a), a + phi * (b - a)
        fc = np.linalg.eigvalsh(block(tau, c))[0]
        fd = np.linalg.eigvalsh(block(tau, d))[0]
        for _ in range(80):
            if fc > fd:
                b, d, fd = d, c, fc
                c = b - phi * (b - a)
                fc = np.linalg.eigvalsh(block(tau, c))[0]
            else:
                a, c, fc = c, d, fd
                d = a + phi * (b - a)
                fd = np.linalg.eigvalsh(block(tau, d))[0]
        return max(fc, fd)

    lo = 0.0
    hi = tau_hi if tau_hi is not None else (
        (np.linalg.norm(psi) + delta * abs(g) * np.linalg.norm(M, 2)) ** 2 + 1.0)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if best_mineig(mid) >= -tol:
            hi = mid
        else:
            lo = mid
    return hi


def random_instance(rng, Nt, K):
    h_hat = (rng.standard_normal(Nt) + 1j * rng.standard_normal(Nt)) / np.sqrt(2)
    M = rng.standard_normal((Nt, K)) + 1j * rng.standard_normal((Nt, K))
    g = complex(rng.standard_normal() + 1j * rng.standard_normal()) * 0.5
    delta = float(rng.uniform(0.02, 0.3))
    return h_hat, delta, M, g


def test_analytic_minimal_tau():
    """h_hat = e_1, identity precoders, g = 1/2, own-stream target: the
    worst residual is (1/2 - 1 shifted by the radius) and the certified
    minimum is (0.5 + 0.05)^2 = 0.3025."""
    h_hat = np.array([1.0, 0.0], complex)
    tau, _ = certified_min_tau(h_hat, 0.1, np.eye(2, dtype=complex), 0.5, k=0)
    assert tau == pytest.approx(0.3025, abs=1e-6)


def test_private_lmi_sound_and_tight():
    rng = np.random.default_rng(0)
    for trial in range(8):
        Nt = int(rng.integers(2, 4))
        h_hat, delta, M, g = random_instance(rng, Nt, Nt)
        k = int(rng.integers(Nt))
        target = np.zeros(Nt, complex)
        target[k] = 1.0
        tau, _ = certified_min_tau(h_hat, delta, M, g, k=k)
        sampled = sampled_max_residual(h_hat, delta, M, g, target, 2000, rng)
        assert tau >= sampled - 1e-7   # sound: certifies every sampled channel
        assert tau <= sampled + 1e-3   # tight: the S-procedure is lossless here


def test_common_lmi_sound_and_tight():
    rng = np.random.default_rng(1)
    for trial in range(5):
        Nt = int(rng.integers(2, 4))
        h_hat, delta, M, g = random_instance(rng, Nt, Nt + 1)
        target = np.zeros(Nt + 1, complex)
        target[0] = 1.0
        tau, _ = certified_min_tau(h_hat, delta, M, g, k=None)
        sampled = sampled_max_residual(h_hat, delta, M, g, target, 2000, rng)
        assert tau >= sampled - 1e-7
        assert tau <= sampled + 1e-3


def test_sdp_matches_eigenvalue_oracle():
    rng = np.random.default_rng(2)
    for trial in range(5):
        h_hat, delta, M, g = random_instance(rng, 2, 2)
        k = int(rng.integers(2))
        tau_sdp, _ = certified_min_tau(h_hat, delta, M, g, k=k)
        tau_ref = oracle_min_tau(h_hat, delta, M, g, k)
        assert tau_sdp == pytest.approx(tau_ref, abs=1e-4)


def test_zero_radius_reduces_to_plain_residual():
    rng = np.random.default_rng(3)
    h_hat, _, M, g = random_instance(rng, 3, 3)
    target = np.zeros(3, complex)
    target[1] = 1.0
    tau, _ = certified_min_tau(h_hat, 0.0, M, g, k=1)
    exact = float(np.sum(np.abs(g * (h_hat.conj() @ M) - target) ** 2))
    assert tau == pytest.approx(exact, abs=1e-7)


def test_bilinearity_guard():
    problem = ConicProblem()
    P = add_complex_var(problem, "P", (2, 2))
    g = add_complex_var(problem, "g")
    tau = problem.add_var("tau")[0]
    lam = problem.add_var("lam")[0]
    with pytest.raises(ValueError):
        build_private_lmi(problem, np.ones(2), 0.1, P, g, 0, tau, lam)


def test_variable_equalizer_matches_fixed_precoder_optimum():
    """With the precoder fixed, optimizing g through the LMI must do at
    least as well as any fixed equalizer."""
    rng = np.random.default_rng(4)
    h_hat, delta, M, g_fixed = random_instance(rng, 2, 2)
    problem = ConicProblem()
    g = add_complex_var(problem, "g")
    tau = problem.add_var("tau")[0]
    lam = problem.add_var("lam")[0]
    build_private_lmi(problem, h_hat, delta, M, g, 0, tau, lam)
    problem.set_objective([(tau, 1.0)], sense="min")
    sol = solve(problem)
    assert sol.status == "Optimal"
    tau_fixed, _ = certified_min_tau(h_hat, delta, M, g_fixed, k=0)
    assert sol.objective <= tau_fixed + 1e-6


def test_variable_precoder_matches_fixed_equalizer_optimum():
    rng = np.random.default_rng(5)
    h_hat = (rng.standard_normal(2) + 1j * rng.standard_normal(2)) / np.sqrt(2)
    problem = ConicProblem()
    P = add_complex_var(problem, "P", (2, 2))
    tau = problem.add_var("tau")[0]
    lam = problem.add_var("lam")[0]
    build_private_lmi(problem, h_hat, 0.05, P, 0.5 + 0.0j, 0, tau, lam)
    build_power_constraint(problem, P, budget=4.0)
    problem.set_objective([(tau, 1.0)], sense="min")
    sol = solve(problem)
    assert sol.status == "Optimal"
    # sanity: the optimized precoder beats the identity under the same g
    tau_eye, _ = certified_min_tau(h_hat, 0.05, np.eye(2, dtype=complex), 0.5, k=0)
    assert sol.objective <= tau_eye + 1e-6
    P_opt = P.value(sol.x)
    assert float(np.sum(np.abs(P_opt) ** 2)) <= 4.0 + 1e-6


def test_scalar_square_epigraph():
    problem = ConicProblem()
    g = add_complex_var(problem, "g")
    s = problem.add_var("s")[0]
    problem.add_eq([(int(g.re), 1.0)], 0.6)
    problem.add_eq([(int(g.im), 1.0)], -0.8)
    build_scalar_square_epigraph(problem, g, s)
    problem.set_objective([(s, 1.0)], sense="min")
    sol = solve(problem)
    assert sol.objective == pytest.approx(1.0, abs=1e-6)  # |0.6 - 0.8i|^2


def test_power_constraint_budget_and_epigraph_forms():
    # budget form: fix the entries, check feasibility is exactly the ball
    problem = ConicProblem()
    P = add_complex_var(problem, "P", (2, 1))
    for idx, val in zip(P.indices, [1.0, 1.0, 1.0, 0.0]):
        problem.add_eq([(int(idx), 1.0)], val)
    build_power_constraint(problem, P, budget=3.0)
    problem.set_objective([(int(P.indices[0]), 1.0)], sense="min")
    assert solve(problem).status == "Optimal"  # ||P||^2 = 3 <= 3

    # epigraph form: minimal t is the Frobenius norm
    problem = ConicProblem()
    P = add_complex_var(problem, "P", (2, 1))
    t = problem.add_var("t")[0]
    for idx, val in zip(P.indices, [3.0, 0.0, 0.0, 4.0]):
        problem.add_eq([(int(idx), 1.0)], val)
    build_power_constraint(problem, P, t_idx=t)
    problem.set_objective([(t, 1.0)], sense="min")
    sol = solve(problem)
    assert sol.objective == pytest.approx(5.0, abs=1e-6)

    with pytest.raises(ValueError):
        build_power_constraint(ConicProblem(), P)


def test_complex_var_round_trip():
    problem = ConicProblem()
    v = add_complex_var(problem, "v", (2, 2))
    x = np.arange(problem.n_vars, dtype=float)
    val = v.value(x)
    assert val.shape == (2, 2)
    assert val[0, 0] == complex(x[v.re[0, 0]], x[v.im[0, 0]])
    s = add_complex_var(problem, "s")
    assert s.shape == ()
    x = np.arange(problem.n_vars, dtype=float)
    assert isinstance(s.value(x), complex)
    assert len(v.indices) == 8
