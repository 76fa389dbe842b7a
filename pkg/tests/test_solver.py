"""Soft-thresholding iteration: spectral estimation, convergence, traces."""

import numpy as np
import pytest

from qttbpx import TT, add, asm, matvec, norm2, scale
from qttbpx import operators as op
from qttbpx import solver as sv

rng = np.random.default_rng(31)


def random_vec(ncores, r, m=2):
    full = [1] + [r] * (ncores - 1) + [1]
    return TT([rng.standard_normal((full[i], m, 1, full[i + 1]))
               for i in range(ncores)])


def test_rounded_matvec_matches_dense():
    a = op.build_B(6, 1)
    v = random_vec(6, 3)
    got = np.ravel(asm(sv.matvec_rounded(a, v, 1e-12)))
    want = np.atleast_2d(asm(a)) @ np.ravel(asm(v))
    assert np.linalg.norm(got - want) <= 1e-10 * np.linalg.norm(want)


def test_symmetric_factor_applies_normal_product():
    L = 5
    theta = op.build_Theta(L, 1, 0)
    v = random_vec(L, 3)
    got = np.ravel(asm(sv.SymmetricFactor(theta).apply(v, 1e-13)))
    t = np.atleast_2d(asm(theta))
    want = t.T @ (t @ np.ravel(asm(v)))
    assert np.linalg.norm(got - want) <= 1e-9 * np.linalg.norm(want)


def test_symmetric_factor_with_middle_weights():
    L = 5
    q = op.build_Q(L, 1, (1,))
    lam = op.build_Lambda(L, 1, (1,))
    v = random_vec(L, 3)
    got = np.ravel(asm(sv.SymmetricFactor(q, middle=lam).apply(v, 1e-13)))
    qd = np.atleast_2d(asm(q))
    ld = np.atleast_2d(asm(lam))
    want = qd.T @ (ld @ (qd @ np.ravel(asm(v))))
    assert np.linalg.norm(got - want) <= 1e-9 * np.linalg.norm(want)


def test_step_estimate_matches_dense_spectrum():
    L = 6
    b = op.build_B(L, 1)
    w = np.linalg.eigvalsh(np.atleast_2d(asm(b)))
    omega, xi, bbar = sv.estimate_step(b, op.build_rhs(L, 1))
    assert abs(bbar - w[-1]) <= 0.02 * w[-1]
    assert abs(omega - 2.0 / (w[-1] + w[0])) <= 0.05 * omega
    ratio = (w[-1] - w[0]) / (w[-1] + w[0])
    assert ratio <= xi <= 1.10 * ratio


def test_solve_small_system_reaches_target():
    L = 8
    b = op.build_B(L, 1)
    c = op.build_C(L, 1)
    g = op.precondition_rhs(c, op.build_rhs(L, 1))
    cfg = sv.SolverConfig(target_residual=1e-10, max_iterations=2000)
    u, state = sv.stsolve(b, g, cfg)
    assert state.converged
    dense_res = (np.atleast_2d(asm(b)) @ np.ravel(asm(u))
                 - np.ravel(asm(g)))
    assert np.linalg.norm(dense_res) <= 1.1e-10
    # nodal values of the recovered solution match x - x^2/2
    x = (np.arange(2 ** L) + 1.0) * 2.0 ** (-L)
    nodal = 2.0 ** (L / 2) * (np.atleast_2d(asm(c)) @ np.ravel(asm(u)))
    assert np.linalg.norm(nodal - (x - x ** 2 / 2)) <= 1e-8


def test_factored_operator_equals_assembled_operator():
    L = 6
    g = op.precondition_rhs(op.build_C(L, 1), op.build_rhs(L, 1))
    cfg = sv.SolverConfig(target_residual=1e-9, max_iterations=2000)
    u1, s1 = sv.stsolve(op.build_B(L, 1), g, cfg)
    u2, s2 = sv.stsolve([op.build_Theta(L, 1, 0)], g, cfg)
    assert s1.converged and s2.converged
    diff = np.linalg.norm(np.ravel(asm(u1)) - np.ravel(asm(u2)))
    assert diff <= 1e-7


def test_zero_right_hand_side_returns_zero():
    L = 5
    g = scale(op.build_rhs(L, 1), 0.0)
    u, state = sv.stsolve(op.build_B(L, 1), g)
    assert state.converged and state.iterations == 0
    assert norm2(u) == 0.0


def test_rank_cap_is_respected():
    L = 8
    g = op.precondition_rhs(op.build_C(L, 1), op.build_rhs(L, 1))
    cfg = sv.SolverConfig(target_residual=1e-8, max_iterations=2000,
                          max_rank=6)
    u, state = sv.stsolve(op.build_B(L, 1), g, cfg)
    assert max(state.max_ranks) <= 6


def test_run_is_deterministic():
    L = 6
    g = op.precondition_rhs(op.build_C(L, 1), op.build_rhs(L, 1))
    runs = []
    for _ in range(2):
        cfg = sv.SolverConfig(target_residual=1e-8, max_iterations=2000,
                              seed=7)
        _, state = sv.stsolve(op.build_B(L, 1), g, cfg)
        runs.append((state.iterations, tuple(state.residuals),
                     tuple(state.alphas)))
    assert runs[0] == runs[1]


def test_trace_file_layout(tmp_path):
    L = 5
    g = op.precondition_rhs(op.build_C(L, 1), op.build_rhs(L, 1))
    cfg = sv.SolverConfig(target_residual=1e-6, max_iterations=2000)
    _, state = sv.stsolve(op.build_B(L, 1), g, cfg)
    out = tmp_path / "trace.csv"
    state.write_trace(out)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "iteration,residual,alpha,max_rank,wall_seconds"
    assert len(lines) == state.iterations + 1
    first = lines[1].split(",")
    assert int(first[0]) == 1
    assert float(first[1]) == state.residuals[0]


def test_diagonal_solve_computes_reciprocal():
    K, L = 4, 8
    recip = op.build_osc_coefficient(K, L)
    a = sv.solve_diagonal(recip, tol=1e-12)
    mid = (np.arange(2 ** L) + 0.5) * 2.0 ** (-L)
    want = 1.0 / (2.0 + np.cos(K * np.pi * mid))
    got = np.ravel(asm(a))
    assert np.linalg.norm(got - want) <= 1e-10 * np.linalg.norm(want)


def test_diagonal_solve_rejects_sign_changing_input():
    L = 6
    c = op.poly_vector(L, [-1.0, 2.0 ** (-L + 1)])  # crosses zero
    with pytest.raises(RuntimeError):
        sv.solve_diagonal(c, tol=1e-10, max_iterations=50)
