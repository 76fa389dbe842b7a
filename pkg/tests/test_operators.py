"""Closed-form operator constructions against dense references."""

import numpy as np
import pytest

from qttbpx import TT, LevelOrder, asm, matmat, matvec, hadamard
from qttbpx import operators as op
from qttbpx import oracle as orc
from qttbpx.tt_linalg import norm2, unfolding_ranks


def lm(dense, D, L, row_free=(), col_free=()):
    """Permute a dimension-major dense array to level-major ordering."""
    dense = np.asarray(dense)
    rp = LevelOrder(D, L, row_free).dm_from_lm()
    if dense.ndim == 1:
        return dense[rp]
    cp = LevelOrder(D, L, col_free).dm_from_lm()
    return dense[np.ix_(rp, cp)]


def relerr(got, want):
    got, want = np.ravel(np.asarray(got)), np.ravel(np.asarray(want))
    return np.linalg.norm(got - want) / max(np.linalg.norm(want), 1e-300)


# ---------------------------------------------------------------------------
# one-dimensional factor chains
# ---------------------------------------------------------------------------

def test_identity_shift_corner_chains():
    for L in (1, 3, 6):
        i_tt, s_tt, j_tt = op.build_ISJ(L)
        eye, shift, corner = orc.dense_IS(L)
        assert relerr(asm(i_tt), eye) <= 1e-13
        assert relerr(asm(s_tt), shift) <= 1e-13
        assert relerr(asm(j_tt), corner) <= 1e-13


def test_interpolation_vectors():
    for L in (1, 4, 6):
        xi, eta = op.build_xi_eta(L)
        dxi, deta = orc.dense_xi_eta(L)
        assert relerr(asm(xi), dxi) <= 1e-13
        assert relerr(asm(eta), deta) <= 1e-13


@pytest.mark.parametrize("alpha", [0, 1])
def test_basis_evaluation_split_invariance(alpha):
    L = 6
    ref = asm(op.build_M(L, alpha, split=0))
    for split in range(1, L + 1):
        assert relerr(asm(op.build_M(L, alpha, split=split)), ref) == 0.0 \
            or relerr(asm(op.build_M(L, alpha, split=split)), ref) <= 1e-13
    assert relerr(ref, orc.dense_M(L, alpha)) <= 1e-12


def test_derivative_rows_embed_into_value_rows():
    # rows of the derivative-functional matrix are scaled odd-index rows
    # of the point-value matrix one level up
    for L in (3, 5):
        m0 = np.atleast_2d(asm(op.build_M(L, 0)))
        m1 = np.atleast_2d(asm(op.build_M(L, 1)))
        assert relerr(m1, 2.0 ** (L + 1) * m0[1::2]) <= 1e-12


def test_prolongation_composition():
    L = 6

    def dense_p(k, to):
        return np.asarray(asm(op.build_P(k, to))).reshape(2 ** to, 2 ** k)

    for k in (0, 2, 4):
        for mid in (k, 5):
            prod = dense_p(mid, L) @ dense_p(k, mid)
            assert relerr(prod, dense_p(k, L)) <= 1e-12


def test_prolongation_level_L_is_identity():
    L = 4
    assert relerr(asm(op.build_P(L, L)), np.eye(2 ** L)) == 0.0


@pytest.mark.parametrize("alpha", [0, 1])
def test_basis_times_prolongation(alpha):
    L = 6
    for ell in (0, 2, L):
        dense = orc.dense_M(L, alpha) @ orc.dense_P(ell, L)
        assert relerr(asm(op.build_MP(ell, L, alpha)), dense) <= 1e-12


def test_projector_chain_and_ranks():
    L = 5
    for ell in (0, 2, 5):
        dense = orc.dense_P(ell, L) @ orc.dense_P(ell, L).T
        rep = op.build_PPt(ell, L)
        assert relerr(asm(rep), dense) <= 1e-12
        assert all(r in (1, 4) for r in rep.ranks)


# ---------------------------------------------------------------------------
# assembled multilevel operators
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("D,L", [(1, 4), (1, 7), (2, 3)])
def test_preconditioner_matches_dense_sum(D, L):
    assert relerr(asm(op.build_C(L, D)), lm(orc.dense_C(L, D), D, L)) <= 1e-12


def test_preconditioner_rank_certificate():
    assert set(op.build_C(8, 1).ranks[1:-1]) == {8}
    assert set(op.build_C(4, 2).ranks[1:-1]) == {32}


@pytest.mark.parametrize("D,L", [(1, 4), (2, 3)])
def test_scaled_derivative_factor_matches_dense(D, L):
    perm_cols = LevelOrder(D, L).dm_from_lm()
    for k in range(D):
        alpha = tuple(1 if i == k else 0 for i in range(D))
        free = [i for i in range(D) if alpha[i] == 0]
        dense = orc.dense_Q(L, D, alpha)
        rows = LevelOrder(D, L, free).dm_from_lm()
        got = np.atleast_2d(asm(op.build_Q(L, D, alpha)))
        assert relerr(got, dense[np.ix_(rows, perm_cols)]) <= 1e-12


def test_scaled_derivative_rank_certificate():
    assert max(op.build_Q(8, 1, (1,)).ranks) == 6
    assert max(op.build_Q(8, 1, (0,)).ranks) == 8
    assert max(op.build_Q(5, 2, (1, 0)).ranks) == 16 + 8


@pytest.mark.parametrize("D,L", [(1, 5), (2, 3)])
def test_operator_factor_matches_dense(D, L):
    for k in range(D):
        got = asm(op.build_Theta(L, D, k))
        free = [i for i in range(D) if i != k]
        dense = lm(orc.dense_theta(L, D, k), D, L, row_free=free)
        assert relerr(got, dense) <= 1e-12


def test_operator_factor_rank_certificate():
    assert max(op.build_Theta(8, 1, 0).ranks) == 6
    theta = op.build_Theta(6, 2, 0)
    assert max(theta.ranks) == 24


@pytest.mark.parametrize("D,L", [(1, 4), (1, 6), (2, 3)])
def test_preconditioned_operator_matches_dense(D, L):
    dense_c = orc.dense_C(L, D)
    dense = dense_c @ orc.dense_stiffness(L, D) @ dense_c
    assert relerr(asm(op.build_B(L, D)), lm(dense, D, L)) <= 1e-12


def test_preconditioned_operator_rank_certificate_2d():
    assert max(op.build_B(5, 2).ranks) == 1152


def test_preconditioned_operator_symmetric():
    for D, L in ((1, 6), (2, 3)):
        dense = np.atleast_2d(asm(op.build_B(L, D)))
        assert relerr(dense, dense.T) <= 1e-12


@pytest.mark.parametrize("bc", ["mixed", "dirichlet"])
def test_direct_stiffness_matches_dense(bc):
    for L in (1, 2, 5):
        got = asm(op.build_A_direct(L, 1, bc=bc))
        if bc == "dirichlet":
            ref = orc.dense_D_L(L)
        else:
            ref = orc.dense_stiffness(L, 1)
        assert relerr(got, ref) <= 1e-12


def test_direct_stiffness_2d_matches_dense():
    L = 3
    got = asm(op.build_A_direct(L, 2))
    assert relerr(got, lm(orc.dense_stiffness(L, 2), 2, L)) <= 1e-12


def test_rhs_matches_dense_integrals():
    for D, L in ((1, 2), (1, 6), (2, 3)):
        got = np.ravel(asm(op.build_rhs(L, D)))
        assert relerr(got, lm(np.ravel(orc.dense_rhs(L, D)), D, L)) <= 1e-13


def test_spectral_uniformity_of_preconditioned_matrix():
    # extreme eigenvalues of the symmetrically preconditioned stiffness
    # stay within fixed bounds as the depth grows
    ratios = []
    for L in range(7, 11):
        dense = np.atleast_2d(asm(op.build_B(L, 1)))
        w = np.linalg.eigvalsh(dense)
        ratios.append(w[-1] / w[0])
    assert max(ratios) / min(ratios) <= 2.0


# ---------------------------------------------------------------------------
# structured vectors
# ---------------------------------------------------------------------------

def test_trig_vector_values():
    L, omega, phase = 6, 0.37, 1.1
    t = np.arange(2 ** L)
    assert relerr(asm(op.trig_vector(L, omega, phase, "cos")),
                  np.cos(omega * t + phase)) <= 1e-13
    assert relerr(asm(op.trig_vector(L, omega, phase, "sin")),
                  np.sin(omega * t + phase)) <= 1e-13


def test_poly_vector_values():
    L = 6
    coeffs = [0.5, -1.0, 2.0, 0.25]
    t = np.arange(2 ** L)
    want = sum(c * t ** k for k, c in enumerate(coeffs))
    rep = op.poly_vector(L, coeffs)
    assert relerr(asm(rep), want) <= 1e-13
    assert max(rep.ranks) <= len(coeffs)


def test_redundant_representation_is_all_ones():
    rep = op.redundant_ones(6, R=4.0)
    assert relerr(asm(rep), np.ones(64)) <= 1e-12


def test_diag_operator_matches_hadamard():
    rng = np.random.default_rng(3)
    v = TT([rng.standard_normal((1, 2, 1, 2))]
           + [rng.standard_normal((2, 2, 1, 2)) for _ in range(3)]
           + [rng.standard_normal((2, 2, 1, 1))])
    w = TT([rng.standard_normal((1, 2, 1, 3))]
           + [rng.standard_normal((3, 2, 1, 3)) for _ in range(3)]
           + [rng.standard_normal((3, 2, 1, 1))])
    got = np.ravel(asm(matvec(op.diag_operator(v), w)))
    assert relerr(got, np.ravel(asm(v)) * np.ravel(asm(w))) <= 1e-13


def test_oscillatory_coefficient_and_exact_solution():
    K, L = 4, 8
    mid = (np.arange(2 ** L) + 0.5) * 2.0 ** (-L)
    c = op.build_osc_coefficient(K, L)
    assert max(c.ranks) <= 3
    assert relerr(asm(c), 2.0 + np.cos(K * np.pi * mid)) <= 1e-12
    u_ex, v_ex = op.build_osc_exact(K, L)
    assert max(u_ex.ranks) <= 7 and max(v_ex.ranks) <= 6
    x = (np.arange(2 ** L) + 1.0) * 2.0 ** (-L)
    kp = K * np.pi
    want_u = (x * (2.0 - x) + ((1.0 - x) * np.sin(kp * x)
              + (1.0 - np.cos(kp * x)) / kp) / kp)
    # stored in the normalized nodal basis: values carry a 2**(-L/2) scale
    assert relerr(2.0 ** (L / 2) * np.ravel(asm(u_ex)), want_u) <= 1e-11
    v_want = (1.0 - mid) * (2.0 + np.cos(kp * mid))
    assert relerr(2.0 ** (L / 2) * np.ravel(asm(v_ex)), v_want) <= 1e-11


def test_oscillatory_parameter_validation():
    with pytest.raises(ValueError):
        op.build_osc_coefficient(6, 8)  # not a multiple of 4
    with pytest.raises(ValueError):
        op.build_osc_coefficient(2 ** 10, 8)  # exceeds grid resolution


def test_config_parsing():
    parsed = op.parse_config("tol = 1e-8\n# comment\nlevels=10;20\n")
    assert parsed == {"tol": 1e-08, "levels": "10;20"}
