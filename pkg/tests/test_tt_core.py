"""Core tensor-train calculus: assembly, products, and index maps."""

import numpy as np
import pytest

from qttbpx import (
    TT,
    LevelOrder,
    add,
    asm,
    asm_minus,
    asm_plus,
    dot,
    hadamard,
    kron_cores,
    matmat,
    matvec,
    scale,
    strong_kron,
    transpose,
)

rng = np.random.default_rng(7)


def random_tt(ncores, ranks, m=2, n=2):
    full = [1] + list(ranks) + [1]
    return TT([rng.standard_normal((full[i], m, n, full[i + 1]))
               for i in range(ncores)])


def test_boundary_ranks_validated():
    with pytest.raises(ValueError):
        TT([rng.standard_normal((2, 2, 1, 1))])


def test_ranks_and_modes():
    rep = random_tt(3, [4, 5], m=2, n=3)
    assert rep.ranks == [1, 4, 5, 1]
    assert rep.mode_rows == [2, 2, 2]
    assert rep.mode_cols == [3, 3, 3]
    assert rep.nrows == 8 and rep.ncols == 27


def test_asm_matches_explicit_contraction():
    rep = random_tt(3, [3, 2])
    ref = np.einsum("aijb,bklc,cmnd->ikmjln",
                    rep.cores[0], rep.cores[1], rep.cores[2])
    assert np.allclose(asm(rep), ref.reshape(8, 8))


def test_asm_partial_products_recompose():
    rep = random_tt(4, [2, 3, 2])
    left = asm_minus(rep.cores[:2])
    right = asm_plus(rep.cores[2:])
    full = np.einsum("aijb,bklc,cmnd,depf->ikjlmenp", *rep.cores)
    assert np.allclose(left @ right,
                       full.reshape(left.shape[0], right.shape[1]))


def test_strong_kron_is_block_product():
    a = rng.standard_normal((1, 2, 2, 3))
    b = rng.standard_normal((3, 2, 2, 1))
    prod = strong_kron(a, b)
    ref = np.einsum("aijb,bklc->ikjl", a, b).reshape(4, 4)
    assert np.allclose(asm(TT([prod])), ref)


def test_matvec_matches_dense():
    a = random_tt(3, [3, 4])
    v = random_tt(3, [2, 2], n=1)
    assert np.allclose(np.ravel(asm(matvec(a, v))),
                       asm(a) @ np.ravel(asm(v)))


def test_matmat_matches_dense():
    a = random_tt(3, [2, 3])
    b = random_tt(3, [3, 2])
    assert np.allclose(asm(matmat(a, b)), asm(a) @ asm(b))


def test_matvec_ranks_multiply():
    a = random_tt(3, [3, 4])
    v = random_tt(3, [2, 2], n=1)
    assert matvec(a, v).ranks == [1, 6, 8, 1]


def test_kron_cores_modes_and_ranks_multiply():
    a = rng.standard_normal((2, 2, 2, 3))
    b = rng.standard_normal((4, 2, 2, 5))
    assert kron_cores(a, b).shape == (8, 4, 4, 15)


def test_add_assembles_to_sum():
    x, y = random_tt(3, [2, 2]), random_tt(3, [3, 1])
    assert np.allclose(asm(add(x, y)), asm(x) + asm(y))
    assert add(x, y).ranks == [1, 5, 3, 1]


def test_scale_only_touches_first_core():
    x = random_tt(3, [2, 2])
    y = scale(x, -2.5)
    assert np.allclose(asm(y), -2.5 * asm(x))
    for c1, c2 in zip(x.cores[1:], y.cores[1:]):
        assert np.array_equal(c1, c2)


def test_transpose_matches_dense():
    a = random_tt(3, [2, 3])
    assert np.allclose(asm(transpose(a)), asm(a).T)


def test_hadamard_matches_dense():
    x, y = random_tt(3, [2, 2], n=1), random_tt(3, [2, 3], n=1)
    assert np.allclose(np.ravel(asm(hadamard(x, y))),
                       np.ravel(asm(x)) * np.ravel(asm(y)))


def test_dot_matches_dense():
    x, y = random_tt(4, [2, 3, 2], n=1), random_tt(4, [3, 2, 3], n=1)
    assert np.isclose(dot(x, y),
                      np.ravel(asm(x)) @ np.ravel(asm(y)))


def test_level_order_roundtrip_permutation():
    lo = LevelOrder(2, 3)
    perm = lo.dm_from_lm()
    assert sorted(perm) == list(range(64))


def test_level_order_1d_is_identity():
    assert np.array_equal(LevelOrder(1, 5).dm_from_lm(), np.arange(32))
