"""Dense brute-force reference constructions.

Everything here evaluates the defining formulas of the multilevel finite
element hierarchy literally, in *dimension-major* index ordering, with no
tensor-train machinery involved.  These references validate the structured
constructions at small depth; the index bijections in
:class:`~qttbpx.tt_core.LevelOrder` translate between the orderings.

All matrices act on coefficient vectors of hat-function bases normalized
to nodal value ``2**(l/2)``, on ``(0, 1)**D`` with a homogeneous Dirichlet
condition on the faces touching the origin and natural conditions on the
remaining faces (except where noted for the both-ends-Dirichlet variants).
"""

from __future__ import annotations

import numpy as np

from .tt_core import TT, asm, asm_minus, asm_plus


# ---------------------------------------------------------------------------
# elementary dense building blocks
# ---------------------------------------------------------------------------

def dense_IS(ell):
    """Identity, one-subdiagonal shift, and corner matrices of size 2**ell."""
    n = 2 ** ell
    eye = np.eye(n)
    shift = np.eye(n, k=-1)
    corner = np.zeros((n, n))
    corner[0, n - 1] = 1.0
    return eye, shift, corner

def dense_xi_eta(k):
    """All-ones and normalized ramp vectors of length 2**k."""
    n = 2 ** k
    xi = np.ones(n)
    eta = np.arange(1, n + 1) / n
    return xi, eta

def dense_M(ell, alpha):
    """Cell average/difference extraction matrices on level ``ell``.

    For ``alpha = 0`` the rows are indexed by (cell, component) with the
    component bit minor: component 0 carries scaled sums of adjacent nodal
    values, component 1 scaled differences.  For ``alpha = 1`` only the
    scaled differences remain.
    """
    eye, shift, _ = dense_IS(ell)
    if alpha == 0:
        e0 = np.array([[1.0], [0.0]])
        e1 = np.array([[0.0], [1.0]])
        return 2.0 ** (ell / 2 - 1) * (np.kron(eye + shift, e0)
                                       + np.kron(eye - shift, e1))
    if alpha == 1:
        return 2.0 ** (3 * ell / 2) * (eye - shift)
    raise ValueError("alpha must be 0 or 1")

def dense_P(ell, L):
    """Prolongation from level ``ell`` to level ``L`` (1-D, normalized)."""
    eye, shift, _ = dense_IS(ell)
    xi, eta = dense_xi_eta(L - ell)
    eta = eta[:, None]
    xi = xi[:, None]
    return 2.0 ** ((ell - L) / 2) * (np.kron(eye, eta)
                                     + np.kron(shift, xi - eta))


def _kron_all(mats):
    out = np.array([[1.0]])
    for m in mats:
        out = np.kron(out, m)
    return out


def dense_lambda(L, D, alpha, coeff=None):
    """Diagonal mid-level factor of the operator factorization.

    ``alpha`` is a 0/1 multi-index.  For each coordinate with
    ``alpha_k = 1`` the factor is ``2**-L`` times the identity; for
    ``alpha_k = 0`` an extra minor component bit appears with weights
    ``(1, 1/3)``.  With a cell-value vector ``coeff`` (1-D, all
    ``alpha_k = 1``) the diagonal is additionally multiplied by it.
    """
    facs = []
    for k in range(D):
        base = 2.0 ** (-L) * np.eye(2 ** L)
        if alpha[k] == 0:
            base = np.kron(base, np.diag([1.0, 1.0 / 3.0]))
        facs.append(base)
    lam = _kron_all(facs)
    if coeff is not None:
        if D != 1 or tuple(alpha) != (1,):
            raise ValueError("variable coefficients supported in 1-D only")
        lam = 2.0 ** (-L) * np.diag(np.asarray(coeff, dtype=float))
    return lam

def dense_M_multi(L, D, alpha):
    """Dimension-major Kronecker product of per-coordinate matrices."""
    return _kron_all([dense_M(L, a) for a in alpha])

def dense_C(L, D=1, s=1):
    """Additive multilevel preconditioner with level weights 2**(-s*l)."""
    n = 2 ** (D * L)
    out = np.zeros((n, n))
    for ell in range(L + 1):
        p = dense_P(ell, L)
        pp = _kron_all([p] * D)
        out += 2.0 ** (-s * ell) * pp @ pp.T
    return out

def dense_Q(L, D, alpha):
    """Product of the difference-extraction matrix and the preconditioner."""
    return dense_M_multi(L, D, alpha) @ dense_C(L, D, 1)

def dense_theta(L, D, k):
    """Square-root factor of the preconditioned Laplacian, coordinate k."""
    alpha = tuple(1 if j == k else 0 for j in range(D))
    lam = dense_lambda(L, D, alpha)
    return np.sqrt(lam) @ dense_Q(L, D, alpha)

def dense_stiffness(L, D=1, coeff=None, bc="mixed"):
    """Stiffness matrix of the Laplacian (or 1-D variable-coefficient form).

    Assembled from the factorized form: difference extraction, diagonal
    mid-level weights, and back.  ``coeff`` is a vector of cell midpoint
    values for the 1-D diffusion coefficient.
    """
    if bc != "mixed":
        raise ValueError("use dense_D_L for the both-ends-Dirichlet matrix")
    if coeff is not None:
        if D != 1:
            raise ValueError("variable coefficients supported in 1-D only")
        m1 = dense_M(L, 1)
        return m1.T @ (2.0 ** (-L) * np.diag(coeff)) @ m1
    n = 2 ** (D * L)
    out = np.zeros((n, n))
    for k in range(D):
        alpha = tuple(1 if j == k else 0 for j in range(D))
        m = dense_M_multi(L, D, alpha)
        lam = dense_lambda(L, D, alpha)
        out += m.T @ lam @ m
    return out

def dense_mass(L):
    """1-D mass matrix in the normalized hat basis (mixed conditions)."""
    m0 = dense_M(L, 0)
    lam = dense_lambda(L, 1, (0,))
    return m0.T @ lam @ m0

def dense_D_L(L):
    """Both-ends-Dirichlet 1-D Laplacian on 2**L interior nodes."""
    eye, shift, _ = dense_IS(L)
    h_inv = 2.0 ** L * (1.0 + 2.0 ** (-L))
    return h_inv ** 2 * (2 * eye - shift - shift.T)

def dense_rhs(L, D=1):
    """Load vector of the constant-one source in the normalized basis."""
    f = np.full(2 ** L, 2.0 ** (-L / 2))
    f[-1] *= 0.5
    return _kron_all([f[:, None]] * D)[:, 0]


# ---------------------------------------------------------------------------
# dense spectral utilities
# ---------------------------------------------------------------------------

def dense_unfold(v, ell):
    """Unfolding of a folded grid vector: first ``ell`` level groups as rows.

    ``v`` is the assembled level-major vector of a ``D``-dimensional
    representation with mode size ``2**D`` per level.
    """
    v = np.asarray(v).ravel()
    return v.reshape(2 ** ell, -1) if ell else v.reshape(1, -1)

def dense_svd(mat):
    """Singular values of a dense matrix, descending."""
    return np.linalg.svd(np.asarray(mat), compute_uv=False)

def dense_eig_extremes(mat):
    """Extreme eigenvalues (min, max) of a dense symmetric matrix."""
    w = np.linalg.eigvalsh(np.asarray(mat))
    return float(w[0]), float(w[-1])


# ---------------------------------------------------------------------------
# perturbation experiments
# ---------------------------------------------------------------------------

def _dense_ramp(rep: TT, ell):
    """Amplification factor of core ``ell`` (1-based), fully densely."""
    pre = asm_minus(rep.cores[:ell - 1])
    suf = asm_plus(rep.cores[ell:])
    s_pre = np.linalg.svd(pre, compute_uv=False)[0]
    s_suf = np.linalg.svd(suf, compute_uv=False)[0]
    return s_pre * float(np.linalg.norm(rep.cores[ell - 1])) * s_suf

def sample_perturbation_check(rep: TT, ell, delta=1e-8, trials=16, rng=None):
    """Empirically confirm the perturbation bound at one core position.

    Draws random relative perturbations of size ``delta`` of core ``ell``
    and checks the induced change of the assembled tensor against the
    amplification factor; additionally builds the maximizing perturbation
    from the singular vectors of the partial matricizations and checks
    that it attains the factor.  Returns ``True`` on success.
    """
    rng = np.random.default_rng(0 if rng is None else rng)
    base = asm(rep)
    core = rep.cores[ell - 1]
    ramp = _dense_ramp(rep, ell)
    cnorm = float(np.linalg.norm(core))
    for _ in range(trials):
        pert = rng.standard_normal(core.shape)
        pert *= delta * cnorm / np.linalg.norm(pert)
        mod = rep.copy()
        mod.cores[ell - 1] = core + pert
        change = np.linalg.norm(asm(mod) - base)
        if change > ramp * delta * (1 + 1e-4):
            return False
    # maximizing direction: top singular vectors of the partial products
    pre = asm_minus(rep.cores[:ell - 1])
    suf = asm_plus(rep.cores[ell:])
    _, _, vt = np.linalg.svd(pre, full_matrices=False)
    u, _, _ = np.linalg.svd(suf, full_matrices=False)
    p, m, n, q = core.shape
    direction = np.einsum("a,ij,b->aijb",
                          vt[0], np.ones((m, n)) / np.sqrt(m * n), u[:, 0])
    pert = delta * cnorm * direction
    mod = rep.copy()
    mod.cores[ell - 1] = core + pert
    attained = np.linalg.norm(asm(mod) - base)
    return bool(np.isclose(attained, ramp * delta, rtol=1e-6))
