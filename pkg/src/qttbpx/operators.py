"""Closed-form tensor-train constructions of the multilevel operators.

All representations live in level-major ordering: one core per dyadic
level with mode size ``2**D``, the coarsest level first.  Operators whose
rows carry extra per-coordinate component bits (average/difference
extraction and its products) append those bits after all level groups,
coordinate-major, matching :class:`~qttbpx.tt_core.LevelOrder` with the
corresponding ``free_dims``.

The constructions follow a small factory of constant elementary cores.
Scalar prefactors are distributed across the cores exactly as in the
closed forms — per-core magnitudes are what controls the representation
conditioning of the results, so no renormalization is performed.
"""

from __future__ import annotations

import numpy as np

from .tt_core import (
    TT,
    add,
    hadamard,
    kron_cores,
    matmat,
    matvec,
    mode_prod,
    scale,
    strong_kron,
    transpose,
    transpose_core,
)
from .tt_linalg import round_tt

# ---------------------------------------------------------------------------
# elementary blocks and the 1-D core factory
# ---------------------------------------------------------------------------

#: 2x2 elementary blocks: identity, up-shift, and the two corner projectors
I = np.eye(2)
J = np.array([[0.0, 1.0], [0.0, 0.0]])
I1 = np.diag([1.0, 0.0])
I2 = np.diag([0.0, 1.0])

SQRT2 = float(np.sqrt(2.0))


def _as_block(b):
    arr = np.atleast_2d(np.asarray(b, dtype=float))
    return arr


def _core(block_rows):
    """Build a core from a nested list of blocks (``None`` for zero)."""
    rows = [[None if b is None else _as_block(b) for b in row]
            for row in block_rows]
    p = len(rows)
    q = len(rows[0])
    shape = None
    for row in rows:
        for b in row:
            if b is not None:
                shape = b.shape
    m, n = shape
    out = np.zeros((p, m, n, q))
    for a, row in enumerate(rows):
        for b, blk in enumerate(row):
            if blk is not None:
                out[a, :, :, b] = blk
    return out


def _col(*vals):
    return np.array(vals, dtype=float)[:, None]


class Factory1D:
    """The constant elementary cores from which all operators are chained.

    Upper-case attributes are order-4 arrays; the ``_FLAT`` variants are
    the mode products with the respective transposes used for the
    symmetrized products, and ``W``/``Z``/``K`` are the auxiliary cores of
    the combined average/difference-times-prolongation chains.
    """

    A = _core([[1.0, 0.0]])                      # rank 1x2 boundary selector
    U = _core([[I, J.T], [None, J]])             # joint identity/shift chain
    X = _core([[_col(0.5, 1.0), _col(0.0, 0.5)],
               [_col(0.5, 0.0), _col(1.0, 0.5)]])
    P = _core([[1.0], [0.0]])                    # rank cap
    T0 = _core([[1.0, 1.0], [1.0, -1.0]])        # scalar Hadamard-type gauge
    T1 = _core([[1.0], [-1.0]])
    EYE = _core([[1.0, 0.0], [0.0, 1.0]])        # rank-2 scalar identity
    M0 = _core([[_col(0.5, 0.0)], [_col(0.0, 0.5)]])
    M1 = _core([[0.0], [1.0]])
    Y0 = _core([[_col(1.0, 1.0), _col(0.0, 0.0)],
                [_col(-0.5, 0.5), _col(0.5, 0.5)]])
    Y1 = _core([[_col(0.5, 0.5)]])
    N0 = _core([[_col(0.5, 0.0)], [_col(0.0, 0.5)]])
    N1 = _core([[1.0]])

    V = 0.5 * strong_kron(strong_kron(T0, U), T0)

    A_FLAT = mode_prod(A, A)
    U_FLAT = mode_prod(U, transpose_core(U))
    X_FLAT = mode_prod(X, transpose_core(X))
    P_FLAT = mode_prod(P, P)
    W0 = mode_prod(T0, EYE)
    W1 = mode_prod(T1, EYE)
    Z0 = mode_prod(Y0, transpose_core(X))
    Z1 = mode_prod(Y1, transpose_core(X))
    K0 = mode_prod(N0, P)
    K1 = mode_prod(N1, P)

    @classmethod
    def T(cls, alpha):
        return cls.T0 if alpha == 0 else cls.T1

    @classmethod
    def Y(cls, alpha):
        return cls.Y0 if alpha == 0 else cls.Y1

    @classmethod
    def N(cls, alpha):
        return cls.N0 if alpha == 0 else cls.N1

    @classmethod
    def M(cls, alpha):
        return cls.M0 if alpha == 0 else cls.M1

    @classmethod
    def W(cls, alpha):
        return cls.W0 if alpha == 0 else cls.W1

    @classmethod
    def Z(cls, alpha):
        return cls.Z0 if alpha == 0 else cls.Z1

    @classmethod
    def K(cls, alpha):
        return cls.K0 if alpha == 0 else cls.K1


F = Factory1D


def _merge_chain(factors, is_level):
    """Strong-kron a factor chain, grouping caps with level factors.

    Factors flagged as level factors each produce one output core; rank
    caps and scalar-mode factors are absorbed into the following level
    core (or the last one, for trailing caps).
    """
    cores = []
    buf = None
    for fac, lev in zip(factors, is_level):
        buf = fac if buf is None else strong_kron(buf, fac)
        if lev:
            cores.append(buf)
            buf = None
    if buf is not None:
        if cores:
            cores[-1] = strong_kron(cores[-1], buf)
        else:
            cores.append(buf)
    return TT(cores)


def _kron_power(core, d):
    out = core
    for _ in range(d - 1):
        out = kron_cores(out, core)
    return out


def _block2(tl, tr, bl, br):
    """Assemble a 2x2 block core from subcores sharing mode sizes."""
    parts = [p for p in (tl, tr, bl, br) if p is not None]
    m, n = parts[0].shape[1], parts[0].shape[2]
    pt = (tl if tl is not None else tr).shape[0]
    pb = (br if br is not None else bl).shape[0]
    ql = (tl if tl is not None else bl).shape[3]
    qr = (br if br is not None else tr).shape[3]
    out = np.zeros((pt + pb, m, n, ql + qr))
    if tl is not None:
        out[:pt, :, :, :ql] = tl
    if tr is not None:
        out[:pt, :, :, ql:] = tr
    if bl is not None:
        out[pt:, :, :, :ql] = bl
    if br is not None:
        out[pt:, :, :, ql:] = br
    return out


# ---------------------------------------------------------------------------
# 1-D chains
# ---------------------------------------------------------------------------

def build_ISJ(ell):
    """Identity, shift, and corner matrices of size 2**ell as joint chains."""
    if ell < 1:
        raise ValueError("ell must be positive")
    u = F.U
    def pick(row, col):
        cores = [u.copy() for _ in range(ell)]
        cores[0] = cores[0][row:row + 1]
        cores[-1] = cores[-1][..., col:col + 1]
        return TT(cores)
    return pick(0, 0), pick(0, 1), pick(1, 1)


def build_xi_eta(k):
    """All-ones and normalized ramp vectors of length 2**k."""
    if k == 0:
        one = TT([np.ones((1, 1, 1, 1))])
        return one, one.copy()
    cores = [F.X.copy() for _ in range(k)]
    cores[-1] = strong_kron(cores[-1], F.P)
    eta = TT([cores[0][0:1]] + [c.copy() for c in cores[1:]])
    xi = TT([cores[0][0:1] + cores[0][1:2]] + [c.copy() for c in cores[1:]])
    return xi, eta


def build_M(L, alpha, split=None):
    """Cell average (alpha=0) / difference (alpha=1) extraction, level L.

    For ``alpha = 0`` the rows carry a trailing component bit (minor).
    ``split`` selects the chain split point; all splits assemble to the
    same matrix.
    """
    split = L if split is None else split
    if not 0 <= split <= L:
        raise ValueError("split must lie in [0, L]")
    s = 2.0 ** (alpha + 0.5)
    factors = [F.A] + [s * F.U] * split + [F.T0] \
        + [s * F.V] * (L - split) + [F.M(alpha)]
    is_level = [False] + [True] * split + [False] + [True] * (L - split) \
        + [False]
    return _merge_chain(factors, is_level)


def build_P(ell, L):
    """Prolongation from level ``ell`` to level ``L`` (1-D)."""
    if not 0 <= ell <= L:
        raise ValueError("ell must lie in [0, L]")
    factors = [F.A] + [F.U] * ell + [F.X / SQRT2] * (L - ell) + [F.P]
    is_level = [False] + [True] * L + [False]
    return _merge_chain(factors, is_level)


def build_MP(ell, L, alpha):
    """Product of difference/average extraction with a prolongation."""
    s = 2.0 ** (alpha + 0.5)
    factors = [F.A] + [s * F.U] * ell + [F.T(alpha)] \
        + [2.0 ** alpha * F.Y(alpha)] * (L - ell) + [F.N(alpha)]
    is_level = [False] + [True] * ell + [False] + [True] * (L - ell) \
        + [False]
    return _merge_chain(factors, is_level)


def build_PPt(ell, L):
    """Symmetrized prolongation product P @ P.T at one level (1-D)."""
    factors = [F.A_FLAT] + [F.U_FLAT] * ell \
        + [F.X_FLAT / 2.0] * (L - ell) + [F.P_FLAT]
    is_level = [False] + [True] * L + [False]
    return _merge_chain(factors, is_level)


def build_MPPt(ell, L, alpha):
    """Extraction times symmetrized prolongation product (1-D)."""
    su = 2.0 ** (alpha + 0.5)
    sz = 2.0 ** (alpha - 0.5)
    factors = [F.A_FLAT] + [su * F.U_FLAT] * ell + [F.W(alpha)] \
        + [sz * F.Z(alpha)] * (L - ell) + [F.K(alpha)]
    is_level = [False] + [True] * ell + [False] + [True] * (L - ell) \
        + [False]
    return _merge_chain(factors, is_level)


# ---------------------------------------------------------------------------
# tensorization and utility representations
# ---------------------------------------------------------------------------

def tensorize(rep, D=None):
    """Kronecker-combine per-coordinate chains position by position.

    ``rep`` may be a single representation (used for all ``D``
    coordinates) or a list of representations with equal core counts.
    """
    reps = [rep] * D if isinstance(rep, TT) else list(rep)
    ncores = reps[0].ncores
    if any(r.ncores != ncores for r in reps):
        raise ValueError("core count mismatch across coordinates")
    cores = []
    for k in range(ncores):
        cur = reps[0].cores[k]
        for r in reps[1:]:
            cur = kron_cores(cur, r.cores[k])
        cores.append(cur)
    return TT(cores)


def identity_tt(L, msize=2):
    """Identity matrix as a rank-one chain of ``L`` diagonal cores."""
    return TT([np.eye(msize).reshape(1, msize, msize, 1)] * L)


def ones_tt(L, msize=2):
    return TT([np.ones((1, msize, 1, 1))] * L)


def corner_tt(L):
    """Rank-one projector onto the last grid index."""
    return TT([I2.reshape(1, 2, 2, 1)] * L)


def diag_operator(v: TT) -> TT:
    """Diagonal matrix with the entries of a tensor-train vector."""
    cores = []
    for c in v.cores:
        p, m, n, q = c.shape
        if n != 1:
            raise ValueError("diag_operator expects a vector")
        out = np.zeros((p, m, m, q))
        idx = np.arange(m)
        out[:, idx, idx, :] = c[:, idx, 0, :]
        cores.append(out)
    return TT(cores)


# ---------------------------------------------------------------------------
# preconditioner, combined operator, and factors
# ---------------------------------------------------------------------------

def build_C(L, D=1, s=1):
    """Additive multilevel preconditioner with level weights 2**(-s*l).

    Level-major chain of ``L`` cores with all ranks ``2**(2*D+1)``.
    """
    if L < 1:
        raise ValueError("L must be positive")
    a = _kron_power(F.A_FLAT, D)
    u = _kron_power(F.U_FLAT, D)
    x = _kron_power(F.X_FLAT, D) * 2.0 ** (-D)
    p = _kron_power(F.P_FLAT, D)
    boundary = np.concatenate([a, a], axis=3)
    cap = np.concatenate([np.zeros_like(p), p], axis=0)
    cores = [_block2(u, 2.0 ** (-s * ell) * u, None, x)
             for ell in range(1, L + 1)]
    cores[0] = strong_kron(boundary, cores[0])
    cores[-1] = strong_kron(cores[-1], cap)
    return TT(cores)


def _alpha_tuple(alpha, D):
    if isinstance(alpha, int):
        alpha = (alpha,) if D == 1 else None
    if alpha is None or len(alpha) != D:
        raise ValueError("alpha must be a 0/1 tuple of length D")
    return tuple(int(a) for a in alpha)


def build_Q(L, D, alpha):
    """Extraction-times-preconditioner product in one well-conditioned chain.

    Returns ``L`` cores when all ``alpha_k = 1``; otherwise a trailing
    core of mode ``2**(D - |alpha|) x 1`` carries the component bits of
    the coordinates with ``alpha_k = 0``.  Internal ranks are
    ``2**(2*D) + 2**(2*D - |alpha|)``.
    """
    alpha = _alpha_tuple(alpha, D)
    nfree = D - sum(alpha)
    a = _kron_power(F.A_FLAT, D)
    u = _kron_power(F.U_FLAT, D) * 2.0 ** (D / 2.0)
    w = _kron_power_list([F.W(ak) for ak in alpha])
    z = _kron_power_list([F.Z(ak) for ak in alpha]) * 2.0 ** (sum(alpha) - D / 2.0)
    kcap = _kron_power_list([F.K(ak) for ak in alpha])
    uw = strong_kron(u, w)
    boundary = np.concatenate([a, strong_kron(a, w)], axis=3)
    cap_zero = np.zeros((a.shape[3],) + kcap.shape[1:])
    cap = np.concatenate([cap_zero, kcap], axis=0)
    expo = 1.0 - sum(alpha)
    cores = [_block2(u, 2.0 ** (-expo * ell) * uw, None, z)
             for ell in range(1, L + 1)]
    cores[0] = strong_kron(boundary, cores[0])
    if nfree == 0:
        cores[-1] = strong_kron(cores[-1], cap)
        return TT(cores)
    return TT(cores + [cap])


def _kron_power_list(cores):
    out = cores[0]
    for c in cores[1:]:
        out = kron_cores(out, c)
    return out


def build_Lambda(L, D, alpha, coeff=None, sqrt=False):
    """Diagonal mid-level factor for a differential index ``alpha``.

    Constant coefficient: ``L`` rank-one diagonal cores ``2**-D * I`` plus,
    if some ``alpha_k = 0``, a trailing diagonal core with weights
    ``(1, 1/3)`` per such coordinate.  A cell-value vector ``coeff``
    (1-D, ``alpha = 1``) multiplies the diagonal.  ``sqrt=True`` applies
    the element-wise square root core by core (all entries nonnegative).
    """
    alpha = _alpha_tuple(alpha, D)
    nfree = D - sum(alpha)
    msize = 2 ** D
    if coeff is not None:
        if D != 1 or alpha != (1,):
            raise ValueError("variable coefficients supported in 1-D only")
        lam = diag_operator(coeff)
        lam = TT([0.5 * c for c in lam.cores])
        if sqrt:
            raise ValueError("square root of a variable coefficient factor "
                             "is not representable; use the factored form")
        return lam
    level = 2.0 ** (-D) * np.eye(msize)
    if sqrt:
        level = 2.0 ** (-D / 2.0) * np.eye(msize)
    cores = [level.reshape(1, msize, msize, 1)] * L
    if nfree:
        wts = np.array([1.0])
        for _ in range(nfree):
            wts = np.kron(wts, np.array([1.0, 1.0 / 3.0]))
        if sqrt:
            wts = np.sqrt(wts)
        trail = np.diag(wts).reshape(1, wts.size, wts.size, 1)
        cores = cores + [trail]
    return TT(cores)


def _merge_trailing(rep: TT) -> TT:
    """Absorb trailing mode-1x1 cores into the last nontrivial core."""
    cores = list(rep.cores)
    while len(cores) > 1 and cores[-1].shape[1:3] == (1, 1):
        cap = cores.pop()
        cores[-1] = strong_kron(cores[-1], cap)
    return TT(cores)


def build_Theta(L, D, k):
    """Square-root factor of the preconditioned Laplacian, coordinate k."""
    alpha = tuple(1 if j == k else 0 for j in range(D))
    lam_sqrt = build_Lambda(L, D, alpha, sqrt=True)
    q = build_Q(L, D, alpha)
    return matmat(lam_sqrt, q)


def build_B(L, D=1, coeff=None):
    """Preconditioned stiffness matrix as one combined representation.

    Laplacian (``coeff=None``): the sum over coordinates of the
    symmetrized square-root factors.  With a 1-D cell-coefficient vector,
    the middle factor carries the coefficient.
    """
    if coeff is not None:
        if D != 1:
            raise ValueError("variable coefficients supported in 1-D only")
        q = build_Q(L, 1, (1,))
        lam = build_Lambda(L, 1, (1,), coeff=coeff)
        return _merge_trailing(matmat(transpose(q), matmat(lam, q)))
    total = None
    for k in range(D):
        theta = build_Theta(L, D, k)
        term = _merge_trailing(matmat(transpose(theta), theta))
        total = term if total is None else add(total, term)
    return total


def build_A_direct(L, D=1, bc="mixed"):
    """Direct multilevel chain of the stiffness matrix.

    ``bc="mixed"``: Dirichlet at the origin faces, natural elsewhere (the
    operative setting).  ``bc="dirichlet"``: both-ends Dirichlet in 1-D on
    ``2**L`` interior nodes.  These chains are exact but deliberately kept
    in their naive form — they are the ill-conditioned counterparts of the
    combined representation.
    """
    if bc == "dirichlet":
        if D != 1:
            raise ValueError("both-ends Dirichlet variant is 1-D only")
        h2 = (1.0 + 2.0 ** (-L)) ** 2
        if L == 1:
            return TT([(4.0 * h2 * (2 * I - J - J.T)).reshape(1, 2, 2, 1)])
        first = 4.0 * _core([[I, J.T, J]])
        mid = 4.0 * _core([[I, J.T, J], [None, J, None], [None, None, J.T]])
        last = 4.0 * h2 * _core([[2 * I - J - J.T], [-J], [-J.T]])
        return TT([first] + [mid] * (L - 2) + [last])
    if bc != "mixed":
        raise ValueError("bc must be 'mixed' or 'dirichlet'")
    a1 = _mixed_stiffness_1d(L)
    if D == 1:
        return a1
    mass = _mass_1d(L)
    total = None
    for k in range(D):
        factors = [a1 if j == k else mass for j in range(D)]
        term = tensorize(factors)
        total = term if total is None else add(total, term)
    return total


def _mixed_stiffness_1d(L):
    if L == 1:
        return TT([(4.0 * (2 * I - J - J.T - I2)).reshape(1, 2, 2, 1)])
    first = 4.0 * _core([[I, J.T, J, I2]])
    mid = 4.0 * _core([[I, J.T, J, None],
                       [None, J, None, None],
                       [None, None, J.T, None],
                       [None, None, None, I2]])
    last = 4.0 * _core([[2 * I - J - J.T], [-J], [-J.T], [-I2]])
    return TT([first] + [mid] * (L - 2) + [last])


def _mass_1d(L):
    """1-D mass matrix in the normalized basis, as a compact chain."""
    eye = identity_tt(L)
    _, s, _ = build_ISJ(L)
    st = transpose(s)
    corner = corner_tt(L)
    return add(add(scale(eye, 2.0 / 3.0), scale(corner, -1.0 / 3.0)),
               add(scale(s, 1.0 / 6.0), scale(st, 1.0 / 6.0)))


# ---------------------------------------------------------------------------
# right-hand sides and analytic test vectors
# ---------------------------------------------------------------------------

def build_rhs(L, D=1):
    """Load vector of the constant-one source in the normalized basis."""
    f1 = add(scale(ones_tt(L), 2.0 ** (-L / 2.0)),
             scale(_corner_vec(L), -0.5 * 2.0 ** (-L / 2.0)))
    if D == 1:
        return f1
    return tensorize(f1, D)


def _corner_vec(L):
    return TT([np.array([0.0, 1.0]).reshape(1, 2, 1, 1)] * L)


def precondition_rhs(c: TT, f: TT, tol=1e-14) -> TT:
    """Apply the preconditioner to a load vector and recompress."""
    return round_tt(matvec(c, f), tol)


def trig_vector(L, omega, phase=0.0, kind="cos"):
    """Values ``cos/sin(omega * t + phase)`` on ``t = 0..2**L - 1``.

    Rotation-matrix slices keep every core perfectly conditioned.
    """
    def rot(theta):
        c, s = np.cos(theta), np.sin(theta)
        return np.array([[c, -s], [s, c]])

    sel = np.array([1.0, 0.0]) if kind == "cos" else np.array([0.0, 1.0])
    cores = []
    for ell in range(1, L + 1):
        w = omega * 2.0 ** (L - ell)
        slices = [np.eye(2), rot(w)]
        core = np.zeros((2, 2, 1, 2))
        for i, sl in enumerate(slices):
            core[:, i, 0, :] = sl
        cores.append(core)
    cores[0] = np.einsum("a,aijb->ijb", sel, cores[0])[None]
    e1 = rot(phase) @ np.array([1.0, 0.0])
    cores[-1] = np.einsum("aijb,b->aij", cores[-1], e1)[..., None]
    return TT(cores)


def poly_vector(L, coeffs):
    """Values of a polynomial ``sum c_k t**k`` on ``t = 0..2**L - 1``.

    Carries the powers ``(1, t, ..., t**d)`` of the bit-prefix value
    through the chain; rank ``d + 1``.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    d = coeffs.size - 1
    from math import comb

    def trans(i):
        # (2 s + i)**k expanded over powers of s
        t = np.zeros((d + 1, d + 1))
        for k in range(d + 1):
            for j in range(k + 1):
                t[j, k] = comb(k, j) * 2.0 ** j * float(i) ** (k - j)
        return t

    t0, t1 = trans(0), trans(1)
    cores = []
    for ell in range(1, L + 1):
        core = np.zeros((d + 1, 2, 1, d + 1))
        core[:, 0, 0, :] = t0
        core[:, 1, 0, :] = t1
        cores.append(core)
    e = np.zeros(d + 1)
    e[0] = 1.0
    cores[0] = np.einsum("a,aijb->ijb", e, cores[0])[None]
    cores[-1] = np.einsum("aijb,b->aij", cores[-1], coeffs)[..., None]
    return TT(cores)


def _poly_in_x(coeffs_x, a, b):
    """Convert a polynomial in ``x`` to one in ``t`` where ``x = a t + b``."""
    from numpy.polynomial import Polynomial
    return Polynomial(coeffs_x)(Polynomial([b, a])).coef


def sine_vector(L, omega, shift=1.0):
    """``sin(omega * (t + shift))`` on ``t = 0..2**L - 1`` (rank 2)."""
    return trig_vector(L, omega, phase=omega * shift, kind="sin")


def redundant_ones(L, R=4.0):
    """A deliberately redundant rank-2 chain of the all-ones tensor.

    The chain hides a cancellation of magnitude ``R**L``; orthogonalizing
    it amplifies unit round-off accordingly.  Used as the adversarial
    conditioning benchmark.
    """
    if L < 2:
        raise ValueError("the redundant chain needs at least two cores")
    y0 = np.zeros((2, 1))
    yr = np.full((2, 1), float(R))
    first = _core([[(1.0 + R ** (-float(L))) * yr, -yr]])
    mid = _core([[yr, y0], [y0, yr]])
    last = _core([[yr], [yr]])
    return TT([first] + [mid] * (L - 2) + [last])


def min_eigvec_dirichlet(L):
    """First eigenvector of the both-ends-Dirichlet Laplacian chain."""
    h = 1.0 + 2.0 ** (-L)
    return sine_vector(L, np.pi * 2.0 ** (-L) / h)


# ---------------------------------------------------------------------------
# oscillatory-coefficient problem data
# ---------------------------------------------------------------------------

def build_osc_coefficient(K, L):
    """Cell-midpoint values of ``2 + cos(K pi x)`` as a rank-3 chain."""
    if K % 4 != 0:
        raise ValueError("K must be divisible by 4")
    if K > 2 ** L:
        raise ValueError("K must not exceed the number of cells")
    omega = K * np.pi * 2.0 ** (-L)
    cosv = trig_vector(L, omega, phase=0.5 * omega, kind="cos")
    return add(scale(ones_tt(L), 2.0), cosv)


def build_osc_exact(K, L):
    """Nodal exact solution and midpoint flux-gradient of the oscillatory
    problem, as low-rank chains (ranks at most 7 and 6).

    The solution of ``-(a u')' = 1`` with ``a = 1 / (2 + cos(K pi x))``,
    Dirichlet at 0 and natural at 1, evaluated at the nodes
    ``x = (t + 1) / 2**L``; its derivative ``(1 - x)(2 + cos(K pi x))``
    at the cell midpoints ``x = (t + 1/2) / 2**L``.  Both are scaled by
    ``2**(-L/2)`` to match the normalized basis.
    """
    kp = K * np.pi
    h = 2.0 ** (-L)
    omega = kp * h

    # nodal solution
    poly = _poly_in_x([kp ** -2, 2.0, -1.0], h, h)      # 2x - x^2 + 1/(kp)^2
    u_poly = poly_vector(L, poly)
    one_minus_x = poly_vector(L, _poly_in_x([1.0, -1.0], h, h))
    sin_part = sine_vector(L, omega, shift=1.0)
    cos_part = trig_vector(L, omega, phase=omega, kind="cos")
    u = add(u_poly,
            add(scale(hadamard(one_minus_x, sin_part), 1.0 / kp),
                scale(cos_part, -kp ** -2)))
    u = scale(round_tt(u, 1e-14), 2.0 ** (-L / 2.0))

    # midpoint derivative (1 - x) (2 + cos(kp x))
    one_minus_xm = poly_vector(L, _poly_in_x([1.0, -1.0], h, 0.5 * h))
    cos_m = trig_vector(L, omega, phase=0.5 * omega, kind="cos")
    v = add(scale(one_minus_xm, 2.0), hadamard(one_minus_xm, cos_m))
    v = scale(round_tt(v, 1e-14), 2.0 ** (-L / 2.0))
    return u, v


# ---------------------------------------------------------------------------
# plain-text configuration ingestion
# ---------------------------------------------------------------------------

def parse_config(text):
    """Parse ``key=value`` lines into a dict (ints/floats recognized)."""
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"malformed config line: {line!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        for cast in (int, float):
            try:
                val = cast(val)
                break
            except ValueError:
                continue
        out[key] = val
    return out
