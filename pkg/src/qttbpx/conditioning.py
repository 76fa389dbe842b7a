"""Representation conditioning diagnostics.

The central quantities are per-position amplification factors: how much a
relative perturbation of one core can change the assembled tensor.  They
bound the error committed by orthogonalization sweeps and, for matrix
representations, how much applying an operator can worsen a vector
representation's conditioning.

Amplification factors of a representation are computed exactly through
rank-sized Gram recursions.  The operator bounds additionally require
spectral norms of partial-product slices; these are evaluated densely for
small matrices and by power iteration on the implicit Gram map (with
tensor-train iterates kept rounded) for large ones.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .tt_core import TT, EPS, matvec, transpose
from .tt_linalg import norm2, round_tt

#: largest row count for which partial-product norms are formed densely;
#: beyond this a warm-started power iteration is both faster and accurate
DENSE_NORM_LIMIT = 2 ** 9

#: relative rounding applied to sliced partial products before norm
#: estimation, and to the power-iteration iterates; the iterates only
#: steer the dominant singular pair, so a loose tolerance suffices
SLICE_ROUNDING = 1e-12
ITERATE_ROUNDING = 1e-4


# ---------------------------------------------------------------------------
# amplification factors of a single representation
# ---------------------------------------------------------------------------

def _left_grams(rep: TT):
    """Gram matrices of the partial products from the left.

    ``grams[k]`` is the ``r_k x r_k`` Gram matrix of the matricization of
    the first ``k`` cores; ``grams[0] = [[1]]``.
    """
    grams = [np.array([[1.0]])]
    for core in rep.cores:
        grams.append(np.einsum("aijb,ac,cijd->bd", core, grams[-1], core,
                               optimize=True))
    return grams


def _right_grams(rep: TT):
    """Gram matrices of the partial products from the right.

    ``grams[k]`` is the Gram matrix of the product of cores ``k+1, ..., L``
    (1-based); ``grams[L] = [[1]]``.
    """
    grams = [np.array([[1.0]])]
    for core in reversed(rep.cores):
        grams.append(np.einsum("aijb,bd,cijd->ac", core, grams[-1], core,
                               optimize=True))
    grams.reverse()
    return grams


def _spec_from_gram(g):
    return float(np.sqrt(max(np.linalg.eigvalsh(g)[-1], 0.0)))


def ramp(rep: TT, ell: int) -> float:
    """Amplification factor of core ``ell`` (1-based).

    The product of the spectral norms of the two partial matricizations
    excluding core ``ell`` and the Frobenius norm of that core; a relative
    perturbation of size ``delta`` of the core changes the assembled
    tensor by at most ``ramp * delta``.
    """
    if not 1 <= ell <= rep.ncores:
        raise ValueError("position out of range")
    left = _left_grams(rep)[ell - 1]
    right = _right_grams(rep)[ell]
    cnorm = float(np.linalg.norm(rep.cores[ell - 1]))
    return _spec_from_gram(left) * cnorm * _spec_from_gram(right)


def all_ramps(rep: TT):
    """Amplification factors at every position, sharing the Gram sweeps."""
    left = _left_grams(rep)
    right = _right_grams(rep)
    return [_spec_from_gram(left[k]) * float(np.linalg.norm(rep.cores[k]))
            * _spec_from_gram(right[k + 1]) for k in range(rep.ncores)]


def rcond(rep: TT, ell: int) -> float:
    """Condition number of position ``ell``: amplification relative to the
    assembled tensor's norm.  Always at least 1."""
    return ramp(rep, ell) / norm2(rep)


def apply_gauge(rep: TT, ell: int, mat) -> TT:
    """Insert ``mat @ inv(mat)`` on the bond after core ``ell`` (1-based).

    The assembled tensor is unchanged; the conditioning of the two
    adjacent positions changes by at most the condition number of ``mat``.
    """
    if not 1 <= ell < rep.ncores:
        raise ValueError("gauge position must be an internal bond")
    mat = np.asarray(mat, dtype=float)
    inv = np.linalg.inv(mat)
    cores = [c.copy() for c in rep.cores]
    cores[ell - 1] = np.einsum("aijb,bc->aijc", cores[ell - 1], mat)
    cores[ell] = np.einsum("ab,bijc->aijc", inv, cores[ell])
    return TT(cores)


def forecast_orth_error(rep: TT, c_qr: float = 1.0) -> float:
    """A priori forecast of the absolute orthogonalization round-off.

    Sums, over the positions, the QR perturbation scale of one core
    (entry count to the power 3/2, times unit round-off) amplified by the
    position's factor.  An order-of-magnitude diagnostic.
    """
    return c_qr * EPS * sum(c.size ** 1.5 * r
                            for c, r in zip(rep.cores, all_ramps(rep)))


# ---------------------------------------------------------------------------
# operator representation bounds
# ---------------------------------------------------------------------------

def _slice_prefix(rep: TT, ell: int, k: int) -> TT:
    """Cores before position ``ell`` with the open bond fixed to ``k``."""
    cores = [c.copy() for c in rep.cores[:ell - 1]]
    cores[-1] = cores[-1][..., k:k + 1]
    return TT(cores)


def _slice_suffix(rep: TT, ell: int, k: int) -> TT:
    """Cores after position ``ell`` with the open bond fixed to ``k``."""
    cores = [c.copy() for c in rep.cores[ell:]]
    cores[0] = cores[0][k:k + 1]
    return TT(cores)


def _random_rank1(rep_cols, rng):
    """Random rank-one vector compatible with a matrix's column modes."""
    cores = []
    for n in rep_cols:
        c = rng.standard_normal((1, n, 1, 1))
        cores.append(c / np.linalg.norm(c))
    return TT(cores)


def spectral_norm(matrep: TT, warm: TT = None, tol: float = 2e-4,
                  max_iter: int = 60, rng=None):
    """Largest singular value of an assembled tensor-train matrix.

    Dense for small matrices; otherwise power iteration on the Gram map
    ``v -> A^T A v`` with rounded tensor-train iterates (products formed
    by the truncating zip-up sweep, which keeps the per-step cost at the
    iterate's rank rather than the full product rank), accelerated by a
    three-term Rayleigh-Ritz update so that clustered top singular values
    do not stall the iteration.  Returns the norm estimate and the final
    iterate (usable to warm-start a related call).
    """
    if matrep.nrows <= DENSE_NORM_LIMIT and matrep.ncols <= DENSE_NORM_LIMIT:
        from .tt_core import asm
        mat = np.atleast_2d(asm(matrep))
        return float(np.linalg.norm(mat, 2)), warm
    from .solver import matvec_rounded
    from .tt_core import add, dot, scale

    rng = np.random.default_rng(0) if rng is None else rng
    at = transpose(matrep)

    def gram(v):
        return matvec_rounded(at, matvec_rounded(matrep, v, ITERATE_ROUNDING),
                              ITERATE_ROUNDING)

    def lincomb(reps, coeffs):
        acc = None
        for rep, coeff in zip(reps, coeffs):
            if coeff == 0.0:
                continue
            term = scale(rep, coeff)
            acc = term if acc is None else add(acc, term)
        return round_tt(acc, ITERATE_ROUNDING)

    x = warm if warm is not None else _random_rank1(matrep.mode_cols, rng)
    x = round_tt(x, ITERATE_ROUNDING)
    nx = norm2(x)
    if nx == 0.0:
        x = _random_rank1(matrep.mode_cols, rng)
        nx = norm2(x)
    x = scale(x, 1.0 / nx)
    gx = gram(x)
    lam = dot(x, gx)
    p = gp = None
    for _ in range(max_iter):
        # residual of the current Ritz pair drives the subspace
        w = round_tt(add(gx, scale(x, -lam)), ITERATE_ROUNDING)
        nw = norm2(w)
        if lam <= 0.0 or not np.isfinite(nw) or nw <= 1e-8 * lam:
            break
        w = scale(w, 1.0 / nw)
        gw = gram(w)
        basis = [x, w] if p is None else [x, w, p]
        gbasis = [gx, gw] if p is None else [gx, gw, gp]
        k = len(basis)
        gmat = np.empty((k, k))
        amat = np.empty((k, k))
        for i in range(k):
            for j in range(i, k):
                gmat[i, j] = gmat[j, i] = dot(basis[i], basis[j])
                aij = 0.5 * (dot(basis[i], gbasis[j])
                             + dot(basis[j], gbasis[i]))
                amat[i, j] = amat[j, i] = aij
        # whiten the (possibly near-dependent) basis before Rayleigh-Ritz
        evals, evecs = np.linalg.eigh(gmat)
        keep = evals > 1e-10 * evals[-1]
        white = evecs[:, keep] / np.sqrt(evals[keep])
        theta, ritz = np.linalg.eigh(white.T @ amat @ white)
        y = white @ ritz[:, -1]
        lam_new = theta[-1]
        if not np.isfinite(lam_new) or lam_new <= 0.0:
            break
        yp = y.copy()
        yp[0] = 0.0
        if np.linalg.norm(yp) > 0.0:
            p = lincomb(basis, yp)
            gp = lincomb(gbasis, yp)
        x = lincomb(basis, y)
        gx = lincomb(gbasis, y)
        nx = norm2(x)
        if nx == 0.0 or not np.isfinite(nx):
            break
        x = scale(x, 1.0 / nx)
        gx = scale(gx, 1.0 / nx)
        done = abs(lam_new - lam) <= tol * abs(lam_new)
        lam = lam_new
        if done:
            break
    return float(np.sqrt(max(lam, 0.0))), x


def _bond_slice_norms(rep: TT, ell: int, side: str, rng):
    """Spectral norms of all partial-product slices at one bond."""
    if side == "prefix":
        nslices = rep.ranks[ell - 1]
        make = lambda k: _slice_prefix(rep, ell, k)
        empty = ell == 1
    else:
        nslices = rep.ranks[ell]
        make = lambda k: _slice_suffix(rep, ell, k)
        empty = ell == rep.ncores
    if empty:
        return np.array([1.0])
    norms = np.empty(nslices)
    for k in range(nslices):
        piece = round_tt(make(k), SLICE_ROUNDING)
        # each slice has its own dominant direction; a fresh rank-one
        # start converges far faster than reusing the previous iterate
        norms[k], _ = spectral_norm(piece, rng=rng)
    return norms


def beta(matrep: TT, ell: int, rng=None) -> float:
    """Computable upper bound for the operator amplification factor.

    Combines the spectral norms of all rank slices of the partial
    products on both sides of position ``ell`` with those of the blocks
    of the core itself.
    """
    if not 1 <= ell <= matrep.ncores:
        raise ValueError("position out of range")
    rng = np.random.default_rng(0) if rng is None else rng
    pre = _bond_slice_norms(matrep, ell, "prefix", rng)
    suf = _bond_slice_norms(matrep, ell, "suffix", rng)
    core = matrep.cores[ell - 1]
    blocks = np.linalg.norm(core, ord=2, axis=(1, 2))
    return float(np.sqrt(np.sum(pre ** 2) * np.sum(suf ** 2)
                         * np.sum(blocks ** 2)))


def _fit_warm(warm: TT, mode_cols, side: str, rng):
    """Pad a previous bond's iterate with fresh cores so it matches the
    next bond's longer chain; the nested-chain structure makes this a
    near-converged starting vector."""
    missing = len(mode_cols) - warm.ncores
    if missing < 0:
        return None
    modes = mode_cols[warm.ncores:] if side == "prefix" \
        else mode_cols[:missing]
    # a constant extension core tracks the roughly self-similar dominant
    # vector of the nested chains better than a random one
    fresh = [np.ones((1, n, 1, 1)) / np.sqrt(n) for n in modes]
    cores = [c.copy() for c in warm.cores]
    return TT(cores + fresh if side == "prefix" else fresh + cores)


def _sweep_slice_norms(rep: TT, side: str, rng):
    """Per-bond slice norms for every position in one warm-started sweep.

    Prefix chains grow left to right and suffix chains right to left; the
    slice at one bond extends the slice at the previous bond by a single
    core, so its dominant singular vector is an excellent warm start and
    the power iteration converges in a few steps per bond.
    """
    ncores = rep.ncores
    out = [None] * (ncores + 1)
    warms = {}
    order = range(1, ncores + 1) if side == "prefix" \
        else range(ncores, 0, -1)
    for ell in order:
        if (side == "prefix" and ell == 1) or \
                (side == "suffix" and ell == ncores):
            out[ell] = np.array([1.0])
            continue
        nslices = rep.ranks[ell - 1] if side == "prefix" else rep.ranks[ell]
        make = (lambda k: _slice_prefix(rep, ell, k)) if side == "prefix" \
            else (lambda k: _slice_suffix(rep, ell, k))
        norms = np.empty(nslices)
        seen = {}
        for k in range(nslices):
            # structured operators repeat slices; share their norms
            sliced = rep.cores[ell - 2][..., k] if side == "prefix" \
                else rep.cores[ell][k]
            key = sliced.tobytes()
            if key in seen:
                norms[k] = norms[seen[key]]
                continue
            seen[key] = k
            piece = round_tt(make(k), SLICE_ROUNDING)
            warm = warms.get(k)
            if warm is not None:
                warm = _fit_warm(warm, piece.mode_cols, side, rng)
            norms[k], warms[k] = spectral_norm(piece, warm=warm, rng=rng)
        out[ell] = norms
    return out


def max_beta(matrep: TT, positions=None, rng=None) -> float:
    positions = range(1, matrep.ncores + 1) if positions is None else positions
    rng = np.random.default_rng(0) if rng is None else rng
    pre = _sweep_slice_norms(matrep, "prefix", rng)
    suf = _sweep_slice_norms(matrep, "suffix", rng)
    best = 0.0
    for ell in positions:
        blocks = np.linalg.norm(matrep.cores[ell - 1], ord=2, axis=(1, 2))
        best = max(best, float(np.sqrt(np.sum(pre[ell] ** 2)
                                       * np.sum(suf[ell] ** 2)
                                       * np.sum(blocks ** 2))))
    return best


def probe_opramp(matrep: TT, vecrep: TT, ell: int) -> float:
    """Lower bound for the operator amplification factor from one probe."""
    applied = matvec(matrep, vecrep)
    return ramp(applied, ell) / ramp(vecrep, ell)


# ---------------------------------------------------------------------------
# aggregate report
# ---------------------------------------------------------------------------

@dataclass
class ConditioningReport:
    """Per-position conditioning summary of one representation."""

    positions: list
    ramp: list
    rcond: list
    beta: list
    forecast: float

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["position", "ramp", "rcond", "beta", "forecast"])
            for i, pos in enumerate(self.positions):
                b = "" if self.beta[i] is None else f"{self.beta[i]:.17g}"
                writer.writerow([pos, f"{self.ramp[i]:.17g}",
                                 f"{self.rcond[i]:.17g}", b,
                                 f"{self.forecast:.17g}"])


def report(rep: TT, with_beta: bool = False, rng=None) -> ConditioningReport:
    """Evaluate all diagnostics position by position.

    ``with_beta`` additionally computes the operator bounds (meaningful
    for matrix representations; considerably more expensive).
    """
    ramps = all_ramps(rep)
    nrm = norm2(rep)
    rconds = [r / nrm for r in ramps]
    betas = [None] * rep.ncores
    if with_beta:
        rng = np.random.default_rng(0) if rng is None else rng
        betas = [beta(rep, ell, rng=rng) for ell in range(1, rep.ncores + 1)]
    return ConditioningReport(list(range(1, rep.ncores + 1)), ramps, rconds,
                              betas, forecast_orth_error(rep))
