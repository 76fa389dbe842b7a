"""Orthogonalization sweeps, TT-SVD forms, rank truncation, and soft
thresholding.

These are the numerically delicate operations: a sweep applies one
Householder QR or SVD per core and carries the triangular/diagonal factor
into the neighbor, so round-off is amplified by the representation's
conditioning rather than by the represented tensor's magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tt_core import EPS, TT


def _qr_step_left(core):
    """QR of the column matricization; returns (orthogonal core, carry)."""
    p, m, n, q = core.shape
    mat = core.reshape(p * m * n, q)
    qmat, r = np.linalg.qr(mat)
    rank = qmat.shape[1]
    return qmat.reshape(p, m, n, rank), r


def _qr_step_right(core):
    """LQ of the row matricization; returns (carry, orthogonal core)."""
    p, m, n, q = core.shape
    mat = core.reshape(p, m * n * q)
    qmat, r = np.linalg.qr(mat.T)
    rank = qmat.shape[1]
    return r.T, qmat.T.reshape(rank, m, n, q)


def orth_left(rep: TT) -> TT:
    """Left-orthogonalize: all but the last core get orthonormal columns.

    In exact arithmetic the assembled tensor is unchanged; in floating
    point the relative change is governed by the representation condition
    numbers, not by unit round-off alone.
    """
    cores = [c.copy() for c in rep.cores]
    for k in range(len(cores) - 1):
        cores[k], carry = _qr_step_left(cores[k])
        cores[k + 1] = np.tensordot(carry, cores[k + 1], axes=([1], [0]))
    return TT(cores)


def orth_right(rep: TT) -> TT:
    """Right-orthogonalize: all but the first core get orthonormal rows."""
    cores = [c.copy() for c in rep.cores]
    for k in range(len(cores) - 1, 0, -1):
        carry, cores[k] = _qr_step_right(cores[k])
        cores[k - 1] = np.tensordot(cores[k - 1], carry, axes=([3], [0]))
    return TT(cores)


@dataclass
class SVDForm:
    """A representation in TT-SVD form together with its unfolding spectra.

    ``singular_values[k]`` holds the singular values of the unfolding that
    splits the chain after core ``k+1`` (1-based bond ``k+1``).
    """

    orientation: str
    rep: TT
    singular_values: list

    @property
    def norm(self):
        if self.singular_values:
            return float(np.linalg.norm(self.singular_values[0]))
        return float(np.linalg.norm(self.rep.cores[0]))


def tt_svd(rep: TT, orientation="left") -> SVDForm:
    """Bring a representation into left- or right-oriented TT-SVD form.

    The chain is first orthogonalized toward the opposite end, then a
    sweep of SVDs makes every partial matricization on the sweep side
    orthonormal while the other side carries the singular values; the
    local singular values then equal those of the global unfoldings.
    """
    if orientation not in ("left", "right"):
        raise ValueError("orientation must be 'left' or 'right'")
    sigmas = []
    if orientation == "left":
        cores = orth_right(rep).cores
        for k in range(len(cores) - 1):
            p, m, n, q = cores[k].shape
            u, s, vt = np.linalg.svd(cores[k].reshape(p * m * n, q),
                                     full_matrices=False)
            sigmas.append(s)
            cores[k] = u.reshape(p, m, n, u.shape[1])
            carry = s[:, None] * vt
            cores[k + 1] = np.tensordot(carry, cores[k + 1], axes=([1], [0]))
    else:
        cores = orth_left(rep).cores
        for k in range(len(cores) - 1, 0, -1):
            p, m, n, q = cores[k].shape
            u, s, vt = np.linalg.svd(cores[k].reshape(p, m * n * q),
                                     full_matrices=False)
            sigmas.append(s)
            cores[k] = vt.reshape(vt.shape[0], m, n, q)
            carry = u * s[None, :]
            cores[k - 1] = np.tensordot(cores[k - 1], carry, axes=([3], [0]))
        sigmas.reverse()
    return SVDForm(orientation, TT(cores), sigmas)


def _truncation_rank(s, budget, max_rank):
    """Smallest kept rank whose discarded tail has norm <= budget."""
    if s.size == 0:
        return 1
    tails = np.sqrt(np.cumsum(s[::-1] ** 2))[::-1]  # tails[r] = ||s[r:]||
    rank = s.size
    for r in range(s.size):
        if tails[r] <= budget:
            rank = r
            break
    rank = max(rank, 1)
    if max_rank is not None:
        rank = min(rank, max_rank)
    return rank


def round_tt(rep: TT, tol=0.0, max_ranks=None) -> TT:
    """Truncate a representation to a relative l2 tolerance or rank cap.

    The tolerance is distributed equally over the internal bonds as
    ``tol / sqrt(L - 1)``, so the aggregate error satisfies
    ``||out - in|| <= tol * ||in||``.  ``max_ranks`` may be an integer or
    a per-bond list and is applied after the tolerance criterion.
    """
    nb = rep.ncores - 1
    if nb == 0:
        return rep.copy()
    if np.isscalar(max_ranks) or max_ranks is None:
        max_ranks = [max_ranks] * nb
    cores = orth_right(rep).cores
    nrm = float(np.linalg.norm(cores[0]))
    budget = tol * nrm / np.sqrt(nb)
    for k in range(nb):
        p, m, n, q = cores[k].shape
        u, s, vt = np.linalg.svd(cores[k].reshape(p * m * n, q),
                                 full_matrices=False)
        r = _truncation_rank(s, budget, max_ranks[k])
        cores[k] = u[:, :r].reshape(p, m, n, r)
        carry = s[:r, None] * vt[:r]
        cores[k + 1] = np.tensordot(carry, cores[k + 1], axes=([1], [0]))
    return TT(cores)


def soft_threshold(rep: TT, alpha: float) -> TT:
    """Sequential soft shrinkage of the unfolding singular values.

    One right-orthogonalization followed by a single left-to-right sweep
    in which each bond's singular values are replaced by
    ``max(sigma - alpha, 0)``.  The resulting operator is non-expansive in
    the l2 norm.
    """
    if alpha < 0:
        raise ValueError("threshold must be nonnegative")
    cores = orth_right(rep).cores
    for k in range(len(cores) - 1):
        p, m, n, q = cores[k].shape
        u, s, vt = np.linalg.svd(cores[k].reshape(p * m * n, q),
                                 full_matrices=False)
        s = np.maximum(s - alpha, 0.0)
        r = max(int(np.count_nonzero(s)), 1)
        cores[k] = u[:, :r].reshape(p, m, n, r)
        carry = s[:r, None] * vt[:r]
        cores[k + 1] = np.tensordot(carry, cores[k + 1], axes=([1], [0]))
    return TT(cores)


def norm2(rep: TT) -> float:
    """l2 (Frobenius) norm of the assembled tensor, via one sweep."""
    cores = [c.copy() for c in rep.cores]
    for k in range(len(cores) - 1, 0, -1):
        carry, cores[k] = _qr_step_right(cores[k])
        cores[k - 1] = np.tensordot(cores[k - 1], carry, axes=([3], [0]))
    return float(np.linalg.norm(cores[0]))


def unfolding_ranks(rep: TT, tol=0.0):
    """Numerical unfolding ranks at a relative tolerance.

    Singular values below ``max(tol, 100 * eps)`` times the largest one at
    the same bond are treated as zero, so with the default tolerance this
    reports exact ranks up to the round-off floor.
    """
    form = tt_svd(rep, "left")
    thresh = max(tol, 100.0 * EPS)
    ranks = []
    for s in form.singular_values:
        if s.size == 0 or s[0] == 0.0:
            ranks.append(0)
        else:
            ranks.append(int(np.count_nonzero(s > thresh * s[0])))
    return ranks
