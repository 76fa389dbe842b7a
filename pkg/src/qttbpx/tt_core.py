"""Tensor-train cores, representations, and core products.

A *core* is a dense order-4 numpy array of shape ``(p, m, n, q)`` holding
entries indexed ``(alpha, i, j, beta)``: ``p`` and ``q`` are the left/right
ranks, ``m`` and ``n`` the row/column mode sizes.  Vector cores are matrix
cores with ``n = 1``; a single code path handles both.

A tensor train is an ordered chain of rank-compatible cores with unit
boundary ranks.  Grid vectors of length ``2**(D*L)`` are folded into ``L``
cores of mode size ``2**D`` (one core per dyadic level), so the chain
separates scales rather than coordinates.

Fixed-rank-index matrices of a core are its *blocks* ``B[a, b] -> (m, n)``;
fixed-mode-index matrices are its *slices* ``S[i, j] -> (p, q)``.
"""

from __future__ import annotations

import numpy as np

#: machine epsilon for 64-bit binary floats, used in round-off forecasts
EPS = float(np.finfo(np.float64).eps)

#: default cap on the number of entries materialized by :func:`asm`
DENSE_LIMIT = 2 ** 24


class TT:
    """A tensor train: an ordered chain of order-4 cores.

    Parameters
    ----------
    cores : sequence of ndarray
        Arrays of shape ``(p, m, n, q)``.  Adjacent ranks must chain
        (``q`` of one core equals ``p`` of the next) and the boundary
        ranks must be 1.
    """

    __slots__ = ("cores",)

    def __init__(self, cores):
        cores = [np.asarray(c, dtype=np.float64) for c in cores]
        if not cores:
            raise ValueError("a tensor train needs at least one core")
        for c in cores:
            if c.ndim != 4:
                raise ValueError(f"core has shape {c.shape}, expected 4 axes")
            if not np.all(np.isfinite(c)):
                raise ValueError("core entries must be finite")
        if cores[0].shape[0] != 1 or cores[-1].shape[-1] != 1:
            raise ValueError("boundary ranks must be 1")
        for left, right in zip(cores, cores[1:]):
            if left.shape[-1] != right.shape[0]:
                raise ValueError(
                    f"rank mismatch: {left.shape[-1]} vs {right.shape[0]}")
        self.cores = cores

    @property
    def ncores(self):
        return len(self.cores)

    @property
    def ranks(self):
        """Bond dimensions ``(r_0, ..., r_L)`` including unit boundaries."""
        return [self.cores[0].shape[0]] + [c.shape[-1] for c in self.cores]

    @property
    def mode_rows(self):
        return [c.shape[1] for c in self.cores]

    @property
    def mode_cols(self):
        return [c.shape[2] for c in self.cores]

    @property
    def is_vector(self):
        return all(n == 1 for n in self.mode_cols)

    @property
    def nrows(self):
        out = 1
        for m in self.mode_rows:
            out *= m
        return out

    @property
    def ncols(self):
        out = 1
        for n in self.mode_cols:
            out *= n
        return out

    def copy(self):
        return TT([c.copy() for c in self.cores])

    def __repr__(self):
        modes = "x".join(f"{m}.{n}" for m, n in
                         zip(self.mode_rows, self.mode_cols))
        return f"TT(ranks={self.ranks}, modes=[{modes}])"


# ---------------------------------------------------------------------------
# core products
# ---------------------------------------------------------------------------

def strong_kron(u, v):
    """Strong Kronecker product of two cores.

    The slice of the result at row bits ``(i1, i2)`` and column bits
    ``(j1, j2)`` is ``S_u(i1, j1) @ S_v(i2, j2)``; equivalently the result
    is the "matrix of blocks" product where scalar multiplication is
    replaced by the Kronecker product of blocks.
    """
    u = np.asarray(u)
    v = np.asarray(v)
    p, mu, nu, r = u.shape
    r2, mv, nv, q = v.shape
    if r != r2:
        raise ValueError(f"rank mismatch in strong product: {r} vs {r2}")
    out = np.einsum("aijb,bklc->aikjlc", u, v)
    return out.reshape(p, mu * mv, nu * nv, q)


def mode_prod(a, b):
    """Mode (matrix-multiplication) product of two cores.

    Block ``(a c, b d)`` of the result is ``A_block(a, b) @ B_block(c, d)``;
    ranks multiply.  Realizes matrix-matrix and matrix-vector products of
    tensor trains core by core.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    pa, ma, na, qa = a.shape
    pb, mb, nb, qb = b.shape
    if na != mb:
        raise ValueError(f"mode mismatch in product: {na} vs {mb}")
    out = np.einsum("aijb,cjkd->acikbd", a, b)
    return out.reshape(pa * pb, ma, nb, qa * qb)


def kron_cores(u, v):
    """Kronecker product of two cores: ranks and mode sizes both multiply."""
    u = np.asarray(u)
    v = np.asarray(v)
    pu, mu, nu, qu = u.shape
    pv, mv, nv, qv = v.shape
    out = np.einsum("aijb,ckld->acikjlbd", u, v)
    return out.reshape(pu * pv, mu * mv, nu * nv, qu * qv)


def transpose_core(u):
    """Swap the two mode indices of a core (blockwise transpose)."""
    return np.ascontiguousarray(np.transpose(np.asarray(u), (0, 2, 1, 3)))


def transpose(a: TT) -> TT:
    """Transpose of a tensor-train matrix."""
    return TT([transpose_core(c) for c in a.cores])


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def _fold(cores):
    """Contract a list of cores left to right into ``(p, M, N, q)``."""
    cur = np.asarray(cores[0])
    for c in cores[1:]:
        c = np.asarray(c)
        p, mm, nn, r = cur.shape
        _, m, n, q = c.shape
        t = np.tensordot(cur, c, axes=([3], [0]))  # p, M, N, m, n, q
        cur = t.transpose(0, 1, 3, 2, 4, 5).reshape(p, mm * m, nn * n, q)
    return cur


def asm(rep, limit=DENSE_LIMIT):
    """Assemble a tensor train into a dense array (small sizes only).

    Returns a 1-D array for vectors and a 2-D array for matrices.  The two
    halves of the chain are folded separately and joined at the bond that
    minimizes the intermediate size, which keeps high-rank representations
    assemblable without materializing oversized intermediates.
    """
    cores = rep.cores if isinstance(rep, TT) else [np.asarray(c) for c in rep]
    nrows = int(np.prod([c.shape[1] for c in cores]))
    ncols = int(np.prod([c.shape[2] for c in cores]))
    p0, qL = cores[0].shape[0], cores[-1].shape[-1]
    if nrows * ncols * p0 * qL > limit:
        raise ValueError(
            f"dense assembly of {nrows}x{ncols} exceeds limit {limit}")
    if len(cores) == 1:
        out = cores[0]
    else:
        # pick the cheapest split bond
        sizes = []
        mn_left = 1
        mn_all = nrows * ncols
        for k, c in enumerate(cores[:-1]):
            mn_left *= c.shape[1] * c.shape[2]
            r = c.shape[-1]
            sizes.append(mn_left * r + r * (mn_all // mn_left))
        k = int(np.argmin(sizes)) + 1
        left = _fold(cores[:k])   # (p0, Ml, Nl, r)
        right = _fold(cores[k:])  # (r, Mr, Nr, qL)
        p, ml, nl, r = left.shape
        _, mr, nr, q = right.shape
        t = np.tensordot(left, right, axes=([3], [0]))
        out = t.transpose(0, 1, 3, 2, 4, 5).reshape(p, ml * mr, nl * nr, q)
    out = out[0, :, :, 0] if out.shape[0] == 1 and out.shape[-1] == 1 else out
    if out.ndim == 2 and out.shape[1] == 1 and ncols == 1:
        out = out[:, 0]
    return out


def asm_minus(cores, limit=DENSE_LIMIT):
    """Matricization of a partial chain with the right rank as columns.

    ``asm_minus([])`` is the scalar matrix ``[[1]]``.  For a prefix of a
    representation this is the matrix whose columns span the prefix side
    of the corresponding unfolding.
    """
    if len(cores) == 0:
        return np.ones((1, 1))
    cores = [np.asarray(c) for c in cores]
    total = cores[0].shape[0] * cores[-1].shape[-1]
    for c in cores:
        total *= c.shape[1] * c.shape[2]
    if total > limit:
        raise ValueError("partial assembly exceeds dense limit")
    cur = _fold(cores)
    p, m, n, q = cur.shape
    return cur.reshape(p * m * n, q)


def asm_plus(cores, limit=DENSE_LIMIT):
    """Matricization of a partial chain with the left rank as rows."""
    if len(cores) == 0:
        return np.ones((1, 1))
    cores = [np.asarray(c) for c in cores]
    total = cores[0].shape[0] * cores[-1].shape[-1]
    for c in cores:
        total *= c.shape[1] * c.shape[2]
    if total > limit:
        raise ValueError("partial assembly exceeds dense limit")
    cur = _fold(cores)
    p, m, n, q = cur.shape
    return cur.reshape(p, m * n * q)


# ---------------------------------------------------------------------------
# arithmetic
# ---------------------------------------------------------------------------

def _check_modes(a: TT, b: TT):
    if a.mode_rows != b.mode_rows or a.mode_cols != b.mode_cols:
        raise ValueError(
            f"mode mismatch: {a.mode_rows}x{a.mode_cols} vs "
            f"{b.mode_rows}x{b.mode_cols}")


def add(a: TT, b: TT) -> TT:
    """Sum of two tensor trains; ranks add, boundary cores concatenate."""
    _check_modes(a, b)
    if a.ncores == 1:
        return TT([a.cores[0] + b.cores[0]])
    out = []
    for k, (ca, cb) in enumerate(zip(a.cores, b.cores)):
        pa, m, n, qa = ca.shape
        pb, _, _, qb = cb.shape
        if k == 0:
            c = np.concatenate([ca, cb], axis=3)
        elif k == a.ncores - 1:
            c = np.concatenate([ca, cb], axis=0)
        else:
            c = np.zeros((pa + pb, m, n, qa + qb))
            c[:pa, :, :, :qa] = ca
            c[pa:, :, :, qa:] = cb
        out.append(c)
    return TT(out)


def scale(a: TT, s: float) -> TT:
    """Multiply a tensor train by a scalar (applied to the first core)."""
    cores = [c.copy() for c in a.cores]
    cores[0] = cores[0] * s
    return TT(cores)


def matvec(a: TT, x: TT) -> TT:
    """Apply a tensor-train matrix to a tensor-train vector core-wise."""
    if a.ncores != x.ncores:
        raise ValueError("core count mismatch")
    return TT([mode_prod(ca, cx) for ca, cx in zip(a.cores, x.cores)])


def matmat(a: TT, b: TT) -> TT:
    """Product of two tensor-train matrices core-wise."""
    if a.ncores != b.ncores:
        raise ValueError("core count mismatch")
    return TT([mode_prod(ca, cb) for ca, cb in zip(a.cores, b.cores)])


def hadamard(a: TT, b: TT) -> TT:
    """Entrywise product of two tensor trains; ranks multiply."""
    _check_modes(a, b)
    out = []
    for ca, cb in zip(a.cores, b.cores):
        pa, m, n, qa = ca.shape
        pb, _, _, qb = cb.shape
        c = np.einsum("aijb,cijd->acijbd", ca, cb)
        out.append(c.reshape(pa * pb, m, n, qa * qb))
    return TT(out)


def dot(a: TT, b: TT) -> float:
    """Inner product of two tensor trains by left-to-right contraction."""
    _check_modes(a, b)
    env = np.ones((1, 1))
    for ca, cb in zip(a.cores, b.cores):
        env = np.einsum("ab,aijc,bijd->cd", env, ca, cb, optimize=True)
    return float(env[0, 0])


# ---------------------------------------------------------------------------
# index bijections between dimension-major and level-major orderings
# ---------------------------------------------------------------------------

class LevelOrder:
    """Index bijections between the two natural orderings of a folded grid.

    *Dimension-major*: all ``L`` bits of coordinate 1 (coarse bit first),
    then all bits of coordinate 2, and so on.  *Level-major*: the level-1
    bits of all ``D`` coordinates (coordinate 1 first), then the level-2
    bits, and so on.  The tensor trains built here live in level-major
    order; dense reference constructions are dimension-major.  The maps are
    realized as permutation index arrays, never as matrices.

    For operators that carry an extra per-coordinate tag bit for a subset
    of coordinates (``free_dims``), the dimension-major order places each
    tag bit right after its coordinate's bits, while the level-major order
    appends all tag bits (coordinate-major) after all level groups.
    """

    def __init__(self, D, L, free_dims=()):
        self.D = int(D)
        self.L = int(L)
        self.free_dims = tuple(sorted(free_dims))

    @property
    def size(self):
        return 2 ** (self.D * self.L + len(self.free_dims))

    def dm_from_lm(self):
        """Array ``perm`` with ``perm[p]`` the dimension-major index of the
        level-major index ``p``; for a dense dimension-major array ``v``,
        ``v[perm]`` is its level-major reordering."""
        D, L = self.D, self.L
        free = self.free_dims
        nbits = D * L + len(free)
        p = np.arange(self.size, dtype=np.int64)
        dm = np.zeros_like(p)
        # positions of dimension-major bits, per coordinate
        dm_pos = {}
        pos = 0
        for k in range(D):
            for ell in range(L):
                dm_pos[(k, ell)] = pos
                pos += 1
            if k in free:
                dm_pos[("tag", k)] = pos
                pos += 1
        # level-major bit layout: level groups then trailing tags
        lm_pos = {}
        pos = 0
        for ell in range(L):
            for k in range(D):
                lm_pos[(k, ell)] = pos
                pos += 1
        for k in free:
            lm_pos[("tag", k)] = pos
            pos += 1
        for key, lp in lm_pos.items():
            bit = (p >> (nbits - 1 - lp)) & 1
            dm |= bit << (nbits - 1 - dm_pos[key])
        return dm


# ---------------------------------------------------------------------------
# plain-text serialization
# ---------------------------------------------------------------------------

def save_tt(rep: TT, path):
    """Write a representation in the ``ttrep v1`` plain-text format."""
    with open(path, "w") as fh:
        fh.write(f"ttrep v1 {rep.ncores}\n")
        for c in rep.cores:
            p, m, n, q = c.shape
            fh.write(f"{p} {m} {n} {q}\n")
            fh.write(" ".join(repr(float(x)) for x in c.ravel()))
            fh.write("\n")


def load_tt(path) -> TT:
    """Read a representation written by :func:`save_tt`."""
    with open(path) as fh:
        tokens = fh.read().split()
    if tokens[:2] != ["ttrep", "v1"]:
        raise ValueError("not a ttrep v1 file")
    ncores = int(tokens[2])
    pos = 3
    cores = []
    for _ in range(ncores):
        p, m, n, q = (int(t) for t in tokens[pos:pos + 4])
        pos += 4
        count = p * m * n * q
        data = np.array([float(t) for t in tokens[pos:pos + count]])
        pos += count
        cores.append(data.reshape(p, m, n, q))
    return TT(cores)
