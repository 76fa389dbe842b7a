"""Soft-thresholding iteration for symmetric positive definite systems in
tensor-train format, with rank-controlled operator applications.

The iteration is a damped Richardson step followed by soft shrinkage of
the unfolding singular values; the threshold is halved adaptively once
the step size stalls relative to the residual.  Operators may be supplied
as a single matrix representation, as a list of square-root factors
(residuals then use the factored form with recompression after each
factor application), or as an explicitly symmetrized factorization.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .tt_core import TT, EPS, add, matvec, scale, transpose
from .tt_linalg import norm2, orth_right, round_tt, soft_threshold

#: settings of the one-off spectral estimation
ESTIMATE_ROUNDING = 1e-8
ESTIMATE_ITERS = 100
ESTIMATE_TOL = 1e-6

#: safety factor by which the local truncation threshold inside the
#: zip-up matrix application undercuts the requested tolerance
ZIPUP_GUARD = 1e-2


# ---------------------------------------------------------------------------
# rank-controlled matrix application
# ---------------------------------------------------------------------------

def matvec_rounded(a: TT, v: TT, tol: float) -> TT:
    """Apply a tensor-train matrix with on-the-fly rank truncation.

    A single left-to-right zip-up sweep forms the product cores and
    truncates each bond by a local SVD at a guarded fraction of ``tol``
    before the full product rank can build up; a final exact rounding at
    relative tolerance ``tol`` restores a uniform error level.  Far
    cheaper than forming the exact product when the operator and vector
    ranks are both large.
    """
    if a.ncores != v.ncores:
        raise ValueError("core count mismatch")
    v = orth_right(v)
    carry = np.ones((1, 1, 1))
    cores = []
    last = a.ncores - 1
    for k, (ac, vc) in enumerate(zip(a.cores, v.cores)):
        t = np.einsum("rac,aijb,cjkd->rikbd", carry, ac, vc, optimize=True)
        r, m, n, qa, qv = t.shape
        if k == last:
            cores.append(t.reshape(r, m, n, 1))
            break
        u, s, vt = np.linalg.svd(t.reshape(r * m * n, qa * qv),
                                 full_matrices=False)
        snorm = float(np.linalg.norm(s))
        budget = ZIPUP_GUARD * tol * snorm
        tails = np.sqrt(np.cumsum(s[::-1] ** 2))[::-1]
        rank = int(np.searchsorted(-tails, -budget))
        rank = max(min(rank, s.size), 1)
        cores.append(u[:, :rank].reshape(r, m, n, rank))
        carry = (s[:rank, None] * vt[:rank]).reshape(rank, qa, qv)
    return round_tt(TT(cores), tol)


# ---------------------------------------------------------------------------
# operator abstraction
# ---------------------------------------------------------------------------

class SymmetricFactor:
    """Operator given as ``F^T M F`` with an optional middle matrix.

    ``factor`` and ``middle`` are tensor-train matrices; the application
    recompresses after each stage.  This keeps the representation ranks
    at the factor level even when the combined operator would be dense in
    rank, e.g. for strongly oscillatory coefficients.
    """

    def __init__(self, factor: TT, middle: TT = None):
        self.factor = factor
        self.factor_t = transpose(factor)
        self.middle = middle

    def apply(self, v: TT, tol: float) -> TT:
        w = matvec_rounded(self.factor, v, tol)
        if self.middle is not None:
            w = matvec_rounded(self.middle, w, tol)
        return matvec_rounded(self.factor_t, w, tol)


def _as_apply(op):
    """Normalize an operator argument to an ``apply(v, tol)`` callable."""
    if isinstance(op, TT):
        return lambda v, tol: matvec_rounded(op, v, tol)
    if isinstance(op, SymmetricFactor):
        return op.apply
    if isinstance(op, (list, tuple)):
        factors = [SymmetricFactor(theta) for theta in op]

        def apply_sum(v, tol):
            total = None
            for f in factors:
                term = f.apply(v, tol)
                total = term if total is None else add(total, term)
            return round_tt(total, tol)

        return apply_sum
    raise TypeError("operator must be a TT matrix, a factor list, or a "
                    "SymmetricFactor")


def _zeros_like(v: TT) -> TT:
    return TT([np.zeros((1, m, n, 1))
               for m, n in zip(v.mode_rows, v.mode_cols)])


def residual(op, u: TT, g: TT, tol: float):
    """Residual representation ``op(u) - g`` rounded at relative ``tol``,
    and its norm."""
    apply = _as_apply(op)
    res = round_tt(add(apply(u, tol), scale(g, -1.0)), tol)
    return res, norm2(res)


# ---------------------------------------------------------------------------
# spectral estimation
# ---------------------------------------------------------------------------

def _power_lambda(apply, v0: TT, shift: float = 0.0):
    """Largest eigenvalue of ``shift*I - op`` (or of ``op`` if no shift)."""
    v = v0
    lam = 0.0
    for _ in range(ESTIMATE_ITERS):
        w = apply(v, ESTIMATE_ROUNDING)
        if shift:
            w = round_tt(add(scale(v, shift), scale(w, -1.0)),
                         ESTIMATE_ROUNDING)
        new = norm2(w)
        if new == 0.0:
            return 0.0, v
        v = TT([w.cores[0] / new] + [c.copy() for c in w.cores[1:]])
        if abs(new - lam) <= ESTIMATE_TOL * new:
            return new, v
        lam = new
    return lam, v


def estimate_step(op, template: TT, seed: int = 0):
    """One-off estimation of the damping parameters.

    Power iteration on the operator gives the largest eigenvalue; a
    second, shifted power iteration gives the smallest.  Returns
    ``(omega, xi, bbar)``: the Richardson step, a safety-inflated
    contraction bound, and the operator norm bound.  Falls back to a
    conservative step if the shifted iteration degenerates.
    """
    apply = _as_apply(op)
    rng = np.random.default_rng(seed)
    v0 = TT([c / np.linalg.norm(c) for c in
             (rng.standard_normal((1, m, n, 1))
              for m, n in zip(template.mode_rows, template.mode_cols))])
    lam_max, warm = _power_lambda(apply, v0)
    bbar = lam_max
    lam2, _ = _power_lambda(apply, v0, shift=bbar)
    lam_min = bbar - lam2
    if not np.isfinite(lam_min) or lam_min <= 0 or lam_min >= lam_max:
        omega = 1.0 / bbar
        xi = min(1.0 - 1e-3, 1.0 - max(lam_min, 0.0) / bbar)
        return omega, xi, bbar
    omega = 2.0 / (lam_max + lam_min)
    xi = min((lam_max - lam_min) / (lam_max + lam_min) * 1.05, 1.0 - 1e-6)
    return omega, xi, bbar


# ---------------------------------------------------------------------------
# the iteration
# ---------------------------------------------------------------------------

@dataclass
class SolverConfig:
    """Parameters of the soft-thresholding iteration.

    Unset spectral parameters (``omega``, ``xi``, ``bbar``) are estimated
    once before the first step.  ``target_residual`` is an absolute l2
    residual norm.  ``residual_rounding_tol`` (relative) controls the
    recompression of operator applications; by default it is chosen so
    the rounding error stays two orders below the target.
    """

    omega: float = None
    xi: float = None
    bbar: float = None
    target_residual: float = 1e-12
    max_iterations: int = 200
    residual_rounding_tol: float = None
    alpha0_divisor: float = 2.0
    max_rank: int = None
    seed: int = 0


@dataclass
class SolverState:
    """Per-iteration record of a solver run."""

    iterations: int = 0
    residuals: list = field(default_factory=list)
    alphas: list = field(default_factory=list)
    max_ranks: list = field(default_factory=list)
    wall_seconds: list = field(default_factory=list)
    converged: bool = False
    reason: str = ""

    def record(self, res, alpha, rank, wall):
        self.iterations += 1
        self.residuals.append(res)
        self.alphas.append(alpha)
        self.max_ranks.append(rank)
        self.wall_seconds.append(wall)

    def write_trace(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "residual", "alpha", "max_rank",
                             "wall_seconds"])
            for i in range(self.iterations):
                writer.writerow([i + 1, f"{self.residuals[i]:.17g}",
                                 f"{self.alphas[i]:.17g}",
                                 self.max_ranks[i],
                                 f"{self.wall_seconds[i]:.17g}"])


def stsolve(op, g: TT, cfg: SolverConfig = None):
    """Soft-thresholding iteration for ``op(u) = g``.

    Each step dampens the residual and shrinks the unfolding singular
    values by the current threshold, which is halved once the step length
    falls below the residual-proportional stalling criterion.  Stops when
    the residual norm reaches the target, the threshold under-runs the
    round-off floor, or the iteration budget is exhausted.  Returns the
    iterate and the run record.
    """
    cfg = SolverConfig() if cfg is None else cfg
    apply = _as_apply(op)
    gnorm = norm2(g)
    u = _zeros_like(g)
    state = SolverState()
    if gnorm == 0.0:
        state.converged = True
        state.reason = "zero right-hand side"
        return u, state
    omega, xi, bbar = cfg.omega, cfg.xi, cfg.bbar
    if omega is None or xi is None or bbar is None:
        omega, xi, bbar = estimate_step(op, g, seed=cfg.seed)
    rtol = cfg.residual_rounding_tol
    if rtol is None:
        rtol = max(0.01 * cfg.target_residual / gnorm, 100.0 * EPS)
    alpha = omega * gnorm / (cfg.alpha0_divisor - 1.0)
    stall = (1.0 - xi) / (xi * bbar)
    res = round_tt(scale(g, -1.0), rtol)
    resnorm = gnorm
    start = time.monotonic()
    for _ in range(cfg.max_iterations):
        if resnorm <= cfg.target_residual:
            state.converged = True
            state.reason = "residual target reached"
            break
        if alpha < EPS * gnorm:
            state.reason = "threshold floor reached"
            break
        w = add(u, scale(res, -omega))
        unew = soft_threshold(w, alpha)
        unorm = norm2(unew)
        if unorm > 0.0:
            unew = round_tt(unew, 0.1 * alpha / unorm,
                            max_ranks=cfg.max_rank)
        rnew = round_tt(add(apply(unew, rtol), scale(g, -1.0)), rtol)
        rnew_norm = norm2(rnew)
        if not np.isfinite(rnew_norm):
            raise FloatingPointError("residual norm is not finite")
        step = norm2(add(unew, scale(u, -1.0)))
        if step <= stall * rnew_norm:
            alpha *= 0.5
        u, res, resnorm = unew, rnew, rnew_norm
        state.record(resnorm, alpha, max(u.ranks), time.monotonic() - start)
    else:
        state.reason = "iteration budget exhausted"
    if resnorm <= cfg.target_residual:
        state.converged = True
        state.reason = "residual target reached"
    return u, state


def solve_diagonal(c: TT, tol: float = 1e-13, max_iterations: int = 400):
    """Entry-wise reciprocal of a uniformly positive vector.

    Solves ``diag(c) a = 1`` with the thresholding iteration to relative
    l2 residual ``tol``.  Used to turn cell values of ``1/a`` into a
    low-rank representation of a diffusion coefficient ``a``.
    """
    from .operators import diag_operator, ones_tt

    ones = TT([np.ones((1, m, 1, 1)) for m in c.mode_rows])
    gnorm = norm2(ones)
    cfg = SolverConfig(target_residual=tol * gnorm,
                       max_iterations=max_iterations,
                       residual_rounding_tol=max(0.001 * tol, 10.0 * EPS))
    a, state = stsolve(diag_operator(c), ones, cfg)
    if not state.converged:
        raise RuntimeError("diagonal solve did not reach the tolerance; "
                           "is the coefficient uniformly positive?")
    return a
