"""Quantized tensor-train toolkit for multilevel-preconditioned elliptic
operators: core calculus, orthogonalization and rounding, representation
conditioning diagnostics, closed-form operator constructions, and a
soft-thresholding iterative solver."""

from . import conditioning, operators, solver  # noqa: F401
from .tt_core import (  # noqa: F401
    EPS,
    TT,
    LevelOrder,
    add,
    asm,
    asm_minus,
    asm_plus,
    dot,
    hadamard,
    kron_cores,
    load_tt,
    matmat,
    matvec,
    mode_prod,
    save_tt,
    scale,
    strong_kron,
    transpose,
    transpose_core,
)
from .tt_linalg import (  # noqa: F401
    SVDForm,
    norm2,
    orth_left,
    orth_right,
    round_tt,
    soft_threshold,
    tt_svd,
    unfolding_ranks,
)
