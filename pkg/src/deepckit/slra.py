"""Structured low-rank approximation of noisy output Hankel matrices.

Alternates a range-space truncation (keep the component in the row space of
the input Hankel, replace the rest by its best low-rank approximation) with
the orthogonal projection onto block-Hankel structure, until the relative
Frobenius change drops below a threshold.  The input Hankel is never modified;
only the output side is denoised.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hankel import hankel_project
from .matlib import _as_matrix, compact_svd, rowspace_projector

__all__ = ["SlraReport", "range_truncate", "iterative_slra"]


@dataclass
class SlraReport:
    """Result of the iterative denoiser.

    ``h_y_star`` is the final iterate after the Hankel projection, so it is
    exactly block-Hankel; at convergence it differs from the preceding
    range-truncation output by at most ``eps`` in relative Frobenius norm.
    """

    h_y_star: np.ndarray
    iterations: int
    final_rel_change: float
    converged: bool
    rel_changes: list[float] = field(default_factory=list)


def range_truncate(h_y, pi2, n_order: int) -> np.ndarray:
    """Keep ``h_y @ pi2`` and the best rank-``n_order`` part of the remainder.

    ``pi2`` must be a symmetric idempotent projector with the same column
    dimension as ``h_y``; the component of ``h_y`` outside its range is
    truncated to its leading ``n_order`` singular triplets.
    """
    h_y = _as_matrix(h_y, "h_y")
    pi2 = _as_matrix(pi2, "pi2")
    if pi2.shape[0] != pi2.shape[1] or pi2.shape[0] != h_y.shape[1]:
        raise ValueError("pi2 must be square with h_y's column dimension")
    if n_order < 0 or n_order > h_y.shape[0]:
        raise ValueError(f"n_order must lie in [0, {h_y.shape[0]}]")
    scale = max(1.0, float(np.abs(pi2).max()))
    if float(np.abs(pi2 @ pi2 - pi2).max()) > 1e-8 * scale:
        raise ValueError("pi2 is not idempotent to 1e-8")
    null_part = h_y - h_y @ pi2
    dec = compact_svd(null_part) if np.any(null_part) else None
    if dec is None or dec.rank == 0:
        low_rank = np.zeros_like(h_y)
    else:
        k = min(n_order, dec.rank)
        low_rank = (dec.w[:, :k] * dec.sigma[:k]) @ dec.v[:, :k].T
    return h_y @ pi2 + low_rank


def iterative_slra(
    h_y,
    h_u,
    n_order: int,
    eps: float = 1e-6,
    max_iter: int = 200,
    block_size: int | None = None,
) -> SlraReport:
    """Denoise an output Hankel while preserving its block-Hankel structure.

    Each pass applies :func:`range_truncate` with the projector onto the row
    space of ``h_u`` and then re-imposes Hankel structure by skew-diagonal
    averaging, stopping once ``||H1 - H2||_F <= eps * ||H1||_F`` where H2 is
    the truncation output and H1 its Hankel projection.

    Args:
        h_y: (p*L) x n_c output Hankel (noisy).
        h_u: input Hankel with the same column count (assumed noise-free; it
            is only read, never altered).
        n_order: rank kept for the component outside the input row space
            (the model order).
        eps: relative Frobenius stopping threshold.
        max_iter: pass limit; on exhaustion the last iterate is returned with
            ``converged=False``.
        block_size: output channels per Hankel block row.  When omitted it is
            inferred from the shared depth of the two Hankels, which is only
            unambiguous when the channel counts differ.
    """
    h_y = _as_matrix(h_y, "h_y")
    h_u = _as_matrix(h_u, "h_u")
    if h_u.shape[1] != h_y.shape[1]:
        raise ValueError("h_u and h_y must have equal column counts")
    if eps <= 0.0 or max_iter < 1:
        raise ValueError("eps must be positive and max_iter >= 1")
    pi2 = rowspace_projector(h_u)
    block = block_size if block_size is not None else _infer_block(
        h_y.shape[0], h_u.shape[0]
    )
    if block < 1 or h_y.shape[0] % block:
        raise ValueError(f"block size {block} does not divide {h_y.shape[0]} rows")
    h1 = h_y.copy()
    rel_changes: list[float] = []
    converged = False
    iters = 0
    for _ in range(max_iter):
        iters += 1
        h2 = range_truncate(h1, pi2, n_order)
        h1 = hankel_project(h2, block)
        denom = float(np.linalg.norm(h1, "fro"))
        diff = float(np.linalg.norm(h1 - h2, "fro"))
        rel = diff / denom if denom > 0.0 else 0.0
        rel_changes.append(rel)
        if diff <= eps * denom:
            converged = True
            break
    return SlraReport(
        h_y_star=h1,
        iterations=iters,
        final_rel_change=rel_changes[-1] if rel_changes else 0.0,
        converged=converged,
        rel_changes=rel_changes,
    )


def _infer_block(y_rows: int, u_rows: int) -> int:
    """Output block size from the largest depth dividing both Hankel row counts."""
    for depth in range(min(y_rows, u_rows), 0, -1):
        if y_rows % depth == 0 and u_rows % depth == 0:
            return y_rows // depth
    return 1
