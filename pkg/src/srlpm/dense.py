"""Dense reference solver: fixed-point iteration and spectral diagnostics.

This is the only module allowed O(n^2) memory. It produces the ground
truth similarity matrix used by the evaluation metrics and validates the
matrix-free kernels.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .graph_io import NormalizedAdjacency

_log = logging.getLogger(__name__)


@dataclass(eq=False)
class DenseSimilarity:
    """Dense symmetric similarity matrix with unit diagonal.

    residual_c is the Chebyshev norm of the last iteration step;
    step_norms records every step for convergence diagnostics.
    """

    values: np.ndarray
    c: float
    iterations: int
    residual_c: float
    converged: bool = True
    step_norms: list[float] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.values.shape[0]


def off_part(x: np.ndarray) -> np.ndarray:
    """Return x with its diagonal zeroed; the input is left unmodified."""
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError(f"off_part expects a square matrix, got shape {x.shape}")
    out = x.copy()
    np.fill_diagonal(out, 0.0)
    return out


def fixed_point_step(s: np.ndarray, adj: NormalizedAdjacency, c: float) -> np.ndarray:
    """One application of the similarity update: c * off(A^T S A) + I."""
    n = adj.n
    if s.shape != (n, n):
        raise ValueError(f"S has shape {s.shape}, expected ({n}, {n})")
    a = adj.columns
    m = (a.T @ s) @ a  # formed once; diagonal overwritten below
    out = c * m
    np.fill_diagonal(out, 1.0)
    return out


def solve_fixed_point(
    adj: NormalizedAdjacency,
    c: float,
    tol: float = 1e-12,
    max_iter: int = 500,
) -> DenseSimilarity:
    """Iterate S <- c*off(A^T S A) + I from S = I until the Chebyshev norm
    of the step falls below tol.

    If max_iter is reached first the result is returned with
    converged=False and a warning is logged.
    """
    if not 0.0 < c < 1.0:
        raise ValueError(f"c must lie in (0, 1), got {c}")
    if tol <= 0.0:
        raise ValueError(f"tol must be positive, got {tol}")
    n = adj.n
    s = np.eye(n)
    steps: list[float] = []
    if n == 0:
        return DenseSimilarity(s, c, 0, 0.0, True, steps)
    for it in range(1, max_iter + 1):
        s_next = fixed_point_step(s, adj, c)
        step = float(np.max(np.abs(s_next - s)))
        steps.append(step)
        s = s_next
        if step <= tol:
            return DenseSimilarity(s, c, it, step, True, steps)
    _log.warning(
        "fixed-point iteration hit max_iter=%d with step %.3e > tol %.3e",
        max_iter, steps[-1], tol,
    )
    return DenseSimilarity(s, c, max_iter, steps[-1], False, steps)


def singular_spectrum(s: np.ndarray, shift_identity: bool = False) -> np.ndarray:
    """Descending singular values of S, or of S - I when shift_identity."""
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {s.shape}")
    x = s - np.eye(s.shape[0]) if shift_identity else s
    return np.linalg.svd(x, compute_uv=False)


def truncated_svd_error(s: np.ndarray, r: int) -> float:
    """Chebyshev norm of (S - I) minus its best rank-r Frobenius approximation."""
    s = np.asarray(s, dtype=np.float64)
    n = s.shape[0]
    if s.ndim != 2 or s.shape[1] != n:
        raise ValueError(f"expected a square matrix, got shape {s.shape}")
    if r < 0 or r > n:
        raise ValueError(f"rank r must lie in [0, {n}], got {r}")
    e = s - np.eye(n)
    if r == 0:
        return float(np.max(np.abs(e))) if n else 0.0
    u, sig, vt = np.linalg.svd(e, full_matrices=False)
    approx = (u[:, :r] * sig[:r]) @ vt[:r]
    return float(np.max(np.abs(e - approx)))
