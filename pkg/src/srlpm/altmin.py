"""Alternating minimization for the nonsymmetric form S ~ I + U V^T.

Each inner update is the exact least-squares solution of its subproblem:
with U fixed,

    V_new^T = U^+ (c * off(A^T U V^T A) + B)

evaluated matrix-free, and symmetrically for U with B^T. Gaussian
initialization is mandatory: zero or spectral starts are known to stall.
"""

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .graph_io import NormalizedAdjacency
from .kernels import FactorPair, ShiftMatrix, bilinear_diag, build_shift, kernels_for
from .limits import SolverDivergenceError, ensure_dense_ok

_log = logging.getLogger(__name__)

_TINY = 1e-300


@dataclass
class AltMinConfig:
    rank: int
    outer_iters: int = 20
    inner_iters: int = 5
    seed: int = 0
    stop_tol: float = 1e-6
    c: float = 0.8

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")
        if self.outer_iters < 0 or self.inner_iters < 0:
            raise ValueError("iteration counts must be nonnegative")
        if self.stop_tol < 0:
            raise ValueError(f"stop_tol must be >= 0, got {self.stop_tol}")
        if not 0.0 < self.c < 1.0:
            raise ValueError(f"c must lie in (0, 1), got {self.c}")


def pseudoinverse(u: np.ndarray) -> np.ndarray:
    """Moore-Penrose pseudoinverse of a tall n x r factor via thin SVD.

    Rank-deficient inputs fall back to the minimum-norm pseudoinverse
    (small singular values zeroed) and the event is logged.
    """
    if u.ndim != 2 or u.shape[0] < u.shape[1]:
        raise ValueError(f"expected a tall matrix, got shape {u.shape}")
    left, sig, right_t = np.linalg.svd(u, full_matrices=False)
    cutoff = max(u.shape) * np.finfo(np.float64).eps * (sig[0] if sig.size else 0.0)
    keep = sig > cutoff
    if not np.all(keep):
        _log.warning(
            "pseudoinverse: factor numerically rank-deficient (%d/%d kept)",
            int(keep.sum()), sig.size,
        )
    inv = np.where(keep, 1.0 / np.where(keep, sig, 1.0), 0.0)
    return (right_t.T * inv) @ left.T


def _ls_update(
    fixed: np.ndarray,
    fixed_pinv: np.ndarray,
    moving: np.ndarray,
    adj: NormalizedAdjacency,
    shift,
    c: float,
) -> np.ndarray:
    """fixed_pinv (c * off(A^T fixed moving^T A) + shift), transposed back.

    off(P Q) is contracted against fixed_pinv through the r-dimensional
    bottleneck: pinv @ off(PQ) = (pinv P) Q - pinv * diag(PQ).
    """
    ws = kernels_for(adj)
    n, r = fixed.shape
    if moving.shape != (n, r):
        raise ValueError(f"factor shape {moving.shape} does not match {(n, r)}")
    if fixed_pinv.shape != (r, n):
        raise ValueError(f"pseudoinverse shape {fixed_pinv.shape} != {(r, n)}")
    p = ws.AtX(fixed)               # n x r
    q = ws.AtX(moving).T            # moving^T A, r x n
    d = bilinear_diag(p, q)
    new_t = c * ((fixed_pinv @ p) @ q)
    new_t -= c * (fixed_pinv * d[None, :])
    new_t += (shift.T @ fixed_pinv.T).T
    return new_t.T


def altmin_update_V(
    u_fix: np.ndarray,
    u_fix_pinv: np.ndarray,
    v: np.ndarray,
    adj: NormalizedAdjacency,
    b: ShiftMatrix,
    c: float,
) -> np.ndarray:
    """Exact minimizer of || U_fix V_new^T - (c off(A^T U_fix V^T A) + B) ||_F."""
    out = _ls_update(u_fix, u_fix_pinv, v, adj, b.mat, c)
    if not np.all(np.isfinite(out)):
        raise SolverDivergenceError("V update produced non-finite values")
    return out


def altmin_update_U(
    v_fix: np.ndarray,
    v_fix_pinv: np.ndarray,
    u: np.ndarray,
    adj: NormalizedAdjacency,
    b: ShiftMatrix,
    c: float,
) -> np.ndarray:
    """Mirror of the V update with roles swapped and B transposed."""
    out = _ls_update(v_fix, v_fix_pinv, u, adj, b.mat.T, c)
    if not np.all(np.isfinite(out)):
        raise SolverDivergenceError("U update produced non-finite values")
    return out


def run_altmin(
    adj: NormalizedAdjacency,
    cfg: AltMinConfig,
    callback: Callable[[dict], None] | None = None,
    with_exact_residual: bool = False,
) -> FactorPair:
    """Nested alternating minimization.

    Per outer iteration: inner_iters V-updates with U fixed, then
    inner_iters U-updates with the new V fixed; the pseudoinverse is
    recomputed once per inner block. Stops early when both relative
    factor changes drop below stop_tol. callback receives one dict per
    outer iteration. with_exact_residual adds the dense O(n^2) residual
    to the diagnostics (cap-guarded).
    """
    n = adj.n
    r = cfg.rank
    if r > n:
        raise ValueError(f"rank {r} exceeds node count {n}")
    if with_exact_residual:
        ensure_dense_ok(n, "altmin exact residual diagnostic")
    b = build_shift(adj, cfg.c)
    rng = np.random.default_rng(cfg.seed)
    u = rng.standard_normal((n, r))
    v = rng.standard_normal((n, r))
    for m in range(cfg.outer_iters):
        u_prev, v_prev = u, v
        u_pinv = pseudoinverse(u)
        for _ in range(cfg.inner_iters):
            v = altmin_update_V(u, u_pinv, v, adj, b, cfg.c)
        v_pinv = pseudoinverse(v)
        for _ in range(cfg.inner_iters):
            u = altmin_update_U(v, v_pinv, u, adj, b, cfg.c)
        du = float(np.linalg.norm(u - u_prev) / max(np.linalg.norm(u_prev), _TINY))
        dv = float(np.linalg.norm(v - v_prev) / max(np.linalg.norm(v_prev), _TINY))
        if callback is not None:
            row = {"iter": m, "du_rel": du, "dv_rel": dv}
            if with_exact_residual:
                row["residual_f"] = _exact_residual(u, v, adj, b, cfg.c)
            callback(row)
        if max(du, dv) <= cfg.stop_tol:
            break
    return FactorPair(U=u, V=v)


def _exact_residual(u, v, adj, b, c) -> float:
    """Dense || UV^T - c off(A^T UV^T A) - B ||_F (diagnostic only)."""
    m = u @ v.T
    a = adj.columns
    g = (a.T @ m) @ a
    np.fill_diagonal(g, 0.0)
    res = m - c * g - b.mat.toarray()
    return float(np.linalg.norm(res))
