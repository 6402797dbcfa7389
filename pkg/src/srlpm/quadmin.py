"""Newton iteration on grad f(U) = 0 for f(U) = || phi(U U^T) - B ||_F^2.

The Newton system J(U)[X] = grad f(U) is solved by a matrix-free GMRES
over the space of n x r matrices with the Frobenius inner product; the
Hessian is never materialized. Produces the symmetric low-parametric
form S ~ I + off(U U^T).
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .graph_io import NormalizedAdjacency
from .kernels import SymmetricFactor, apply_phi_star_sparse, build_shift, ffmp, kernels_for
from .limits import SolverDivergenceError, ensure_dense_ok

_log = logging.getLogger(__name__)

_TINY = 1e-300
_STEP_STOP_REL = 1e-6
_GROWTH_ALARM = 10.0
_MAX_HALVINGS = 10


@dataclass
class QuadMinConfig:
    rank: int
    newton_iters: int = 30
    gmres_iters: int = 15
    gmres_tol: float = 1e-6
    seed: int = 0
    init_scale: float | None = None  # default 1/sqrt(rank)
    c: float = 0.8
    residual_mode: str = "none"  # "none" | "exact-dense"

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")
        if self.gmres_iters < 1:
            raise ValueError(f"gmres_iters must be >= 1, got {self.gmres_iters}")
        if self.init_scale is None:
            self.init_scale = 1.0 / math.sqrt(self.rank)
        if self.init_scale <= 0:
            raise ValueError(f"init_scale must be > 0, got {self.init_scale}")
        if not 0.0 < self.c < 1.0:
            raise ValueError(f"c must lie in (0, 1), got {self.c}")
        if self.residual_mode not in ("none", "exact-dense"):
            raise ValueError(f"unknown residual_mode {self.residual_mode!r}")


@dataclass
class LinearOperatorHandle:
    """Matrix-free linear map on n x r matrices."""

    apply: Callable[[np.ndarray], np.ndarray]
    dims: tuple[int, int]


def residual_f(
    u: np.ndarray, adj: NormalizedAdjacency, b, c: float
) -> float:
    """f(U) = || phi(U U^T) - B ||_F^2 by dense evaluation.

    Diagnostic-only O(n^2) path, refused above the dense cap.
    """
    n = adj.n
    ensure_dense_ok(n, "residual_f (use residual_mode='none' above the cap)")
    bmat = b.mat if hasattr(b, "mat") else b
    m = u @ u.T
    np.fill_diagonal(m, 0.0)
    a = adj.columns
    g = (a.T @ m) @ a
    np.fill_diagonal(g, 0.0)
    phi_m = m - c * g
    diff = phi_m - (bmat.toarray() if sp.issparse(bmat) else np.asarray(bmat))
    return float(np.sum(diff * diff))


def gradient(
    u: np.ndarray, adj: NormalizedAdjacency, b_star: sp.sparray, c: float
) -> np.ndarray:
    """grad f(U) = 4 (ffmp(U, U^T, U) - phi_star(B) U)."""
    return 4.0 * (ffmp(u, u.T, u, adj, c) - b_star @ u)


def jacobian_apply(
    u: np.ndarray,
    x: np.ndarray,
    adj: NormalizedAdjacency,
    b_star: sp.sparray,
    c: float,
) -> np.ndarray:
    """Hessian action J(U)[X], linear in X, never materialized."""
    if x.shape != u.shape:
        raise ValueError(f"direction shape {x.shape} != factor shape {u.shape}")
    return 4.0 * (
        ffmp(x, u.T, u, adj, c)
        + ffmp(u, x.T, u, adj, c)
        + ffmp(u, u.T, x, adj, c)
        - b_star @ x
    )


def gmres_solve(
    op: LinearOperatorHandle,
    rhs: np.ndarray,
    iters: int,
    tol: float,
) -> tuple[np.ndarray, float]:
    """Arnoldi GMRES (no restart) from a zero initial guess.

    Operates on the vectorized n*r space with the Frobenius inner
    product; op need not be symmetric or definite. Returns the final
    iterate and its true relative residual ||op(x) - rhs||_F / ||rhs||_F.
    """
    shape = rhs.shape
    b = rhs.ravel()
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return np.zeros(shape), 0.0

    m = iters
    basis = np.empty((m + 1, b.size))
    hess = np.zeros((m + 1, m))
    cos_r = np.zeros(m)
    sin_r = np.zeros(m)
    g = np.zeros(m + 1)
    basis[0] = b / b_norm
    g[0] = b_norm

    k = 0
    for j in range(m):
        # copies guard against operators that return views of their input
        w = np.array(
            op.apply(basis[j].reshape(shape).copy()), dtype=np.float64
        ).ravel()
        w_scale = float(np.linalg.norm(w))
        for i in range(j + 1):
            hess[i, j] = w @ basis[i]
            w -= hess[i, j] * basis[i]
        # one re-orthogonalization pass keeps the basis clean near breakdown
        for i in range(j + 1):
            corr = w @ basis[i]
            hess[i, j] += corr
            w -= corr * basis[i]
        h_next = float(np.linalg.norm(w))
        hess[j + 1, j] = h_next
        happy = h_next <= 1e-12 * max(w_scale, _TINY)
        if not happy:
            basis[j + 1] = w / h_next
        for i in range(j):
            hi, hj = hess[i, j], hess[i + 1, j]
            hess[i, j] = cos_r[i] * hi + sin_r[i] * hj
            hess[i + 1, j] = -sin_r[i] * hi + cos_r[i] * hj
        denom = math.hypot(hess[j, j], hess[j + 1, j])
        if denom == 0.0:
            # operator annihilated this direction; drop the dead column
            k = j
            break
        cos_r[j] = hess[j, j] / denom
        sin_r[j] = hess[j + 1, j] / denom
        hess[j, j] = denom
        hess[j + 1, j] = 0.0
        g[j + 1] = -sin_r[j] * g[j]
        g[j] = cos_r[j] * g[j]
        k = j + 1
        if happy or abs(g[j + 1]) / b_norm <= tol:
            break

    y = np.linalg.solve(np.triu(hess[:k, :k]), g[:k]) if k else np.zeros(0)
    x = (basis[:k].T @ y).reshape(shape) if k else np.zeros(shape)
    achieved = float(
        np.linalg.norm(op.apply(x).ravel() - b) / b_norm
    )
    return x, achieved


def run_quadmin(
    adj: NormalizedAdjacency,
    cfg: QuadMinConfig,
    callback: Callable[[dict], None] | None = None,
) -> SymmetricFactor:
    """Newton loop: solve J(U)[X] = grad f(U), step U <- U - X.

    A minimal safeguard halves the step (up to 10 times) on non-finite
    iterates, and, when residual_mode='exact-dense', on more-than-10x
    growth of f. Stops after newton_iters steps or when the relative
    step size falls below 1e-6. callback receives one dict per step.
    """
    n = adj.n
    r = cfg.rank
    if r > n:
        raise ValueError(f"rank {r} exceeds node count {n}")
    track_f = cfg.residual_mode == "exact-dense"
    if track_f:
        ensure_dense_ok(n, "residual_mode='exact-dense'")
    kernels_for(adj)
    b = build_shift(adj, cfg.c)
    b_star = apply_phi_star_sparse(b.mat, adj, cfg.c)
    rng = np.random.default_rng(cfg.seed)
    u = cfg.init_scale * rng.standard_normal((n, r))
    f_prev = residual_f(u, adj, b, cfg.c) if track_f else None

    for k in range(cfg.newton_iters):
        grad = gradient(u, adj, b_star, cfg.c)
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm == 0.0:
            break
        handle = LinearOperatorHandle(
            apply=lambda x, u=u: jacobian_apply(u, x, adj, b_star, cfg.c),
            dims=(n, r),
        )
        step, gmres_res = gmres_solve(handle, grad, cfg.gmres_iters, cfg.gmres_tol)

        scale = 1.0
        accepted = None
        f_new = None
        for _ in range(_MAX_HALVINGS + 1):
            candidate = u - scale * step
            if np.all(np.isfinite(candidate)):
                if not track_f:
                    accepted = candidate
                    break
                f_new = residual_f(candidate, adj, b, cfg.c)
                if f_new <= _GROWTH_ALARM * max(f_prev, _TINY):
                    accepted = candidate
                    break
            scale *= 0.5
        if accepted is None:
            raise SolverDivergenceError(
                f"Newton step rejected after {_MAX_HALVINGS} halvings at iter {k}",
                last_finite=SymmetricFactor(U=u),
            )
        step_norm = scale * float(np.linalg.norm(step))
        u = accepted
        if track_f:
            f_prev = f_new
        if callback is not None:
            callback({
                "iter": k,
                "grad_norm": grad_norm,
                "step_norm": step_norm,
                "gmres_residual": gmres_res,
                "f_exact": f_new if track_f else None,
            })
        if step_norm <= _STEP_STOP_REL * max(float(np.linalg.norm(u)), _TINY):
            break
    return SymmetricFactor(U=u)
