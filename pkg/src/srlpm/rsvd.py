"""Randomized-SVD fixed-point iterations (benchmark baseline).

Each step applies the off-part fixed-point map to the current rank-r
iterate, M_next = c * off(A^T M A) + B, then compresses M_next back to
rank r by sketching with a fresh Gaussian test matrix, thin QR, and an
SVD of the small projected matrix. All products run through factored or
sparse forms.
"""

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse.linalg as spla

from .graph_io import NormalizedAdjacency
from .kernels import FactoredMatrix, ShiftMatrix, bilinear_diag, build_shift, kernels_for

_log = logging.getLogger(__name__)

_TINY = 1e-300
_COLLAPSE_REL = 1e-13


@dataclass(eq=False)
class SpectralFactor:
    """Truncated spectral form M = Q_left diag(sigma) Q_right^T with
    S ~ I + M; oversample records the sketch surplus p used to build it."""

    q_left: np.ndarray
    sigma: np.ndarray
    q_right: np.ndarray
    oversample: int = 0

    @property
    def n(self) -> int:
        return self.q_left.shape[0]

    @property
    def rank(self) -> int:
        return self.sigma.shape[0]

    def outer_factors(self) -> tuple[np.ndarray, np.ndarray]:
        """M as an explicit outer product (P, Q) with M = P Q."""
        return self.q_left * self.sigma, self.q_right.T

    def row_block(self, start: int, stop: int) -> np.ndarray:
        block = (self.q_left[start:stop] * self.sigma) @ self.q_right.T
        idx = np.arange(start, stop)
        block[np.arange(stop - start), idx] += 1.0
        return block

    def to_dense(self) -> np.ndarray:
        return self.row_block(0, self.n)


def _next_map(
    m_prev: SpectralFactor | None,
    adj: NormalizedAdjacency,
    b: ShiftMatrix,
    c: float,
) -> FactoredMatrix:
    """Implicit M_next = c * off(A^T M_prev A) + B."""
    ws = kernels_for(adj)
    if m_prev is None or m_prev.rank == 0:
        return FactoredMatrix(n=ws.n, lowrank=[], sparse=[(b.mat, 1.0)])
    p, q = m_prev.outer_factors()
    atp = ws.AtX(p)
    qa = ws.XA(q)
    d = bilinear_diag(atp, qa)
    return FactoredMatrix(
        n=ws.n,
        lowrank=[(atp, qa, c)],
        sparse=[(b.mat, 1.0)],
        diag=-c * d,
    )


def sketch_apply(
    m_prev: SpectralFactor | None,
    adj: NormalizedAdjacency,
    b: ShiftMatrix,
    c: float,
    omega: np.ndarray,
) -> np.ndarray:
    """Tall sketch M_next @ Omega without forming M_next."""
    if omega.shape[0] != adj.n:
        raise ValueError(f"Omega has {omega.shape[0]} rows, expected {adj.n}")
    return _next_map(m_prev, adj, b, c).matmat(omega)


def _init_factor(
    b: ShiftMatrix, r: int, rng: np.random.Generator
) -> SpectralFactor:
    """Rank-r truncated SVD of B; the ARPACK start vector comes from the
    seeded stream so the whole run is reproducible."""
    n = b.n
    v0 = rng.standard_normal(n)  # always drawn, keeps the stream aligned
    if b.mat.nnz == 0:
        return SpectralFactor(
            q_left=np.eye(n, r), sigma=np.zeros(r), q_right=np.eye(n, r)
        )
    try:
        u, s, vt = spla.svds(b.mat, k=r, v0=v0)
    except Exception:  # ARPACK can stall on heavily degenerate spectra
        _log.warning("svds failed for the shift matrix; using a dense-free sketch init")
        omega = rng.standard_normal((n, min(n, r + 8)))
        q, _ = np.linalg.qr(b.mat @ omega)
        w, s_all, vt_all = np.linalg.svd((b.mat.T @ q).T, full_matrices=False)
        u = (q @ w)[:, :r]
        s = s_all[:r]
        vt = vt_all[:r]
        return SpectralFactor(q_left=u, sigma=s, q_right=vt.T)
    order = np.argsort(s)[::-1]
    return SpectralFactor(q_left=u[:, order], sigma=s[order], q_right=vt[order].T)


def run_rsvd(
    adj: NormalizedAdjacency,
    c: float,
    r: int,
    p: int = 10,
    k_max: int = 50,
    seed: int = 0,
    stop_tol: float = 1e-6,
    callback: Callable[[dict], None] | None = None,
) -> SpectralFactor:
    """Randomized-SVD iterations on the off-part fixed-point map.

    Starts from the truncated SVD of B; per iteration draws a fresh
    Gaussian Omega (n x (r+p)) from a counter-based Philox stream,
    sketches M_next, projects through the thin QR basis and truncates
    the small SVD to rank r. Stops on k_max, on relative sigma change
    <= stop_tol, or early on rank collapse (sigma_r ~ 0).
    """
    n = adj.n
    if not 0.0 < c < 1.0:
        raise ValueError(f"c must lie in (0, 1), got {c}")
    if r < 1:
        raise ValueError(f"rank must be >= 1, got {r}")
    if p < 0:
        raise ValueError(f"oversampling must be >= 0, got {p}")
    if r + p > n:
        raise ValueError(f"r + p = {r + p} exceeds node count {n}")
    rng = np.random.Generator(np.random.Philox(seed))
    b = build_shift(adj, c)
    current = _init_factor(b, r, rng)
    current.oversample = p
    if float(current.sigma.max(initial=0.0)) == 0.0:
        _log.info("shift matrix is zero: returning the zero factor")
        return current

    for k in range(k_max):
        op = _next_map(current, adj, b, c)
        omega = rng.standard_normal((n, r + p))
        sketch = op.matmat(omega)
        q_basis, _ = np.linalg.qr(sketch)
        small = op.t_matmat(q_basis).T  # (r+p) x n  ==  Q^T M_next
        w, s, vt = np.linalg.svd(small, full_matrices=False)
        keep = min(r, s.shape[0])
        new = SpectralFactor(
            q_left=q_basis @ w[:, :keep],
            sigma=s[:keep],
            q_right=vt[:keep].T,
            oversample=p,
        )
        prev_sigma = current.sigma
        change = float(
            np.linalg.norm(new.sigma - prev_sigma[:keep])
            / max(np.linalg.norm(prev_sigma[:keep]), _TINY)
        )
        current = new
        if callback is not None:
            callback({"iter": k, "sigma_top": float(s[0]), "sigma_change": change})
        if s[0] <= 0.0 or s[keep - 1] <= _COLLAPSE_REL * s[0]:
            achieved = int(np.sum(s[:keep] > _COLLAPSE_REL * max(s[0], _TINY)))
            _log.warning("rank collapse: returning achieved rank %d", achieved)
            current = SpectralFactor(
                q_left=current.q_left[:, :achieved],
                sigma=current.sigma[:achieved],
                q_right=current.q_right[:, :achieved],
                oversample=p,
            )
            break
        if change <= stop_tol:
            break
    return current
