"""Evaluation of factored approximations against the dense reference.

Chebyshev-norm error streams the approximation in row blocks so the
reference matrix is the only O(n^2) object; the top-N conservation score
psi averages, over nodes, the fraction of the reference's N most similar
nodes that the approximation preserves.
"""

import json
import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .dense import DenseSimilarity
from .graph_io import NormalizedAdjacency
from .kernels import FactorPair, ShiftMatrix, SymmetricFactor, bilinear_diag, kernels_for
from .limits import dense_cap

_log = logging.getLogger(__name__)

_BLOCK_BYTES = 64 * 1024 * 1024  # row-block budget for streamed reconstruction

CSV_FIELDS = ["dataset", "solver", "rank", "seed", "c", "chebyshev_error", "psi10", "wall_time_s"]


@dataclass
class EvalReport:
    """One solver-run evaluation; psi maps N -> score in [0, 1]."""

    chebyshev_error: float
    psi: dict[int, float]
    rank: int
    solver: str
    dataset: str
    seed: int
    c: float
    wall_time_s: float = 0.0

    def to_json_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "solver": self.solver,
            "rank": self.rank,
            "seed": self.seed,
            "c": self.c,
            "chebyshev_error": self.chebyshev_error,
            "psi": {str(n): v for n, v in self.psi.items()},
            "wall_time_s": self.wall_time_s,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)

    def csv_row(self) -> list:
        return [
            self.dataset, self.solver, self.rank, self.seed, self.c,
            self.chebyshev_error, self.psi.get(10, ""), self.wall_time_s,
        ]


class ResidualEstimate(NamedTuple):
    """Frobenius residual; standard_error is None on the exact path."""

    value: float
    standard_error: float | None
    sampled: bool


def _block_rows(n: int) -> int:
    return max(1, min(n, _BLOCK_BYTES // (8 * max(n, 1))))


def chebyshev_error(s_ref: DenseSimilarity, approx) -> float:
    """max |S_ref - S_approx| over all entries, streaming row blocks.

    approx is any factor object exposing n and row_block(start, stop).
    """
    n = s_ref.n
    if approx.n != n:
        raise ValueError(f"size mismatch: reference n={n}, approximation n={approx.n}")
    if n == 0:
        return 0.0
    block = _block_rows(n)
    worst = 0.0
    for start in range(0, n, block):
        stop = min(start + block, n)
        diff = np.abs(s_ref.values[start:stop] - approx.row_block(start, stop))
        worst = max(worst, float(diff.max()))
    return worst


def top_n_sets(row: np.ndarray, self_index: int, n_top: int) -> set[int]:
    """Indices of the n_top largest scores excluding self_index.

    Ties break by ascending node index, identically for reference and
    approximation rows, so psi is deterministic.
    """
    row = np.asarray(row)
    n = row.shape[0]
    if n_top > n - 1:
        raise ValueError(f"top-N of {n_top} impossible with {n} nodes (need N <= n-1)")
    order = np.argsort(-row, kind="stable")  # stable: ties stay index-ascending
    order = order[order != self_index]
    return set(int(i) for i in order[:n_top])


def psi(s_ref: DenseSimilarity, approx, n_top: int) -> float:
    """Average preserved fraction of each node's top-N similar nodes."""
    n = s_ref.n
    if approx.n != n:
        raise ValueError(f"size mismatch: reference n={n}, approximation n={approx.n}")
    if n_top > n - 1:
        raise ValueError(f"top-N of {n_top} impossible with {n} nodes (need N <= n-1)")
    block = _block_rows(n)
    hits = 0
    for start in range(0, n, block):
        stop = min(start + block, n)
        ref_rows = s_ref.values[start:stop]
        app_rows = approx.row_block(start, stop)
        ref_top = _block_top(ref_rows, start, n_top)
        app_top = _block_top(app_rows, start, n_top)
        for i in range(stop - start):
            hits += len(set(ref_top[i]) & set(app_top[i]))
    return hits / (n_top * n)


def _block_top(rows: np.ndarray, start: int, n_top: int) -> np.ndarray:
    """Per-row top-N index arrays with the shared tie-break rule."""
    b, n = rows.shape
    order = np.argsort(-rows, axis=1, kind="stable")
    self_idx = (np.arange(start, start + b))[:, None]
    keep = order != self_idx
    return order[keep].reshape(b, n - 1)[:, :n_top]


def _offpart_factors(factor):
    """(L, R, dvec) with the off-identity part M = L @ R - diag(dvec)."""
    if isinstance(factor, FactorPair):
        return factor.U, factor.V.T, None
    if isinstance(factor, SymmetricFactor):
        return factor.U, factor.U.T, bilinear_diag(factor.U, factor.U.T)
    outer = getattr(factor, "outer_factors", None)
    if outer is not None:
        left, right = outer()
        return left, right, None
    raise TypeError(f"unsupported factor type {type(factor).__name__}")


def frobenius_residual(
    factor,
    adj: NormalizedAdjacency,
    b: ShiftMatrix,
    c: float,
    samples: int = 100_000,
    seed: int = 0,
) -> ResidualEstimate:
    """|| M - c*off(A^T M A) - B ||_F for the factor's off-part M.

    Exact dense evaluation under the dense cap; above it, an unbiased
    estimate of the squared norm from uniformly sampled entries, with
    the delta-method standard error of the reported norm.
    """
    n = adj.n
    if factor.n != n:
        raise ValueError(f"size mismatch: graph n={n}, factor n={factor.n}")
    if n <= dense_cap():
        m = factor.row_block(0, n) - np.eye(n)
        a = adj.columns
        g = (a.T @ m) @ a
        np.fill_diagonal(g, 0.0)
        res = m - c * g - b.mat.toarray()
        return ResidualEstimate(float(np.linalg.norm(res)), None, False)
    return _sampled_residual(factor, adj, b, c, samples, seed)


def _sampled_residual(factor, adj, b, c, samples, seed) -> ResidualEstimate:
    n = adj.n
    ws = kernels_for(adj)
    left, right, dvec = _offpart_factors(factor)
    at_left = ws.AtX(left)
    right_a = ws.XA(right)
    corr = None
    if dvec is not None:
        # A^T diag(dvec) A enters every sampled entry of off(A^T M A)
        corr = (ws.at_csr @ (sp.diags_array(dvec, format="csr") @ ws.a_csr)).todok()
    b_dok = b.mat.todok()

    rng = np.random.default_rng(seed)
    ii = rng.integers(0, n, size=samples)
    jj = rng.integers(0, n, size=samples)
    m_ij = np.einsum("ij,ij->i", left[ii], right.T[jj])
    g_ij = np.einsum("ij,ij->i", at_left[ii], right_a.T[jj])
    vals = np.zeros(samples)
    diag_mask = ii == jj
    for k in np.nonzero(~diag_mask)[0]:
        i, j = int(ii[k]), int(jj[k])
        g = g_ij[k] - (corr[i, j] if corr is not None else 0.0)
        vals[k] = m_ij[k] - c * g - b_dok[i, j]
    # residual on the diagonal reduces to M_ii: off() zeroes it and B_ii = 0
    if dvec is not None:
        vals[diag_mask] = m_ij[diag_mask] - dvec[ii[diag_mask]]
    else:
        vals[diag_mask] = m_ij[diag_mask]

    sq = (n * n) * vals**2
    mean_sq = float(np.mean(sq))
    se_sq = float(np.std(sq, ddof=1) / np.sqrt(samples))
    value = float(np.sqrt(max(mean_sq, 0.0)))
    se_value = se_sq / (2.0 * value) if value > 0 else se_sq
    return ResidualEstimate(value, se_value, True)
