"""Matrix-free computational core shared by the factored solvers.

Everything here works on factored or sparse representations; no function
materializes an n x n dense array. The linear map

    phi(X)      = off(X) - c * off(A^T off(X) A)
    phi_star(X) = off(X) - c * off(A off(X) A^T)   (Frobenius adjoint)

and the fused kernels dmmp(X,Y,Z) = diag(XY) Z and
ffmp(X,Y,Z) = phi_star(phi(XY)) Z are the building blocks of the
quadratic-minimization solver; the shift matrix B = c * off(A^T A) is the
constant term of every factored fixed-point equation.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .graph_io import NormalizedAdjacency
from .limits import SHIFT_NNZ_CAP_DEFAULT, SparsityGuardError


@dataclass(eq=False)
class ShiftMatrix:
    """Sparse constant B = c * off(A^T A); symmetric with zero diagonal."""

    mat: sp.csr_array
    c: float

    @property
    def n(self) -> int:
        return self.mat.shape[0]


@dataclass(eq=False)
class FactorPair:
    """Nonsymmetric factorization: represents S ~ I + U V^T."""

    U: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        if self.U.shape != self.V.shape:
            raise ValueError(f"U {self.U.shape} and V {self.V.shape} must match")

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def rank(self) -> int:
        return self.U.shape[1]

    def row_block(self, start: int, stop: int) -> np.ndarray:
        """Dense rows [start, stop) of I + U V^T."""
        block = self.U[start:stop] @ self.V.T
        idx = np.arange(start, stop)
        block[np.arange(stop - start), idx] += 1.0
        return block

    def to_dense(self) -> np.ndarray:
        return self.row_block(0, self.n)


@dataclass(eq=False)
class SymmetricFactor:
    """Symmetric low-parametric form: S ~ I + off(U U^T).

    Symmetric with exact unit diagonal for any U.
    """

    U: np.ndarray

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def rank(self) -> int:
        return self.U.shape[1]

    def row_block(self, start: int, stop: int) -> np.ndarray:
        block = self.U[start:stop] @ self.U.T
        idx = np.arange(start, stop)
        block[np.arange(stop - start), idx] = 1.0
        return block

    def to_dense(self) -> np.ndarray:
        return self.row_block(0, self.n)


class AdjacencyKernels:
    """Cached sparse forms of A needed by the fused kernels.

    a_csr / at_csr hold A and A^T in row-major sparse form for fast
    sparse-dense products; the squared patterns asq = A.A (elementwise),
    its transpose, and csq = (AA^T).(AA^T) turn the diagonal corrections
    of ffmp into plain sparse matvecs. All members are built lazily and
    never mutated afterwards.
    """

    def __init__(self, adj: NormalizedAdjacency):
        self.n = adj.n
        self.a_csr = adj.columns.tocsr()
        self.at_csr = adj.columns.T.tocsr()

    @cached_property
    def asq(self) -> sp.csr_array:
        return self.a_csr.multiply(self.a_csr).tocsr()

    @cached_property
    def asqt(self) -> sp.csr_array:
        return self.at_csr.multiply(self.at_csr).tocsr()

    @cached_property
    def csq(self) -> sp.csr_array:
        aat = (self.a_csr @ self.at_csr).tocsr()
        return aat.multiply(aat).tocsr()

    # dense-in / dense-out products
    def AX(self, m: np.ndarray) -> np.ndarray:
        return self.a_csr @ m

    def AtX(self, m: np.ndarray) -> np.ndarray:
        return self.at_csr @ m

    def XA(self, m: np.ndarray) -> np.ndarray:
        """m @ A for row-shaped m (k x n)."""
        return (self.at_csr @ m.T).T

    def XAt(self, m: np.ndarray) -> np.ndarray:
        """m @ A^T for row-shaped m (k x n)."""
        return (self.a_csr @ m.T).T


def kernels_for(adj: NormalizedAdjacency) -> AdjacencyKernels:
    """Per-adjacency kernel workspace, cached on the adjacency object."""
    ws = getattr(adj, "_kernels", None)
    if ws is None:
        ws = AdjacencyKernels(adj)
        adj._kernels = ws
    return ws


def build_shift(
    adj: NormalizedAdjacency,
    c: float,
    max_nnz: int = SHIFT_NNZ_CAP_DEFAULT,
) -> ShiftMatrix:
    """Assemble B = c * off(A^T A) in sparse form.

    Refuses when the product would exceed max_nnz nonzeros; the cheap
    upper bound sum(outdeg^2) is checked before multiplying.
    """
    if not 0.0 < c < 1.0:
        raise ValueError(f"c must lie in (0, 1), got {c}")
    ws = kernels_for(adj)
    out_deg = np.diff(ws.a_csr.indptr)
    bound = int(np.sum(out_deg.astype(np.int64) ** 2))
    if bound > max_nnz:
        raise SparsityGuardError(
            f"estimated nnz(A^T A) <= {bound} exceeds cap {max_nnz}"
        )
    prod = (ws.at_csr @ ws.a_csr).tocsr()
    prod.setdiag(0.0)
    prod.eliminate_zeros()
    if prod.nnz > max_nnz:
        raise SparsityGuardError(f"nnz(off(A^T A)) = {prod.nnz} exceeds cap {max_nnz}")
    prod.data *= c
    return ShiftMatrix(mat=prod, c=c)


def bilinear_diag(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """diag(P Q) in O(n r): entry k is P[k, :] . Q[:, k]."""
    if p.shape[1] != q.shape[0] or p.shape[0] != q.shape[1]:
        raise ValueError(f"shapes {p.shape} x {q.shape} do not form a square product")
    return np.einsum("ij,ji->i", p, q)


def dmmp(x: np.ndarray, y: np.ndarray, z: np.ndarray) -> np.ndarray:
    """diag(X Y) Z as a row scaling of Z; never forms X Y."""
    if z.shape[0] != x.shape[0]:
        raise ValueError(f"Z has {z.shape[0]} rows, expected {x.shape[0]}")
    return bilinear_diag(x, y)[:, None] * z


@dataclass(eq=False)
class FactoredMatrix:
    """Implicit square matrix: sum of scaled outer products L R, scaled
    sparse terms, and a diagonal vector.

    Supports contraction from either side without materializing n x n.
    """

    n: int
    lowrank: list[tuple[np.ndarray, np.ndarray, float]]
    sparse: list[tuple[sp.sparray, float]]
    diag: np.ndarray | None = None

    def matmat(self, z: np.ndarray) -> np.ndarray:
        """Self @ z, reducing through the rank bottleneck first."""
        if z.shape[0] != self.n:
            raise ValueError(f"z has {z.shape[0]} rows, expected {self.n}")
        out = np.zeros((self.n, z.shape[1]))
        for left, right, coeff in self.lowrank:
            out += coeff * (left @ (right @ z))
        for mat, coeff in self.sparse:
            out += coeff * (mat @ z)
        if self.diag is not None:
            out += self.diag[:, None] * z
        return out

    def t_matmat(self, z: np.ndarray) -> np.ndarray:
        """Self^T @ z."""
        if z.shape[0] != self.n:
            raise ValueError(f"z has {z.shape[0]} rows, expected {self.n}")
        out = np.zeros((self.n, z.shape[1]))
        for left, right, coeff in self.lowrank:
            out += coeff * (right.T @ (left.T @ z))
        for mat, coeff in self.sparse:
            out += coeff * (mat.T @ z)
        if self.diag is not None:
            out += self.diag[:, None] * z
        return out

    def to_dense(self) -> np.ndarray:
        """Materialize (test helper; keep to small n)."""
        return self.matmat(np.eye(self.n))


def apply_phi(
    p: np.ndarray, q: np.ndarray, adj: NormalizedAdjacency, c: float
) -> FactoredMatrix:
    """phi(P Q) as an implicit matrix.

    phi(PQ) = PQ - c (A^T P)(Q A) + c A^T D_w A - diag(d1 - c*g), where
    d1 = diag(PQ), D_w = diag(d1) and g = diag(A^T off(PQ) A).
    """
    ws = kernels_for(adj)
    if p.shape[0] != ws.n or q.shape[1] != ws.n or p.shape[1] != q.shape[0]:
        raise ValueError(f"bad factor shapes {p.shape} x {q.shape} for n={ws.n}")
    d1 = bilinear_diag(p, q)
    atp = ws.AtX(p)
    qa = ws.XA(q)
    g = bilinear_diag(atp, qa) - ws.asqt @ d1
    sparse_term = ws.at_csr @ (sp.diags_array(d1, format="csr") @ ws.a_csr)
    return FactoredMatrix(
        n=ws.n,
        lowrank=[(p, q, 1.0), (atp, qa, -c)],
        sparse=[(sparse_term, c)],
        diag=-d1 + c * g,
    )


def ffmp(
    x: np.ndarray,
    y: np.ndarray,
    z: np.ndarray,
    adj: NormalizedAdjacency,
    c: float,
) -> np.ndarray:
    """phi_star(phi(X Y)) Z through the T1 - c*T2 + c^2*T3 expansion.

    X: n x k, Y: k x n, Z: n x m. Every intermediate is n x k, n x m or a
    length-n vector; diagonal extractions go through bilinear_diag and the
    precomputed squared sparsity patterns.
    """
    ws = kernels_for(adj)
    n = ws.n
    if x.shape[0] != n or y.shape[1] != n or x.shape[1] != y.shape[0]:
        raise ValueError(f"bad factor shapes {x.shape} x {y.shape} for n={n}")
    if z.shape[0] != n:
        raise ValueError(f"Z has {z.shape[0]} rows, expected {n}")

    d1 = bilinear_diag(x, y)            # diag(XY)
    atx = ws.AtX(x)                     # A^T X
    ya = ws.XA(y)                       # Y A
    az = ws.AX(z)
    atz = ws.AtX(z)

    h1 = bilinear_diag(atx, ya)         # diag((A^T X)(Y A))
    h2 = ws.asqt @ d1                   # diag(A^T D_w A)
    g = h1 - h2                         # diag(A^T off(XY) A)

    # T1 Z = off(XY) Z - c * off(A^T off(XY) A) Z
    t1 = x @ (y @ z) - d1[:, None] * z
    t1 -= c * (atx @ (ya @ z) - ws.AtX(d1[:, None] * az) - g[:, None] * z)

    # T2 Z = off(A off(XY) A^T) Z
    ax = ws.AX(x)
    yat = ws.XAt(y)
    h5 = bilinear_diag(ax, yat)
    h6 = ws.asq @ d1
    t2 = ax @ (yat @ z) - ws.AX(d1[:, None] * atz) - (h5 - h6)[:, None] * z

    # T3 Z = off(A off(A^T off(XY) A) A^T) Z
    aatx = ws.AX(atx)
    yaat = ws.XAt(ya)
    h3 = bilinear_diag(aatx, yaat)
    h4 = ws.csq @ d1
    inner = atx @ (ya @ atz) - ws.AtX(d1[:, None] * ws.AX(atz)) - g[:, None] * atz
    t3 = ws.AX(inner) - (h3 - h4 - ws.asq @ g)[:, None] * z

    return t1 - c * t2 + (c * c) * t3


def apply_phi_star_sparse(
    w: sp.sparray,
    adj: NormalizedAdjacency,
    c: float,
    max_nnz: int = SHIFT_NNZ_CAP_DEFAULT,
) -> sp.csr_array:
    """phi_star of a sparse matrix, kept sparse.

    Used once per quadratic-minimization run to precompute phi_star(B).
    """
    ws = kernels_for(adj)
    if w.shape != (ws.n, ws.n):
        raise ValueError(f"W has shape {w.shape}, expected ({ws.n}, {ws.n})")
    off_w = w.tocsr(copy=True)
    off_w.setdiag(0.0)
    off_w.eliminate_zeros()
    inner = (ws.a_csr @ off_w @ ws.at_csr).tocsr()
    inner.setdiag(0.0)
    inner.eliminate_zeros()
    out = (off_w - c * inner).tocsr()
    if out.nnz > max_nnz:
        raise SparsityGuardError(f"nnz(phi_star(W)) = {out.nnz} exceeds cap {max_nnz}")
    return out
