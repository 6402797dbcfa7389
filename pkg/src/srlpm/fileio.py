"""Binary file formats and atomic writes.

All integers are little-endian u64, floats are little-endian f64,
matrices are stored row-major.

  SRLG1  graph:   magic, n, nnz, col_ptr[n+1], row_idx[nnz], val[nnz] (CSC)
  SRDS1  dense:   magic, n, c, n*n values
  SRLF1  factors: magic, kind u8 (0 pair | 1 symmetric | 2 spectral),
                  n, r, c, then U,V | U | Q_left, sigma, Q_right
"""

import os
import tempfile

import numpy as np
import scipy.sparse as sp

from .dense import DenseSimilarity
from .graph_io import NormalizedAdjacency
from .kernels import FactorPair, SymmetricFactor
from .rsvd import SpectralFactor

MAGIC_GRAPH = b"SRLG1"
MAGIC_DENSE = b"SRDS1"
MAGIC_FACTORS = b"SRLF1"

KIND_PAIR = 0
KIND_SYMMETRIC = 1
KIND_SPECTRAL = 2


def atomic_write_bytes(path, payload: bytes) -> None:
    """Write via a temp file in the target directory plus rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _u64(*values) -> bytes:
    return np.asarray(values, dtype="<u8").tobytes()


def _f64(arr) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


class _Reader:
    def __init__(self, path):
        with open(path, "rb") as fh:
            self.buf = fh.read()
        self.pos = 0
        self.path = path

    def take(self, count: int) -> bytes:
        if self.pos + count > len(self.buf):
            raise ValueError(f"{self.path}: truncated file")
        out = self.buf[self.pos : self.pos + count]
        self.pos += count
        return out

    def u64(self, count: int = 1) -> np.ndarray:
        return np.frombuffer(self.take(8 * count), dtype="<u8")

    def f64(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * count), dtype="<f8")

    def expect_magic(self, magic: bytes) -> None:
        got = self.take(len(magic))
        if got != magic:
            raise ValueError(f"{self.path}: bad magic {got!r}, expected {magic!r}")


def write_graph(path, adj: NormalizedAdjacency) -> None:
    csc = adj.columns.tocsc()
    parts = [
        MAGIC_GRAPH,
        _u64(adj.n, csc.nnz),
        _u64(*csc.indptr.tolist()),
        _u64(*csc.indices.tolist()),
        _f64(csc.data),
    ]
    atomic_write_bytes(path, b"".join(parts))


def read_graph(path) -> NormalizedAdjacency:
    rd = _Reader(path)
    rd.expect_magic(MAGIC_GRAPH)
    n, nnz = (int(x) for x in rd.u64(2))
    indptr = rd.u64(n + 1).astype(np.int64)
    indices = rd.u64(nnz).astype(np.int64)
    data = rd.f64(nnz).astype(np.float64)
    mat = sp.csc_array((data, indices, indptr), shape=(n, n))
    return NormalizedAdjacency(n=n, columns=mat, col_degree=np.diff(indptr))


def write_dense(path, sim: DenseSimilarity) -> None:
    parts = [MAGIC_DENSE, _u64(sim.n), _f64([sim.c]), _f64(sim.values)]
    atomic_write_bytes(path, b"".join(parts))


def read_dense(path) -> DenseSimilarity:
    rd = _Reader(path)
    rd.expect_magic(MAGIC_DENSE)
    n = int(rd.u64(1)[0])
    c = float(rd.f64(1)[0])
    values = rd.f64(n * n).reshape(n, n).copy()
    return DenseSimilarity(values=values, c=c, iterations=0, residual_c=float("nan"))


def write_factors(path, factor, c: float) -> None:
    if isinstance(factor, FactorPair):
        kind, n, r = KIND_PAIR, factor.n, factor.rank
        payload = _f64(factor.U) + _f64(factor.V)
    elif isinstance(factor, SymmetricFactor):
        kind, n, r = KIND_SYMMETRIC, factor.n, factor.rank
        payload = _f64(factor.U)
    elif isinstance(factor, SpectralFactor):
        kind, n, r = KIND_SPECTRAL, factor.n, factor.rank
        payload = _f64(factor.q_left) + _f64(factor.sigma) + _f64(factor.q_right)
    else:
        raise TypeError(f"unsupported factor type {type(factor).__name__}")
    head = MAGIC_FACTORS + bytes([kind]) + _u64(n, r) + _f64([c])
    atomic_write_bytes(path, head + payload)


def read_factors(path):
    """Returns (factor, c)."""
    rd = _Reader(path)
    rd.expect_magic(MAGIC_FACTORS)
    kind = rd.take(1)[0]
    n, r = (int(x) for x in rd.u64(2))
    c = float(rd.f64(1)[0])
    if kind == KIND_PAIR:
        u = rd.f64(n * r).reshape(n, r).copy()
        v = rd.f64(n * r).reshape(n, r).copy()
        return FactorPair(U=u, V=v), c
    if kind == KIND_SYMMETRIC:
        u = rd.f64(n * r).reshape(n, r).copy()
        return SymmetricFactor(U=u), c
    if kind == KIND_SPECTRAL:
        q_left = rd.f64(n * r).reshape(n, r).copy()
        sigma = rd.f64(r).copy()
        q_right = rd.f64(n * r).reshape(n, r).copy()
        return SpectralFactor(q_left=q_left, sigma=sigma, q_right=q_right), c
    raise ValueError(f"{path}: unknown factor kind {kind}")
