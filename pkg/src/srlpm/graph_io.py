"""Edge-list parsing and the column-normalized sparse adjacency operator.

The input format is the plain SNAP edge list: '#'-prefixed comment lines,
data lines with two whitespace-separated nonnegative integer node ids
(extra tokens ignored). Raw ids are remapped to dense indices [0, n) in
first-appearance order.
"""

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
import scipy.sparse as sp


class EdgeListParseError(ValueError):
    """Malformed data line; carries the 1-based line number."""

    def __init__(self, line_no: int, detail: str):
        super().__init__(f"line {line_no}: {detail}")
        self.line_no = line_no


@dataclass
class EdgeList:
    """Deduplicated directed edges over dense node indices.

    n_raw_ids: number of distinct raw ids seen (== dense node count).
    edges: (src, dst) pairs in dense indices, first-occurrence order.
    id_map: raw id -> dense index bijection.
    """

    n_raw_ids: int
    edges: list[tuple[int, int]]
    id_map: dict[int, int] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.n_raw_ids


@dataclass(eq=False)
class NormalizedAdjacency:
    """Column-normalized adjacency: entry (k, j) = 1/|I_j| iff edge k->j.

    Columns with zero in-degree stay empty, so the matrix is
    column-substochastic in general.
    """

    n: int
    columns: sp.csc_array
    col_degree: np.ndarray

    @property
    def nnz(self) -> int:
        return self.columns.nnz


def parse_edge_list(stream: Iterable[str]) -> EdgeList:
    """Parse a SNAP-style edge list into dense-indexed, deduplicated edges.

    Accepts any iterable of text lines (open file, StringIO, list).
    Raises EdgeListParseError naming the offending line; empty input is a
    valid zero-node EdgeList.
    """
    id_map: dict[int, int] = {}
    edges: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    for line_no, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) < 2:
            raise EdgeListParseError(line_no, "expected two integer tokens")
        try:
            src_raw = int(tokens[0])
            dst_raw = int(tokens[1])
        except ValueError:
            raise EdgeListParseError(
                line_no, f"non-integer tokens {tokens[0]!r} {tokens[1]!r}"
            ) from None
        if src_raw < 0 or dst_raw < 0:
            raise EdgeListParseError(line_no, "node ids must be nonnegative")
        src = id_map.setdefault(src_raw, len(id_map))
        dst = id_map.setdefault(dst_raw, len(id_map))
        if (src, dst) not in seen:
            seen.add((src, dst))
            edges.append((src, dst))
    return EdgeList(n_raw_ids=len(id_map), edges=edges, id_map=id_map)


def build_adjacency(
    el: EdgeList,
    symmetrize: bool = False,
    drop_self_loops: bool = True,
) -> NormalizedAdjacency:
    """Build the column-normalized sparse operator A from an edge list.

    symmetrize inserts the reverse of every edge before deduplication;
    drop_self_loops removes (i, i) edges. Entry (k, j) = 1/|I_j| where
    |I_j| counts in-neighbors of j; zero-in-degree columns stay zero.
    The construction is deterministic for identical inputs.
    """
    n = el.n_raw_ids
    pairs: Iterable[tuple[int, int]] = el.edges
    if symmetrize:
        pairs = list(pairs) + [(d, s) for (s, d) in el.edges]
    if drop_self_loops:
        pairs = [(s, d) for (s, d) in pairs if s != d]
    uniq = sorted(set(pairs))
    if uniq:
        arr = np.asarray(uniq, dtype=np.int64)
        rows, cols = arr[:, 0], arr[:, 1]
    else:
        rows = cols = np.empty(0, dtype=np.int64)
    mat = sp.csc_array(
        (np.ones(len(rows)), (rows, cols)), shape=(n, n), dtype=np.float64
    )
    col_degree = np.diff(mat.indptr).astype(np.int64)
    if mat.nnz:
        # per-column scale 1/|I_j|; columns with entries always have degree > 0
        mat.data /= np.repeat(col_degree, np.diff(mat.indptr)).astype(np.float64)
    return NormalizedAdjacency(n=n, columns=mat, col_degree=col_degree)


def load_graph_file(
    path, symmetrize: bool = False, drop_self_loops: bool = True
) -> tuple[EdgeList, NormalizedAdjacency]:
    with open(path, "r", encoding="utf-8") as fh:
        el = parse_edge_list(fh)
    return el, build_adjacency(el, symmetrize=symmetrize, drop_self_loops=drop_self_loops)
