"""Desk-scale memory guards shared by the dense paths and sparse builders."""

import os

DENSE_CAP_DEFAULT = 20_000
SHIFT_NNZ_CAP_DEFAULT = 50_000_000


class DenseCapExceeded(RuntimeError):
    """A dense n x n path was requested for an n above the configured cap."""


class SparsityGuardError(RuntimeError):
    """A sparse product would exceed its nonzero budget."""


class SolverDivergenceError(RuntimeError):
    """An iterative solver produced a non-finite iterate.

    `last_finite` holds the last finite factor(s) so callers can inspect
    or salvage the run.
    """

    def __init__(self, message, last_finite=None):
        super().__init__(message)
        self.last_finite = last_finite


def dense_cap() -> int:
    """Largest n for which O(n^2) dense storage is allowed.

    Overridable through the SRLPM_DENSE_CAP environment variable.
    """
    raw = os.environ.get("SRLPM_DENSE_CAP")
    if raw is None:
        return DENSE_CAP_DEFAULT
    cap = int(raw)
    if cap < 1:
        raise ValueError(f"SRLPM_DENSE_CAP must be positive, got {cap}")
    return cap


def ensure_dense_ok(n: int, context: str) -> None:
    cap = dense_cap()
    if n > cap:
        raise DenseCapExceeded(
            f"{context}: n={n} exceeds the dense cap {cap} "
            "(set SRLPM_DENSE_CAP to raise it)"
        )
