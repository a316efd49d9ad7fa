"""Discrete empirical interpolation of the nonlinear coefficient field.

The field ``g(U_phi a_phi)`` is approximated by ``W (P^T W)^{-1} g(P^T U_phi a_phi)``
where ``W`` spans the POD space of nonlinear snapshots and ``P`` selects
``k`` grid rows chosen greedily.  For componentwise ``g`` only ``k`` entries
of ``g`` are evaluated per step.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import AssemblyError, DimensionError
from .pod import RANK_TOL, left_singular_vectors

COND_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class DeimOperator:
    """Immutable DEIM data.

    Attributes
    ----------
    W : (n, k) orthonormal interpolation basis
    indices : (k,) distinct interpolation rows
    M : (n, k) lifting matrix ``W (P^T W)^{-1}``
    sampler : (k, r) rows ``P^T U_phi``; ``None`` until bound to a basis
    condition : condition number of ``P^T W``
    """

    W: np.ndarray
    indices: np.ndarray
    M: np.ndarray
    condition: float
    sampler: np.ndarray | None = field(default=None, repr=False)

    @property
    def k(self) -> int:
        return self.W.shape[1]

    @property
    def n(self) -> int:
        return self.W.shape[0]

    def with_basis(self, U_phi: np.ndarray) -> "DeimOperator":
        """Copy with ``sampler = P^T U_phi`` precomputed for a given basis."""
        U_phi = np.asarray(U_phi, dtype=float)
        if U_phi.shape[0] != self.n:
            raise DimensionError("DEIM operator and basis live on different grids")
        return replace(self, sampler=U_phi[self.indices, :].copy())

    def evaluate(self, a_phi, g) -> np.ndarray:
        return deim_eval(self, a_phi, g)

    def interpolate(self, f) -> np.ndarray:
        """Oblique projection ``M P^T f`` of a full field."""
        return self.M @ np.asarray(f)[self.indices]


def greedy_indices(W: np.ndarray) -> np.ndarray:
    """Standard DEIM selection: argmax of the interpolation residual per column."""
    W = np.asarray(W, dtype=float)
    n, k = W.shape
    idx = [int(np.argmax(np.abs(W[:, 0])))]
    for j in range(1, k):
        Wj = W[:, :j]
        c = np.linalg.solve(Wj[idx, :], W[idx, j])
        res = W[:, j] - Wj @ c
        idx.append(int(np.argmax(np.abs(res))))
    return np.array(idx, dtype=np.int64)


def from_basis(W: np.ndarray) -> DeimOperator:
    """DEIM operator for a given orthonormal ``W``."""
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[1] < 1 or W.shape[1] > W.shape[0]:
        raise DimensionError(f"W must be n x k with 1 <= k <= n, got {W.shape}")
    idx = greedy_indices(W)
    if len(set(idx.tolist())) != idx.size:
        raise AssemblyError("DEIM selected a repeated index; W is rank deficient")
    PtW = W[idx, :]
    cond = float(np.linalg.cond(PtW))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise AssemblyError(f"P^T W is singular (condition {cond:.3e})")
    M = np.linalg.solve(PtW.T, W.T).T
    return DeimOperator(W, idx, M, cond)


def deim_build(N_snapshots, k: int, *, tol: float = RANK_TOL) -> DeimOperator:
    """Build a rank-``k`` DEIM operator from nonlinear snapshots ``N`` (n x m)."""
    N = np.asarray(N_snapshots, dtype=float)
    if N.ndim != 2:
        raise DimensionError("nonlinear snapshots must be an n x m matrix")
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ValueError(f"DEIM rank must be a positive integer, got {k}")
    if k > min(N.shape):
        raise ValueError(f"DEIM rank {k} exceeds min(n, m) = {min(N.shape)}")
    W, sigma, n_pad = left_singular_vectors(N, int(k), tol=tol)
    if n_pad:
        numrank = int(k) - n_pad
        raise ValueError(f"DEIM rank {k} exceeds the numerical rank {numrank} of the snapshots")
    return from_basis(W)


def deim_eval(op: DeimOperator, a_phi, g) -> np.ndarray:
    """Approximate ``g(U_phi a_phi)`` from ``k`` sampled entries."""
    if op.sampler is None:
        raise AssemblyError("DEIM operator is not bound to a basis; call with_basis first")
    a_phi = np.asarray(a_phi, dtype=float)
    if a_phi.shape != (op.sampler.shape[1],):
        raise DimensionError(f"a_phi must have length {op.sampler.shape[1]}")
    return op.M @ g(op.sampler @ a_phi)
