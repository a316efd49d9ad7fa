"""Snapshot sets and POD bases computed by the method of snapshots."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NumericError
from .spectral import Grid2D

RANK_TOL = 1e-12
PAD_SEED = 20240521


@dataclass(eq=False)
class SnapshotSet:
    """State snapshots ``Phi`` and auxiliary snapshots ``Q`` (columns = times)."""

    Phi: np.ndarray
    Q: np.ndarray
    times: np.ndarray
    grid: Grid2D | None = None
    sample_interval: float = 0.0

    def __post_init__(self):
        self.Phi = np.atleast_2d(np.asarray(self.Phi, dtype=float))
        self.Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        self.times = np.asarray(self.times, dtype=float).ravel()
        if self.Phi.shape != self.Q.shape:
            raise DimensionError(f"Phi {self.Phi.shape} and Q {self.Q.shape} differ")
        if self.times.size != self.Phi.shape[1]:
            raise DimensionError("one sample time per snapshot column is required")
        if self.grid is not None and self.grid.n != self.Phi.shape[0]:
            raise DimensionError("snapshot rows do not match the grid size")
        if not (np.all(np.isfinite(self.Phi)) and np.all(np.isfinite(self.Q))):
            raise NumericError("snapshot matrices contain non-finite values")

    @property
    def n(self) -> int:
        return self.Phi.shape[0]

    @property
    def m(self) -> int:
        return self.Phi.shape[1]

    @classmethod
    def from_states(cls, Phi, h, times, grid=None, sample_interval=0.0):
        """Build the set with ``Q[:, k] = h(Phi[:, k])``."""
        Phi = np.asarray(Phi, dtype=float)
        return cls(Phi, h(Phi), times, grid, sample_interval)


@dataclass(eq=False)
class PodBasis:
    """Truncated left singular vectors of ``Phi`` and ``Q`` (Euclidean orthonormal).

    ``padded_phi`` / ``padded_q`` count trailing columns that lie beyond the
    numerical rank of the data and were completed with random directions.
    """

    U_phi: np.ndarray
    U_q: np.ndarray
    sigma_phi: np.ndarray
    sigma_q: np.ndarray
    padded_phi: int = 0
    padded_q: int = 0
    deim: object | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.U_phi.shape != self.U_q.shape:
            raise DimensionError("U_phi and U_q must have the same shape")

    @property
    def n(self) -> int:
        return self.U_phi.shape[0]

    @property
    def r(self) -> int:
        return self.U_phi.shape[1]

    def orthonormality_error(self) -> float:
        I = np.eye(self.r)
        return max(
            float(np.max(np.abs(self.U_phi.T @ self.U_phi - I))),
            float(np.max(np.abs(self.U_q.T @ self.U_q - I))),
        )


def fix_signs(U: np.ndarray) -> np.ndarray:
    """Flip columns so that each one's largest-magnitude entry is positive."""
    if U.size == 0:
        return U
    idx = np.argmax(np.abs(U), axis=0)
    s = np.sign(U[idx, np.arange(U.shape[1])])
    s[s == 0] = 1.0
    return U * s


def left_singular_vectors(X: np.ndarray, r: int, *, tol: float = RANK_TOL, seed: int = PAD_SEED):
    """Leading ``r`` left singular vectors of ``X`` (n x m) via the m x m Gram matrix.

    Returns ``(U, sigma, n_padded)`` where ``sigma`` holds all ``min(n, m)``
    singular values in descending order.
    """
    X = np.asarray(X, dtype=float)
    n, m = X.shape
    if not 1 <= r <= n:
        raise ValueError(f"rank r={r} outside [1, {n}]")
    gram = X.T @ X
    _, V = np.linalg.eigh(gram)
    V = V[:, ::-1]
    XV = X @ V
    # column norms of X V are accurate to roundoff relative to |X|, unlike sqrt(eig)
    sig = np.linalg.norm(XV, axis=0)
    order = np.argsort(-sig, kind="stable")
    sig, XV = sig[order], XV[:, order]
    nsig = min(n, m)
    sigma = sig[:nsig]
    s1 = sigma[0] if sigma.size else 0.0
    numrank = int(np.sum(sigma > tol * s1)) if s1 > 0 else 0
    keep = min(r, numrank)
    U = np.empty((n, r))
    if keep:
        U[:, :keep] = XV[:, :keep] / sigma[:keep]
        # one re-orthogonalization pass; R is ~identity so columns are preserved
        Qm, R = np.linalg.qr(U[:, :keep])
        U[:, :keep] = Qm * np.sign(np.diag(R))
    n_pad = r - keep
    if n_pad:
        rng = np.random.default_rng(seed)
        for j in range(keep, r):
            v = rng.standard_normal(n)
            for _ in range(2):
                v -= U[:, :j] @ (U[:, :j].T @ v)
            U[:, j] = v / np.linalg.norm(v)
    return fix_signs(U), sigma, n_pad


def compute_basis(S: SnapshotSet, r: int) -> PodBasis:
    """POD bases of rank ``r`` for both snapshot matrices.

    Columns beyond the numerical rank (``sigma_j < 1e-12 sigma_1``) are
    completed by orthonormalized random vectors and counted in ``padded_*``.
    """
    if not isinstance(r, (int, np.integer)) or not 1 <= r <= min(S.n, S.m):
        raise ValueError(f"rank r={r} must satisfy 1 <= r <= min(n, m) = {min(S.n, S.m)}")
    U_phi, s_phi, p_phi = left_singular_vectors(S.Phi, int(r))
    U_q, s_q, p_q = left_singular_vectors(S.Q, int(r), seed=PAD_SEED + 1)
    if p_phi or p_q:
        warnings.warn(
            f"rank {r} exceeds numerical rank; padded {p_phi} phi and {p_q} q columns",
            stacklevel=2,
        )
    return PodBasis(U_phi, U_q, s_phi, s_q, p_phi, p_q)


def truncation_rank(sigma, threshold: float, mode: str = "relative") -> int:
    """Smallest ``r`` with singular-value tail ``sqrt(sum_{j>r} sigma_j^2)`` below ``threshold``.

    In ``relative`` mode the tail is compared with ``threshold * |sigma|_2``.
    """
    sigma = np.asarray(sigma, dtype=float)
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    if mode not in ("relative", "absolute"):
        raise ValueError(f"unknown threshold mode {mode!r}")
    total = float(np.sum(sigma**2))
    if total == 0.0:
        return 1
    # tails[r] = sum_{j>r} sigma_j^2 for r = 0..len
    tails = np.concatenate([np.cumsum((sigma**2)[::-1])[::-1], [0.0]])
    bound = threshold * np.sqrt(total) if mode == "relative" else threshold
    for r in range(1, sigma.size + 1):
        if np.sqrt(tails[r]) < bound:
            return r
    return sigma.size


def projection_error(S: SnapshotSet, basis: PodBasis) -> tuple[float, float]:
    """Direct squared reconstruction errors ``sum_j |X_j - U U^T X_j|^2`` for Phi and Q."""
    if basis.n != S.n:
        raise DimensionError("basis and snapshots have different row counts")

    def err(X, U):
        R = X - U @ (U.T @ X)
        return float(np.sum(R * R))

    return err(S.Phi, basis.U_phi), err(S.Q, basis.U_q)


def sigma_tail(sigma, r: int) -> float:
    sigma = np.asarray(sigma, dtype=float)
    return float(np.sum(sigma[r:] ** 2))
