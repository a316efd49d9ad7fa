"""Galerkin reduced systems (vanilla, I, II) built on a POD basis.

All projections use the weighted discrete inner product ``(f, g) = w f.g``
with ``w = hx*hy``.  The Euclidean-orthonormal POD columns are rescaled to
``V = U / sqrt(w)`` so that ``(V_i, V_j) = delta_ij``; reduced coordinates
are ``a = (V, f) = sqrt(w) U^T f``.

With ``gamma = g(V_phi a_phi)`` (pointwise) write

    B = [L0 V_phi | gamma * V_q]      (N0 L U in matrix form)
    C = [V_phi    | gamma * V_q]      (N0 U)
    Lam = blockdiag(A0, I)            (U^T L U)

Then the three reduced models read

    vanilla:          da/dt = -w C^T G B a
    I:                da/dt = -w C^T G C Lam a
    II:     Lam       da/dt = -w B^T G B a

and ``w B^T G B`` is exactly the block matrix ``[[A1, A2], [A3, A4]]``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import AssemblyError, DimensionError, NumericError
from .model import EqModel
from .pod import PodBasis


class Variant(str, enum.Enum):
    VANILLA = "vanilla"
    I = "i"
    II = "ii"


@dataclass
class ReducedState:
    a_phi: np.ndarray
    a_q: np.ndarray
    t: float = 0.0

    @property
    def a(self) -> np.ndarray:
        return np.concatenate([self.a_phi, self.a_q])

    @classmethod
    def from_vector(cls, a, t=0.0) -> "ReducedState":
        a = np.asarray(a, dtype=float)
        r = a.size // 2
        return cls(a[:r].copy(), a[r:].copy(), t)


@dataclass
class DynamicOperators:
    """State-dependent pieces for one extrapolated ``a_phi``."""

    gamma: np.ndarray
    A2: np.ndarray
    A3: np.ndarray
    A4: np.ndarray
    S2: np.ndarray  # w V_phi^T G (gamma V_q)
    S3: np.ndarray  # w (gamma V_q)^T G V_phi


class RomSystem:
    """Static reduced operators plus machinery for the dynamic ones.

    Parameters
    ----------
    basis : PodBasis
        Euclidean-orthonormal POD basis on ``model.grid``.
    model : EqModel
    deim : DeimOperator, optional
        When given, ``gamma`` is approximated by discrete empirical
        interpolation instead of evaluating ``g`` on the full grid.
    """

    def __init__(self, basis: PodBasis, model: EqModel, deim=None):
        grid = model.grid
        if basis.n != grid.n:
            raise DimensionError(f"basis has {basis.n} rows, grid has {grid.n} points")
        self.basis = basis
        self.model = model
        self.grid = grid
        self.w = grid.cell_area
        s = 1.0 / np.sqrt(self.w)
        self.Uphi = basis.U_phi * s
        self.Uq = basis.U_q * s
        self.r = basis.r
        self.L0Uphi = model.L0(self.Uphi)
        # L0 is self-adjoint, so L0* U_phi is the same array
        self.LstarUphi = self.L0Uphi
        self.GL0Uphi = model.apply_G(self.L0Uphi)
        self.GUphi = model.apply_G(self.Uphi)
        w = self.w
        A0 = w * (self.Uphi.T @ self.L0Uphi)
        asym = np.max(np.abs(A0 - A0.T))
        if asym > 1e-10 * max(1.0, np.max(np.abs(A0))):
            raise AssemblyError(f"A0 is not symmetric (defect {asym:.2e})")
        self.A0 = 0.5 * (A0 + A0.T)
        try:
            self.A0_chol = sla.cho_factor(self.A0)
        except np.linalg.LinAlgError:
            raise AssemblyError("A0 is not positive definite; basis or L0 symbol broken") from None
        self.A1 = w * (self.L0Uphi.T @ self.GL0Uphi)
        self.S1 = w * (self.Uphi.T @ self.GUphi)
        self.V1 = w * (self.Uphi.T @ self.GL0Uphi)
        self.mass_weights = w * self.Uphi.sum(axis=0)
        self._LU = np.hstack([self.L0Uphi, self.Uphi]).T.copy()
        self.deim = None
        if deim is not None:
            self.deim = deim.with_basis(self.Uphi)
        r = self.r
        self.Lam = np.zeros((2 * r, 2 * r))
        self.Lam[:r, :r] = self.A0
        self.Lam[r:, r:] = np.eye(r)

    # -- lifting and projection ------------------------------------------
    def split(self, a):
        a = np.asarray(a, dtype=float)
        if a.shape != (2 * self.r,):
            raise DimensionError(f"reduced vector must have length {2 * self.r}")
        return a[: self.r], a[self.r :]

    def lift(self, a):
        a_phi, a_q = self.split(a)
        return self.Uphi @ a_phi, self.Uq @ a_q

    def project_phi(self, f):
        return self.w * (self.Uphi.T @ f)

    def project_q(self, f):
        return self.w * (self.Uq.T @ f)

    def gamma(self, a_phi) -> np.ndarray:
        if self.deim is not None:
            gam = self.deim.evaluate(a_phi, self.model.g)
        else:
            gam = self.model.g(self.Uphi @ a_phi)
        if not np.all(np.isfinite(gam)):
            raise NumericError("non-finite coefficient field g(U_phi a_phi)")
        return gam

    def mass(self, a) -> float:
        """Integral of the lifted phase field ``V_phi a_phi``."""
        return float(self.mass_weights @ self.split(a)[0])

    def eq_drift(self, a) -> float:
        phi, q = self.lift(a)
        return self.grid.norm(q - self.model.h(phi))


def assemble_static(basis: PodBasis, model: EqModel, deim=None) -> RomSystem:
    """Precompute ``A0``, ``A1`` and the lifted operator columns."""
    return RomSystem(basis, model, deim=deim)


def assemble_dynamic(sys: RomSystem, a_phi_bar) -> DynamicOperators:
    """``A2``, ``A3``, ``A4`` (and the analogous I-variant blocks) at ``a_phi_bar``."""
    a_phi_bar = np.asarray(a_phi_bar, dtype=float)
    if a_phi_bar.shape != (sys.r,):
        raise DimensionError(f"a_phi_bar must have length {sys.r}")
    gam = sys.gamma(a_phi_bar)
    gUq = gam[:, None] * sys.Uq
    GgUq = sys.model.apply_G(gUq)
    w = sys.w
    r = sys.r
    X = w * (sys._LU @ GgUq)
    A2, S2 = X[:r], X[r:]
    A4 = w * (gUq.T @ GgUq)
    if sys.model.has_skew:
        A3 = w * (gUq.T @ sys.GL0Uphi)
        S3 = w * (gUq.T @ sys.GUphi)
    else:
        # G self-adjoint: the transposed blocks coincide
        A3, S3 = A2.T.copy(), S2.T.copy()
    return DynamicOperators(gam, A2, A3, A4, S2, S3)


def _block(A, B, C, D):
    return np.block([[A, B], [C, D]])


def flux_matrices(sys: RomSystem, dyn: DynamicOperators, variant) -> tuple[np.ndarray, np.ndarray]:
    """``(mass, K)`` with the reduced model ``mass da/dt = -K a``."""
    variant = Variant(variant)
    if variant is Variant.II:
        return sys.Lam, _block(sys.A1, dyn.A2, dyn.A3, dyn.A4)
    I = np.eye(2 * sys.r)
    if variant is Variant.I:
        KI = _block(sys.S1, dyn.S2, dyn.S3, dyn.A4)
        return I, KI @ sys.Lam
    return I, _block(sys.V1, dyn.S2, dyn.A3, dyn.A4)


def mobility_I(sys: RomSystem, dyn: DynamicOperators) -> np.ndarray:
    """``U^T N U`` in reduced coordinates (the projected mobility of variant I)."""
    return _block(sys.S1, dyn.S2, dyn.S3, dyn.A4)


def dissipation(sys: RomSystem, dyn: DynamicOperators, variant, a) -> float:
    """Energy dissipation rate evaluated at ``a`` with frozen coefficient ``dyn``.

    II: ``(L U a, N L U a)``.  I: ``(U U^T L U a, N U U^T L U a)``.
    vanilla: ``(L U a, U U^T N L U a)`` (may be negative).
    """
    variant = Variant(variant)
    a = np.asarray(a, dtype=float)
    if variant is Variant.II:
        K = _block(sys.A1, dyn.A2, dyn.A3, dyn.A4)
        return float(a @ K @ a)
    La = sys.Lam @ a
    if variant is Variant.I:
        return float(La @ mobility_I(sys, dyn) @ La)
    _, K = flux_matrices(sys, dyn, variant)
    return float(La @ K @ a)


def rhs_vanilla(sys: RomSystem, a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    _, K = flux_matrices(sys, assemble_dynamic(sys, sys.split(a)[0]), Variant.VANILLA)
    return -K @ a


def rhs_rom_i(sys: RomSystem, a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    _, K = flux_matrices(sys, assemble_dynamic(sys, sys.split(a)[0]), Variant.I)
    return -K @ a


def rhs_rom_ii(sys: RomSystem, a) -> tuple[np.ndarray, np.ndarray]:
    """``(mass, rhs)``; the time derivative is ``solve(mass, rhs)``."""
    a = np.asarray(a, dtype=float)
    mass, K = flux_matrices(sys, assemble_dynamic(sys, sys.split(a)[0]), Variant.II)
    return mass, -K @ a


def time_derivative(sys: RomSystem, a, variant) -> np.ndarray:
    if Variant(variant) is Variant.II:
        mass, rhs = rhs_rom_ii(sys, a)
        return np.linalg.solve(mass, rhs)
    return rhs_rom_i(sys, a) if Variant(variant) is Variant.I else rhs_vanilla(sys, a)


def reduced_energy(sys: RomSystem, a) -> float:
    """``1/2 a_phi^T A0 a_phi + 1/2 a_q^T a_q``."""
    a_phi, a_q = sys.split(a)
    return 0.5 * float(a_phi @ sys.A0 @ a_phi) + 0.5 * float(a_q @ a_q)


def modified_bdf2_energy(sys: RomSystem, a_now, a_prev) -> float:
    """Two-level energy ``1/4 <a1, L a1> + 1/4 <2a1 - a2, L (2a1 - a2)>``."""
    a1 = np.asarray(a_now, dtype=float)
    d = 2 * a1 - np.asarray(a_prev, dtype=float)
    return 0.25 * float(a1 @ sys.Lam @ a1) + 0.25 * float(d @ sys.Lam @ d)
