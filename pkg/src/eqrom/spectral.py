"""Periodic 2D pseudo-spectral discretization.

Layout conventions (frozen; every multiplier is built from :func:`wavenumbers`):

* A field is a flat float64 array of length ``n = Nx * Ny`` with the x-index
  fastest, i.e. grid point ``(x_i, y_j) = (i*hx, j*hy)`` lives at flat index
  ``j*Nx + i``.  ``f.reshape(Ny, Nx)[j, i]`` recovers the 2D view.
* Fourier symbols are ``(Ny, Nx)`` arrays in the output order of
  ``scipy.fft.fft2`` applied to that 2D view.  Entry ``[p, s]`` holds the mode
  with integer wavenumbers ``l = fftfreq(Ny)[p] * Ny`` and
  ``k = fftfreq(Nx)[s] * Nx``, i.e. ``0, 1, ..., K-1, -K, ..., -1``.
* The Nyquist index ``K`` is stored as wavenumber ``-K``.  On the collocation
  grid it is the same mode as ``+K``, so even symbols (Laplacian, L0, the
  mobilities) are unaffected.  Odd first-derivative symbols are set to zero
  there so that they map real fields to real fields.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
import scipy.fft as sfft

from .errors import DimensionError, ModelError, NumericError

if TYPE_CHECKING:
    from .model import ModelSpec

Field = np.ndarray

IMAG_RESIDUE_TOL = 1e-10


@dataclass(frozen=True)
class Grid2D:
    """Uniform periodic grid on ``[0, Lx) x [0, Ly)``."""

    Nx: int
    Ny: int
    Lx: float = 1.0
    Ly: float = 1.0

    def __post_init__(self):
        for name in ("Nx", "Ny"):
            v = getattr(self, name)
            if int(v) != v or v <= 0 or v % 2:
                raise DimensionError(f"{name} must be a positive even integer, got {v}")
            object.__setattr__(self, name, int(v))
        for name in ("Lx", "Ly"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v <= 0:
                raise DimensionError(f"{name} must be positive, got {v}")
            object.__setattr__(self, name, v)

    @property
    def hx(self) -> float:
        return self.Lx / self.Nx

    @property
    def hy(self) -> float:
        return self.Ly / self.Ny

    @property
    def Kx(self) -> int:
        return self.Nx // 2

    @property
    def Ky(self) -> int:
        return self.Ny // 2

    @property
    def n(self) -> int:
        return self.Nx * self.Ny

    @property
    def shape(self) -> tuple[int, int]:
        """Shape of the 2D view, ``(Ny, Nx)``."""
        return (self.Ny, self.Nx)

    @property
    def cell_area(self) -> float:
        """Quadrature weight ``hx * hy`` of the discrete inner product."""
        return self.hx * self.hy

    @property
    def area(self) -> float:
        return self.Lx * self.Ly

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Flat x and y coordinates in field order."""
        x = np.arange(self.Nx) * self.hx
        y = np.arange(self.Ny) * self.hy
        X, Y = np.meshgrid(x, y)  # (Ny, Nx), x fastest
        return X.ravel(), Y.ravel()

    def inner(self, f: Field, g: Field) -> float | np.ndarray:
        return inner_product(self, f, g)

    def norm(self, f: Field) -> float:
        return float(np.sqrt(inner_product(self, f, f)))

    def integrate(self, f: Field) -> float:
        """Quadrature ``hx*hy*sum(f)``; the mass of a field."""
        return self.cell_area * float(np.sum(f))


def wavenumbers(grid: Grid2D) -> tuple[np.ndarray, np.ndarray]:
    """Integer wavenumber tables ``(k, l)`` of shape ``(Ny, Nx)`` in FFT order."""
    k1 = np.rint(sfft.fftfreq(grid.Nx) * grid.Nx).astype(int)
    l1 = np.rint(sfft.fftfreq(grid.Ny) * grid.Ny).astype(int)
    K, L = np.meshgrid(k1, l1)
    return K, L


def _lambda(grid: Grid2D) -> np.ndarray:
    K, L = wavenumbers(grid)
    return (2 * np.pi * K / grid.Lx) ** 2 + (2 * np.pi * L / grid.Ly) ** 2


@dataclass(frozen=True, eq=False)
class FourierMultiplier:
    """Diagonal operator in Fourier space on a given grid."""

    grid: Grid2D
    symbol: np.ndarray

    def __post_init__(self):
        sym = np.asarray(self.symbol)
        if sym.shape != self.grid.shape:
            raise DimensionError(
                f"symbol shape {sym.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(sym)):
            raise NumericError("multiplier symbol has non-finite entries")
        if np.iscomplexobj(sym) and not np.any(sym.imag):
            sym = sym.real
        object.__setattr__(self, "symbol", sym)
        object.__setattr__(self, "max_abs", float(np.max(np.abs(sym))))

    def __call__(self, f: Field) -> Field:
        return apply_multiplier(self, f)

    def _check(self, other: "FourierMultiplier"):
        if other.grid != self.grid:
            raise DimensionError("multipliers live on different grids")

    def __add__(self, other):
        if isinstance(other, FourierMultiplier):
            self._check(other)
            return FourierMultiplier(self.grid, self.symbol + other.symbol)
        return FourierMultiplier(self.grid, self.symbol + other)

    __radd__ = __add__

    def __mul__(self, other):
        if isinstance(other, FourierMultiplier):
            self._check(other)
            return FourierMultiplier(self.grid, self.symbol * other.symbol)
        return FourierMultiplier(self.grid, self.symbol * other)

    __rmul__ = __mul__

    def __neg__(self):
        return FourierMultiplier(self.grid, -self.symbol)

    def inverse(self) -> "FourierMultiplier":
        if np.any(self.symbol == 0):
            raise NumericError("multiplier is singular (zero symbol entry)")
        return FourierMultiplier(self.grid, 1.0 / self.symbol)

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.symbol)


def apply_multiplier(m: FourierMultiplier, f: Field) -> Field:
    """Apply ``m`` to a field (shape ``(n,)``) or to the columns of ``(n, k)``.

    The imaginary part left after the inverse transform is discarded once it
    is checked to be below ``1e-10 * |f|_inf * max(1, |symbol|_inf)``.
    """
    g = m.grid
    f = np.asarray(f)
    if f.ndim not in (1, 2) or f.shape[0] != g.n:
        raise DimensionError(f"field of shape {f.shape} is not on a {g.Nx}x{g.Ny} grid")
    if f.ndim == 1:
        out = sfft.ifft2(m.symbol * sfft.fft2(f.reshape(g.shape)))
    else:
        F = f.reshape(g.Ny, g.Nx, f.shape[1])
        out = sfft.ifft2(m.symbol[:, :, None] * sfft.fft2(F, axes=(0, 1)), axes=(0, 1))
    # non-finite input propagates through the transforms
    if not np.isfinite(out).all():
        raise NumericError("non-finite values in field")
    if out.size:
        residue = np.abs(out.imag).max()
        bound = IMAG_RESIDUE_TOL * np.abs(f).max() * max(1.0, m.max_abs)
        if residue > bound:
            raise NumericError(
                f"imaginary residue {residue:.3e} exceeds {bound:.3e}; symbol is not Hermitian"
            )
    return out.real.reshape(f.shape)


def identity_symbol(grid: Grid2D) -> FourierMultiplier:
    return FourierMultiplier(grid, np.ones(grid.shape))


def laplacian_symbol(grid: Grid2D) -> FourierMultiplier:
    """Discrete Laplacian, symbol ``-[(2k pi/Lx)^2 + (2l pi/Ly)^2]``."""
    return FourierMultiplier(grid, -_lambda(grid))


def derivative_symbols(grid: Grid2D) -> tuple[FourierMultiplier, FourierMultiplier]:
    """First-derivative multipliers ``(D_x, D_y)``, Nyquist modes zeroed."""
    K, L = wavenumbers(grid)
    kx = np.where(np.abs(K) == grid.Kx, 0, K)
    ly = np.where(np.abs(L) == grid.Ky, 0, L)
    Dx = FourierMultiplier(grid, 1j * 2 * np.pi * kx / grid.Lx)
    Dy = FourierMultiplier(grid, 1j * 2 * np.pi * ly / grid.Ly)
    return Dx, Dy


def second_derivative_symbols(grid: Grid2D) -> tuple[FourierMultiplier, FourierMultiplier]:
    K, L = wavenumbers(grid)
    return (
        FourierMultiplier(grid, -((2 * np.pi * K / grid.Lx) ** 2)),
        FourierMultiplier(grid, -((2 * np.pi * L / grid.Ly) ** 2)),
    )


def gradient(grid: Grid2D, f: Field) -> tuple[Field, Field]:
    Dx, Dy = derivative_symbols(grid)
    return apply_multiplier(Dx, f), apply_multiplier(Dy, f)


def divergence(grid: Grid2D, u: Field, v: Field) -> Field:
    Dx, Dy = derivative_symbols(grid)
    return apply_multiplier(Dx, u) + apply_multiplier(Dy, v)


def stabilized_L0(grid: Grid2D, spec: "ModelSpec") -> tuple[FourierMultiplier, FourierMultiplier]:
    """Forward and inverse symbols of the stabilized linear operator L0.

    ``-eps^2 Lap + gamma0`` for Allen-Cahn / Cahn-Hilliard and
    ``(a0 + Lap)^2 + gamma0`` for phase-field crystal.
    """
    lam = _lambda(grid)
    kind = str(getattr(spec.kind, "value", spec.kind)).lower()
    if kind in ("ac", "ch"):
        sym = spec.eps**2 * lam + spec.gamma0
    elif kind == "pfc":
        sym = (spec.a0 - lam) ** 2 + spec.gamma0
    else:
        raise ModelError(f"unknown model kind {spec.kind!r}")
    if not np.all(sym > 0):
        raise ModelError(
            f"L0 symbol not strictly positive (min {sym.min():.3e}); check gamma0"
        )
    fwd = FourierMultiplier(grid, sym)
    return fwd, FourierMultiplier(grid, 1.0 / sym)


def inner_product(grid: Grid2D, f: Field, g: Field) -> float | np.ndarray:
    """Discrete inner product ``hx*hy*sum(f*g)``.

    Two-dimensional inputs are treated column-wise and return the Gram matrix
    ``hx*hy * f.T @ g``.
    """
    f = np.asarray(f)
    g = np.asarray(g)
    if f.shape[0] != grid.n or g.shape[0] != grid.n:
        raise DimensionError("inner product operands are not on the grid")
    if f.ndim == 1 and g.ndim == 1:
        return grid.cell_area * float(np.dot(f, g))
    return grid.cell_area * (f.T @ g)
