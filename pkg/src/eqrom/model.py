"""Built-in gradient-flow models in energy-quadratized (EQ) form.

Each model is the triple (state, mobility, free energy) rewritten with the
auxiliary variable ``q = h(phi)`` so that the free energy becomes
``1/2 (phi, L0 phi) + 1/2 (q, q)`` up to a constant.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import ModelError
from .spectral import (
    FourierMultiplier,
    Grid2D,
    inner_product,
    laplacian_symbol,
    stabilized_L0,
)

SQRT2 = np.sqrt(2.0)

# Seven disks of the Allen-Cahn benchmark, in units of the domain lengths.
DISK_X = np.array([1 / 4, 1 / 8, 1 / 4, 1 / 2, 3 / 4, 1 / 2, 3 / 4])
DISK_Y = np.array([1 / 4, 3 / 8, 5 / 8, 1 / 8, 1 / 8, 1 / 2, 3 / 4])
DISK_R = np.array([1 / 20, 1 / 16, 1 / 12, 1 / 12, 1 / 10, 1 / 8, 1 / 8])

PFC_CENTERS = ((0.25, 0.25), (0.75, 0.25), (0.5, 0.75))


class ModelKind(str, enum.Enum):
    AC = "ac"
    CH = "ch"
    PFC = "pfc"


_DEFAULTS = {
    ModelKind.AC: dict(M=1.0, eps=0.02, gamma0=1.0),
    ModelKind.CH: dict(M=0.01, eps=0.02, gamma0=2.0),
    ModelKind.PFC: dict(M=1.0, a0=1.0, b0=0.325, gamma0=1.0),
}


@dataclass(frozen=True)
class ModelSpec:
    """Parameters of one built-in model.

    ``pfc_mean``, ``pfc_amp`` and ``pfc_radius`` only shape the crystalline
    seed used as the phase-field-crystal initial condition.
    """

    kind: ModelKind
    M: float = 1.0
    eps: float = 0.02
    a0: float = 1.0
    b0: float = 0.325
    gamma0: float = 1.0
    A0_energy: float = 0.0
    pfc_mean: float = 0.06
    pfc_amp: float = 0.2
    pfc_radius: float = 10.0

    def __post_init__(self):
        try:
            kind = ModelKind(str(getattr(self.kind, "value", self.kind)).lower())
        except ValueError:
            raise ModelError(f"unknown model kind {self.kind!r}") from None
        object.__setattr__(self, "kind", kind)
        if not self.M > 0:
            raise ModelError(f"M must be positive, got {self.M}")
        if not self.gamma0 > 0:
            raise ModelError(f"gamma0 must be positive, got {self.gamma0}")
        if kind in (ModelKind.AC, ModelKind.CH) and not self.eps > 0:
            raise ModelError(f"eps must be positive, got {self.eps}")
        if self.A0_energy < 0:
            raise ModelError("A0_energy must be non-negative")

    @classmethod
    def defaults(cls, kind, **overrides) -> "ModelSpec":
        """Benchmark parameters for ``kind`` with optional overrides."""
        kind = ModelKind(str(getattr(kind, "value", kind)).lower())
        params = dict(_DEFAULTS[kind])
        params.update(overrides)
        return cls(kind=kind, **params)

    def with_(self, **changes) -> "ModelSpec":
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class EqModel:
    """Discrete EQ reformulation of a model on a grid."""

    spec: ModelSpec
    grid: Grid2D
    L0: FourierMultiplier
    L0_inv: FourierMultiplier
    Gs: FourierMultiplier
    Ga: FourierMultiplier | None
    h: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    g: Callable[[np.ndarray], np.ndarray] = field(repr=False)

    @property
    def G(self) -> FourierMultiplier:
        """Total mobility ``Gs + Ga``."""
        return self.Gs if self.Ga is None else self.Gs + self.Ga

    @property
    def has_skew(self) -> bool:
        return self.Ga is not None and bool(np.any(self.Ga.symbol))

    def apply_L0(self, f):
        return self.L0(f)

    def apply_G(self, f):
        if self.Ga is None:
            return _apply_maybe_scalar(self.Gs, f)
        return self.G(f)


def _apply_maybe_scalar(m: FourierMultiplier, f):
    # constant symbols (Allen-Cahn mobility) need no transform
    s = m.symbol
    if m.is_real and np.all(s == s.flat[0]):
        return s.flat[0] * np.asarray(f)
    return m(f)


def _quad_h(shift: float):
    c = SQRT2 / 2

    def h(phi):
        return c * (np.asarray(phi) ** 2 - shift)

    return h


def g_builtin(phi):
    return SQRT2 * np.asarray(phi)


def build_model(spec: ModelSpec, grid: Grid2D) -> EqModel:
    """Assemble the EQ operators of ``spec`` on ``grid``."""
    L0, L0_inv = stabilized_L0(grid, spec)
    if spec.kind is ModelKind.AC:
        Gs = FourierMultiplier(grid, np.full(grid.shape, spec.M))
        h = _quad_h(1.0 + spec.gamma0)
    elif spec.kind is ModelKind.CH:
        Gs = -spec.M * laplacian_symbol(grid)
        h = _quad_h(1.0 + spec.gamma0)
    elif spec.kind is ModelKind.PFC:
        Gs = -spec.M * laplacian_symbol(grid)
        h = _quad_h(spec.b0 + spec.gamma0)
    else:  # pragma: no cover - ModelSpec validates kind
        raise ModelError(f"unknown model kind {spec.kind!r}")
    if np.any(Gs.symbol < 0):
        raise ModelError("symmetric mobility symbol must be non-negative")
    return EqModel(spec=spec, grid=grid, L0=L0, L0_inv=L0_inv, Gs=Gs, Ga=None, h=h, g=g_builtin)


def with_mobility(model: EqModel, Gs: FourierMultiplier, Ga: FourierMultiplier | None) -> EqModel:
    """Copy of ``model`` with a different mobility split.

    ``Ga`` must have a purely imaginary, odd symbol (a skew operator).
    """
    if np.iscomplexobj(Gs.symbol) or np.any(Gs.symbol < 0):
        raise ModelError("Gs symbol must be real and non-negative")
    if Ga is not None and np.any(np.real(Ga.symbol)):
        raise ModelError("Ga symbol must be purely imaginary")
    return replace(model, Gs=Gs, Ga=Ga)


def energy(phi, q, model: EqModel) -> float:
    """Quadratized energy ``1/2 (phi, L0 phi) + 1/2 (q, q)`` (no A0 shift)."""
    grid = model.grid
    return 0.5 * inner_product(grid, phi, model.L0(phi)) + 0.5 * inner_product(grid, q, q)


def free_energy(phi, model: EqModel) -> float:
    """Original (non-quadratized) discrete free energy of ``phi``."""
    spec, grid = model.spec, model.grid
    phi = np.asarray(phi)
    lap = laplacian_symbol(grid)
    if spec.kind is ModelKind.PFC:
        op = lap + spec.a0
        lin = 0.5 * inner_product(grid, phi, op(op(phi))) - 0.5 * spec.b0 * inner_product(grid, phi, phi)
        return lin + 0.25 * grid.cell_area * float(np.sum(phi**4))
    grad = -0.5 * spec.eps**2 * inner_product(grid, phi, lap(phi))
    return grad + 0.25 * grid.cell_area * float(np.sum((phi**2 - 1) ** 2))


def eq_energy_offset(model: EqModel) -> float:
    """Constant ``energy(phi, h(phi)) - free_energy(phi)`` for the built-ins."""
    s, area = model.spec, model.grid.area
    if s.kind is ModelKind.PFC:
        return area * 0.25 * (s.b0 + s.gamma0) ** 2
    return area * (s.gamma0 / 2 + s.gamma0**2 / 4)


def initial_condition(spec: ModelSpec, grid: Grid2D) -> np.ndarray:
    """Initial phase field of the benchmarks.

    Allen-Cahn / Cahn-Hilliard: seven tanh-profiled disks.  Phase-field
    crystal: three hexagonal-crystal seeds of radius ``pfc_radius`` on a
    uniform background ``pfc_mean``.
    """
    x, y = grid.coordinates()
    if spec.kind is ModelKind.PFC:
        return _pfc_seeds(spec, grid, x, y)
    phi = np.zeros_like(x)
    for X, Y, R in zip(DISK_X * grid.Lx, DISK_Y * grid.Ly, DISK_R * grid.Lx):
        d = np.hypot(x - X, y - Y)
        phi += 0.5 * (1.0 - np.tanh((d - R) / spec.eps))
    return 2.0 * phi - 1.0


def _pfc_seeds(spec: ModelSpec, grid: Grid2D, x, y):
    qt = np.sqrt(3.0) / 2.0 * np.sqrt(spec.a0)
    phi = np.full_like(x, spec.pfc_mean)
    for cx, cy in PFC_CENTERS:
        xc, yc = cx * grid.Lx, cy * grid.Ly
        xp, yp = x - xc, y - yc
        inside = xp**2 + yp**2 <= spec.pfc_radius**2
        crystal = np.cos(qt * xp) * np.cos(qt * yp / np.sqrt(3.0)) - 0.5 * np.cos(
            2 * qt * yp / np.sqrt(3.0)
        )
        phi[inside] = spec.pfc_mean + spec.pfc_amp * crystal[inside]
    return phi
