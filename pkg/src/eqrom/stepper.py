"""Linear, energy-stable time integrators for the reduced models.

Every scheme solves one dense ``2r x 2r`` linear system per step.  The
nonlinear coefficient ``gamma`` is frozen at an extrapolated state
(``3/2 a^n - 1/2 a^{n-1}`` for Crank-Nicolson, ``2 a^n - a^{n-1}`` for BDF2),
which keeps each step linear.  The relaxed variants then pull the auxiliary
coefficients back towards ``U_q^T h(U_phi a_phi)`` while spending at most a
fraction ``eta`` of the step's dissipation.
"""

from __future__ import annotations

import enum
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .diagnostics import EnergyLog
from .errors import ConfigError, DimensionError, NumericError, SolvabilityError
from .rom import (
    DynamicOperators,
    ReducedState,
    RomSystem,
    Variant,
    assemble_dynamic,
    dissipation,
    flux_matrices,
    modified_bdf2_energy,
    reduced_energy,
)

log = logging.getLogger(__name__)

FEAS_TOL = 1e-10


class Scheme(str, enum.Enum):
    CN = "cn"
    BDF2 = "bdf2"


RELAXED_COMBOS = {(Scheme.CN, Variant.II), (Scheme.BDF2, Variant.II), (Scheme.CN, Variant.I)}
EXTENSION_COMBOS = {(Scheme.BDF2, Variant.I)}


@dataclass(frozen=True)
class SchemeConfig:
    scheme: Scheme = Scheme.CN
    variant: Variant = Variant.II
    relaxed: bool = False
    eta: float = 0.99
    dt: float = 1e-3

    def __post_init__(self):
        try:
            object.__setattr__(self, "scheme", Scheme(str(getattr(self.scheme, "value", self.scheme)).lower()))
            object.__setattr__(self, "variant", Variant(str(getattr(self.variant, "value", self.variant)).lower()))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigError(f"eta must lie in [0, 1], got {self.eta}")
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.relaxed and self.variant is Variant.VANILLA:
            raise ConfigError("relaxation is defined for variants I and II only")

    @property
    def is_extension(self) -> bool:
        return self.relaxed and (self.scheme, self.variant) in EXTENSION_COMBOS

    def label(self) -> str:
        s = f"{self.scheme.value}-{self.variant.value}"
        if self.relaxed:
            s += f"-relaxed(eta={self.eta:g})"
        if self.is_extension:
            s += " [extension]"
        return s


@dataclass
class StepResult:
    """Outcome of one step; ``matrix`` is the assembled step matrix."""

    a: np.ndarray
    dissipation: float
    matrix: np.ndarray
    a_hat: np.ndarray | None = None
    xi0: float = float("nan")
    dyn: DynamicOperators | None = field(default=None, repr=False)


def init_reduced(sys: RomSystem, phi0) -> ReducedState:
    """Weighted projections ``a_phi = (U_phi, phi0)``, ``a_q = (U_q, h(phi0))``."""
    phi0 = np.asarray(phi0, dtype=float)
    if phi0.shape != (sys.grid.n,):
        raise DimensionError("initial field is not on the basis grid")
    return ReducedState(sys.project_phi(phi0), sys.project_q(sys.model.h(phi0)), 0.0)


def _extrapolate(a_n, a_prev, scheme: Scheme):
    if a_prev is None:
        return a_n
    if scheme is Scheme.CN:
        return 1.5 * a_n - 0.5 * a_prev
    return 2.0 * a_n - a_prev


def _solve(A, b):
    try:
        lu = sla.lu_factor(A, check_finite=True)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise SolvabilityError(f"step matrix factorization failed: {exc}") from None
    if np.any(np.diag(lu[0]) == 0):
        raise SolvabilityError("step matrix is singular")
    return sla.lu_solve(lu, b)


def linear_step(sys: RomSystem, a_n, a_prev, scheme, variant, dt) -> StepResult:
    """Unrelaxed CN or BDF2 step of any variant.

    ``a_prev=None`` marks the first step: the coefficient is frozen at
    ``a_n`` and BDF2 falls back to one Crank-Nicolson step.
    """
    scheme, variant = Scheme(scheme), Variant(variant)
    a_n = np.asarray(a_n, dtype=float)
    if scheme is Scheme.BDF2 and a_prev is None:
        scheme = Scheme.CN
    a_bar = _extrapolate(a_n, a_prev, scheme)
    dyn = assemble_dynamic(sys, sys.split(a_bar)[0])
    M, K = flux_matrices(sys, dyn, variant)
    if scheme is Scheme.CN:
        A = M / dt + 0.5 * K
        b = M @ a_n / dt - 0.5 * (K @ a_n)
        a_new = _solve(A, b)
        diss = dissipation(sys, dyn, variant, 0.5 * (a_new + a_n))
    else:
        A = 1.5 * M / dt + K
        b = M @ (4.0 * a_n - np.asarray(a_prev)) / (2.0 * dt)
        a_new = _solve(A, b)
        diss = dissipation(sys, dyn, variant, a_new)
    return StepResult(a_new, diss, A, dyn=dyn)


def step_cn_ii(sys, a_n, a_prev, cfg: SchemeConfig) -> np.ndarray:
    return linear_step(sys, a_n, a_prev, Scheme.CN, Variant.II, cfg.dt).a


def step_bdf2_ii(sys, a_n, a_prev, cfg: SchemeConfig) -> np.ndarray:
    return linear_step(sys, a_n, a_prev, Scheme.BDF2, Variant.II, cfg.dt).a


def step_cn_i(sys, a_n, a_prev, cfg: SchemeConfig) -> np.ndarray:
    return linear_step(sys, a_n, a_prev, Scheme.CN, Variant.I, cfg.dt).a


def step_bdf2_i(sys, a_n, a_prev, cfg: SchemeConfig) -> np.ndarray:
    return linear_step(sys, a_n, a_prev, Scheme.BDF2, Variant.I, cfg.dt).a


def energy_metric_matrix(sys: RomSystem, res: StepResult, variant) -> np.ndarray:
    """Step matrix in the form whose positive definiteness proves solvability.

    For II the step matrix itself; for I and vanilla it is ``Lam A``.
    """
    if Variant(variant) is Variant.II:
        return res.matrix
    return sys.Lam @ res.matrix


def rayleigh_check(A, n_samples=100, rng=None) -> float:
    """Smallest ``x^T A x / x^T x`` over random unit vectors."""
    rng = np.random.default_rng(rng)
    X = rng.standard_normal((A.shape[0], n_samples))
    X /= np.linalg.norm(X, axis=0)
    return float(np.min(np.einsum("ij,ij->j", X, A @ X)))


# -- relaxation --------------------------------------------------------------


def xi0_closed_form(A: float, B: float, C: float) -> float:
    """Smallest ``xi`` in ``[0, 1]`` with ``A xi^2 + B xi + C <= 0``.

    Assumes ``xi = 1`` is feasible.  In the relaxation step ``A >= 0``; the
    linear and concave cases are handled for completeness.
    """
    if C <= 0:
        return 0.0
    if A == 0:
        return min(1.0, -C / B) if B < 0 else 1.0
    disc = B * B - 4.0 * A * C
    if disc < 0:
        warnings.warn("relaxation quadratic has no real root; using xi0 = 1", stacklevel=2)
        return 1.0
    # stable pair of roots q/A and C/q
    qq = -0.5 * (B + math.copysign(math.sqrt(disc), B))
    roots = [qq / A] + ([C / qq] if qq != 0 else [])
    if A > 0:
        # f(0) = C > 0: both roots share a sign; the first crossing is the smaller
        root = min(roots)
    else:
        # concave with f(0) > 0: one negative root, the other is the crossing
        root = max(roots)
    return min(1.0, max(0.0, root))


def _ip(sys, f, g):
    return sys.w * float(f @ g)


def relax_coefficients_cn(sys: RomSystem, a_hat, diss: float, eta: float, dt: float):
    """Quadratic ``(A, B, C)`` of the CN relaxation constraint.

    ``diss`` is the dissipation term of the linear step; the budget is
    ``dt * eta * diss``.
    """
    a_phi, a_q_hat = sys.split(a_hat)
    h = sys.model.h(sys.Uphi @ a_phi)
    qh = sys.Uq @ a_q_hat
    d = qh - h
    A = 0.5 * _ip(sys, d, d)
    B = _ip(sys, h, d)
    C = 0.5 * _ip(sys, h, h) - 0.5 * _ip(sys, qh, qh) - dt * eta * diss
    return A, B, C


def relax_coefficients_bdf2(sys: RomSystem, a_hat, a_n, diss: float, eta: float, dt: float):
    """Quadratic ``(A, B, C)`` of the BDF2 relaxation constraint."""
    a_phi, a_q_hat = sys.split(a_hat)
    h = sys.model.h(sys.Uphi @ a_phi)
    qh = sys.Uq @ a_q_hat
    qn = sys.Uq @ sys.split(a_n)[1]
    d = qh - h
    A = 1.25 * _ip(sys, d, d)
    B = 0.5 * _ip(sys, d, 5.0 * h - 2.0 * qn)
    e1, e2 = 2.0 * h - qn, 2.0 * qh - qn
    C = 0.25 * (_ip(sys, h, h) + _ip(sys, e1, e1) - _ip(sys, qh, qh) - _ip(sys, e2, e2)) - dt * eta * diss
    return A, B, C


def relaxed_step(sys: RomSystem, a_n, a_prev, cfg: SchemeConfig) -> StepResult:
    """Linear step followed by the optimal relaxation of ``a_q``."""
    combo = (cfg.scheme, cfg.variant)
    if combo not in RELAXED_COMBOS | EXTENSION_COMBOS:
        raise ConfigError(f"no relaxed scheme for {cfg.scheme.value}/{cfg.variant.value}")
    res = linear_step(sys, a_n, a_prev, cfg.scheme, cfg.variant, cfg.dt)
    a_hat = res.a
    bdf2 = cfg.scheme is Scheme.BDF2 and a_prev is not None
    if bdf2:
        A, B, C = relax_coefficients_bdf2(sys, a_hat, a_n, res.dissipation, cfg.eta, cfg.dt)
    else:
        A, B, C = relax_coefficients_cn(sys, a_hat, res.dissipation, cfg.eta, cfg.dt)
    # xi = 1 is feasible by construction: A + B + C = -dt * eta * diss
    if A + B + C > FEAS_TOL * (abs(A) + abs(B) + abs(C)):
        raise NumericError(f"relaxation infeasible at xi = 1 (A+B+C = {A + B + C:.3e})")
    xi = xi0_closed_form(A, B, C)
    a_phi, a_q_hat = sys.split(a_hat)
    hq = sys.project_q(sys.model.h(sys.Uphi @ a_phi))
    a_q = xi * a_q_hat + (1.0 - xi) * hq
    return StepResult(np.concatenate([a_phi, a_q]), res.dissipation, res.matrix,
                      a_hat=a_hat, xi0=xi, dyn=res.dyn)


def step(sys: RomSystem, a_n, a_prev, cfg: SchemeConfig) -> StepResult:
    if cfg.relaxed:
        return relaxed_step(sys, a_n, a_prev, cfg)
    return linear_step(sys, a_n, a_prev, cfg.scheme, cfg.variant, cfg.dt)


# -- trajectories ------------------------------------------------------------


@dataclass
class Trajectory:
    times: np.ndarray
    coefficients: np.ndarray  # (2r, m) sampled reduced vectors
    log: EnergyLog
    final: np.ndarray
    steps: list[StepResult] | None = None


def integrate(sys: RomSystem, a0, cfg: SchemeConfig, T: float, sample_interval: float | None = None,
              *, keep_steps: bool = False, t0: float = 0.0) -> Trajectory:
    """Integrate from ``a0`` to ``T`` and record samples and per-step diagnostics.

    Samples are taken at ``k * sample_interval`` (``k >= 1``); with no sample
    interval only the final state is recorded.
    """
    dt = cfg.dt
    nsteps = int(round(T / dt))
    if abs(nsteps * dt - T) > 1e-9 * max(1.0, T):
        raise ConfigError(f"T={T} is not a multiple of dt={dt}")
    every = None
    if sample_interval:
        every = int(round(sample_interval / dt))
        if every < 1 or abs(every * dt - sample_interval) > 1e-9 * max(1.0, sample_interval):
            raise ConfigError("sample_interval must be a positive multiple of dt")
    a_n = np.asarray(a0, dtype=float).copy()
    a_prev = None
    bdf2 = cfg.scheme is Scheme.BDF2
    elog = EnergyLog(metadata={"scheme": cfg.label()})
    elog.append(t0, reduced_energy(sys, a_n),
                modified_energy=modified_bdf2_energy(sys, a_n, a_n) if bdf2 else np.nan,
                mass=sys.mass(a_n), eq_drift=sys.eq_drift(a_n))
    times, samples, kept = [], [], []
    for k in range(1, nsteps + 1):
        res = step(sys, a_n, a_prev, cfg)
        a_prev, a_n = a_n, res.a
        t = t0 + k * dt
        elog.append(t, reduced_energy(sys, a_n),
                    modified_energy=modified_bdf2_energy(sys, a_n, a_prev) if bdf2 else np.nan,
                    dissipation=res.dissipation, xi0=res.xi0,
                    mass=sys.mass(a_n), eq_drift=sys.eq_drift(a_n))
        if keep_steps:
            kept.append(res)
        if every and k % every == 0:
            times.append(t)
            samples.append(a_n.copy())
    if not samples:
        times.append(t0 + nsteps * dt)
        samples.append(a_n.copy())
    return Trajectory(np.array(times), np.column_stack(samples), elog, a_n,
                      kept if keep_steps else None)
