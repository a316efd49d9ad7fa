"""Full-order EQ solver used to generate snapshots and reference trajectories.

The scheme is the full-order analogue of the reduced Crank-Nicolson scheme:
with ``gamma = g(3/2 phi^n - 1/2 phi^{n-1})``,

    phi^{n+1} - phi^n = -dt G mu,     mu = L0 phi^{n+1/2} + gamma q^{n+1/2},
    q^{n+1}  - q^n   = gamma (phi^{n+1} - phi^n).

Eliminating ``q^{n+1}`` leaves ``(I + dt/2 G K) phi^{n+1} = b`` with
``K = L0 + gamma^2``.  Multiplying by ``K`` gives the symmetric positive
definite system ``(K + dt/2 K G K) x = K b`` that is solved by preconditioned
conjugate gradients.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .diagnostics import EnergyLog
from .errors import ModelError, NumericError, SolverError
from .model import EqModel, ModelSpec, build_model, energy, initial_condition
from .pod import SnapshotSet
from .spectral import FourierMultiplier, Grid2D

log = logging.getLogger(__name__)

CG_RTOL = 1e-10
CG_MAXITER = 500


@dataclass
class FomState:
    phi: np.ndarray
    q: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        if self.phi.shape != self.q.shape:
            raise ValueError("phi and q must live on the same grid")
        if self.t < 0:
            raise ValueError("time must be non-negative")


def fom_init(spec: ModelSpec, grid: Grid2D, model: EqModel | None = None) -> FomState:
    """Initial state ``(phi0, h(phi0))`` at ``t = 0``."""
    model = model or build_model(spec, grid)
    phi = initial_condition(spec, grid)
    return FomState(phi, model.h(phi), 0.0)


def pcg(apply_A, b, apply_Minv, x0=None, rtol=CG_RTOL, maxiter=CG_MAXITER):
    """Preconditioned conjugate gradients; returns ``(x, iterations)``."""
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - apply_A(x)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), 0
    if np.linalg.norm(r) <= rtol * bnorm:
        return x, 0
    z = apply_Minv(r)
    p = z.copy()
    rz = r @ z
    for it in range(1, maxiter + 1):
        Ap = apply_A(p)
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= rtol * bnorm:
            return x, it
        z = apply_Minv(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(
        f"CG did not reach relative residual {rtol:g} in {maxiter} iterations; "
        "check the time step and model parameters"
    )


def _dissipation(model: EqModel, mu) -> float:
    return model.grid.cell_area * float(mu @ model.apply_G(mu))


def fom_step_cn(state: FomState, model: EqModel, dt: float, prev: FomState | None = None,
                *, rtol: float = CG_RTOL, maxiter: int = CG_MAXITER):
    """One linear CN-EQ step; ``prev`` is the state one step earlier.

    Returns ``(new_state, info)`` where ``info`` carries the dissipation
    ``dt``-rate ``(mu, G mu)`` and the CG iteration count.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if model.has_skew:
        raise ModelError("the full-order solver requires a symmetric mobility")
    phi_n, q_n = state.phi, state.q
    phi_bar = phi_n if prev is None else 1.5 * phi_n - 0.5 * prev.phi
    gam = model.g(phi_bar)
    if not np.all(np.isfinite(gam)):
        raise NumericError("non-finite extrapolated state")
    gam2 = gam * gam
    L0, G = model.L0, model.apply_G

    def K(v):
        return L0(v) + gam2 * v

    c = 0.5 * L0(phi_n) + gam * q_n - 0.5 * gam2 * phi_n
    b = phi_n - dt * G(c)
    half = 0.5 * dt

    def A_sym(v):
        Kv = K(v)
        return Kv + half * K(G(Kv))

    kbar = float(np.mean(gam2))
    Ksym = model.L0.symbol + kbar
    Gsym = model.Gs.symbol
    P = FourierMultiplier(model.grid, 1.0 / (Ksym + half * Ksym * Gsym * Ksym))
    x, iters = pcg(A_sym, K(b), P, x0=phi_n, rtol=rtol, maxiter=maxiter)

    mu = 0.5 * L0(x + phi_n) + gam * (q_n + 0.5 * gam * (x - phi_n))
    phi_new = phi_n - dt * G(mu)
    q_new = q_n + gam * (phi_new - phi_n)
    info = {"dissipation": _dissipation(model, mu), "iterations": iters}
    return FomState(phi_new, q_new, state.t + dt), info


def eq_drift(model: EqModel, phi, q) -> float:
    return model.grid.norm(q - model.h(phi))


def _steps(T: float, dt: float) -> int:
    n = int(round(T / dt))
    if abs(n * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"T={T} is not a multiple of dt={dt}")
    return n


def run_fom(spec: ModelSpec, grid: Grid2D, dt: float, T: float, sample_interval: float,
            *, state: FomState | None = None, progress: bool = False):
    """Integrate to ``T`` recording snapshots every ``sample_interval``.

    Snapshot columns are taken at ``t_k = k * sample_interval`` for
    ``k = 1..floor(T / sample_interval)``.  When no such time exists
    (``T < sample_interval``) the initial state is recorded instead.

    Returns ``(SnapshotSet, EnergyLog)``; the log has one row per step plus
    the initial row.
    """
    if not sample_interval > 0:
        raise ValueError("sample_interval must be positive")
    every = _steps(sample_interval, dt)
    if every < 1:
        raise ValueError("sample_interval must be a positive multiple of dt")
    nsteps = _steps(T, dt)
    model = build_model(spec, grid)
    st = state or fom_init(spec, grid, model)
    t0 = st.t
    initial = st.phi.copy()

    elog = EnergyLog(metadata={"model": spec.kind.value, "scheme": "fom-cn"})
    elog.append(st.t, energy(st.phi, st.q, model), mass=grid.integrate(st.phi),
                eq_drift=eq_drift(model, st.phi, st.q))
    cols, times = [], []
    prev = None
    for k in range(1, nsteps + 1):
        new, info = fom_step_cn(st, model, dt, prev)
        prev, st = st, new
        st.t = t0 + k * dt
        elog.append(st.t, energy(st.phi, st.q, model), dissipation=info["dissipation"],
                    mass=grid.integrate(st.phi), eq_drift=eq_drift(model, st.phi, st.q))
        if k % every == 0:
            cols.append(st.phi.copy())
            times.append(st.t)
        if progress and k % max(1, nsteps // 20) == 0:
            log.info("fom step %d/%d t=%.4f E=%.8f cg=%d", k, nsteps, st.t,
                     elog.rows[-1][1], info["iterations"])
    if not cols:
        cols.append(initial)
        times.append(t0)
    Phi = np.column_stack(cols)
    snaps = SnapshotSet.from_states(Phi, model.h, np.array(times), grid, sample_interval)
    return snaps, elog


def integrate(state: FomState, model: EqModel, dt: float, nsteps: int) -> FomState:
    """Advance ``state`` by ``nsteps`` steps and return the final state."""
    prev = None
    t0 = state.t
    for k in range(1, nsteps + 1):
        new, _ = fom_step_cn(state, model, dt, prev)
        prev, state = state, new
        state.t = t0 + k * dt
    return state
