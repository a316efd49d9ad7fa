"""Command-line interface: ``eqrom {fom,svd,pod,rom,compare}``.

Exit codes: 0 success, 2 configuration error, 3 numeric or solver error,
4 I/O or file-format error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings

import numpy as np

from . import io
from .deim import deim_build
from .errors import ConfigError, DimensionError, FormatError, ModelError, NumericError
from .fom import run_fom
from .model import build_model, g_builtin, initial_condition
from .pod import SnapshotSet, compute_basis, left_singular_vectors, truncation_rank
from .rom import RomSystem
from .stepper import SchemeConfig, init_reduced, integrate

log = logging.getLogger("eqrom")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def _pick(cli_value, cfg: io.RunConfig | None, key: str):
    if cli_value:
        return cli_value
    if cfg is None:
        raise ConfigError(f"missing required path '{key}'")
    return cfg.path(key)


def cmd_fom(args) -> int:
    cfg = io.load_config(args.config)
    snaps_out = _pick(args.snapshots_out, cfg, "snapshots")
    t = cfg.time
    snaps, elog = run_fom(cfg.model, cfg.grid, t.dt, t.T, t.sample_interval, progress=True)
    io.write_snapshots(snaps_out, snaps)
    if args.energy_out:
        io.write_energy_csv(args.energy_out, elog)
    log.info("wrote %d snapshots to %s", snaps.m, snaps_out)
    return EXIT_OK


def cmd_svd(args) -> int:
    S = io.read_snapshots(args.snapshots)
    _, sp, _ = _sigma(S.Phi)
    _, sq, _ = _sigma(S.Q)
    rows = [(str(j + 1), sp[j], sq[j]) for j in range(len(sp))]
    io.write_rows_csv(args.out, ("index", "sigma_phi", "sigma_q"), rows)
    return EXIT_OK


def _sigma(X):
    return left_singular_vectors(X, 1)


def cmd_pod(args) -> int:
    S = io.read_snapshots(args.snapshots)
    if args.threshold is not None:
        if not args.threshold > 0:
            raise ConfigError("--threshold must be positive")
        _, sp, _ = _sigma(S.Phi)
        _, sq, _ = _sigma(S.Q)
        r = max(truncation_rank(sp, args.threshold, args.threshold_mode),
                truncation_rank(sq, args.threshold, args.threshold_mode))
    else:
        r = args.rank
    if not 1 <= r <= min(S.n, S.m):
        raise ConfigError(f"--rank {r} must satisfy 1 <= r <= min(n, m) = {min(S.n, S.m)}")
    basis = compute_basis(S, r)
    if args.deim:
        basis.deim = deim_build(g_builtin(S.Phi), args.deim)
        log.info("DEIM k=%d, cond(P^T W)=%.3e", args.deim, basis.deim.condition)
    io.write_basis(args.basis_out, basis)
    log.info("wrote rank-%d basis to %s", r, args.basis_out)
    return EXIT_OK


def cmd_rom(args) -> int:
    cfg = io.load_config(args.config)
    basis = io.read_basis(_pick(args.basis, cfg, "basis"))
    rc = cfg.rom
    variant = args.variant or rc.variant
    scheme = args.scheme or rc.scheme
    relaxed = rc.relaxed if args.relaxed is None else args.relaxed
    eta = rc.eta if args.eta is None else args.eta
    scfg = SchemeConfig(scheme, variant, relaxed, eta, cfg.time.dt)
    if basis.n != cfg.grid.n:
        raise ConfigError(f"basis has {basis.n} rows but [grid] has {cfg.grid.n} points")
    model = build_model(cfg.model, cfg.grid)
    deim = None
    if rc.deim:
        if basis.deim is None:
            raise ConfigError("[rom] deim is set but the basis file has no DEIM section")
        deim = basis.deim
    sys_ = RomSystem(basis, model, deim=deim)
    a0 = init_reduced(sys_, initial_condition(cfg.model, cfg.grid)).a
    tr = integrate(sys_, a0, scfg, cfg.time.T, cfg.time.sample_interval)
    Phi = sys_.Uphi @ tr.coefficients[: sys_.r]
    Q = sys_.Uq @ tr.coefficients[sys_.r:]
    traj = SnapshotSet(Phi, Q, tr.times, cfg.grid, cfg.time.sample_interval)
    io.write_snapshots(_pick(args.traj_out, cfg, "outputs"), traj)
    if args.energy_out:
        io.write_energy_csv(args.energy_out, tr.log)
    if scfg.is_extension:
        log.warning("%s is an extension combination", scfg.label())
    log.info("ROM %s done: E(T)=%.8g", scfg.label(), tr.log.energy[-1])
    return EXIT_OK


def _energy_at(elog, times, tol):
    t = elog.t
    out = np.empty(len(times))
    for i, ti in enumerate(times):
        j = int(np.argmin(np.abs(t - ti)))
        if abs(t[j] - ti) > tol:
            raise FormatError(f"energy log has no row at t={ti:g}")
        out[i] = elog.energy[j]
    return out


def cmd_compare(args) -> int:
    F = io.read_snapshots(args.fom_snapshots)
    R = io.read_snapshots(args.rom_traj)
    if F.n != R.n:
        raise DimensionError("FOM snapshots and ROM trajectory live on different grids")
    fe = io.read_energy_csv(args.fom_energy)
    re_ = io.read_energy_csv(args.rom_energy)
    tol = 1e-9 * max(1.0, float(np.max(np.abs(F.times))))
    pairs = []
    for i, t in enumerate(F.times):
        j = np.flatnonzero(np.abs(R.times - t) <= tol)
        if j.size:
            pairs.append((i, int(j[0])))
    if not pairs:
        raise FormatError("FOM and ROM files share no sample times")
    fi, ri = map(list, zip(*pairs))
    times = F.times[fi]
    diff = np.linalg.norm(R.Phi[:, ri] - F.Phi[:, fi], axis=0)
    ref = np.linalg.norm(F.Phi[:, fi], axis=0)
    state_err = diff / np.where(ref > 0, ref, 1.0)
    E_f = _energy_at(fe, times, tol)
    E_r = _energy_at(re_, times, tol)
    E0 = abs(fe.energy[0]) or 1.0
    e_abs = np.abs(E_r - E_f)
    rows = [(repr(float(t)), s, a, a / E0) for t, s, a in zip(times, state_err, e_abs)]
    rows.append(("max", state_err.max(), e_abs.max(), e_abs.max() / E0))
    rows.append(("mean", state_err.mean(), e_abs.mean(), e_abs.mean() / E0))
    io.write_rows_csv(args.report, ("t", "state_rel_l2_error", "energy_abs_error",
                                    "energy_rel_error"), rows)
    print(f"max state error {state_err.max():.4e}, max relative energy error {e_abs.max() / E0:.4e}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eqrom", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fom", help="run the full-order model and record snapshots")
    f.add_argument("--config", required=True)
    f.add_argument("--snapshots-out")
    f.add_argument("--energy-out")
    f.set_defaults(func=cmd_fom)

    s = sub.add_parser("svd", help="singular values of a snapshot file")
    s.add_argument("--snapshots", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_svd)

    b = sub.add_parser("pod", help="build a POD basis (and optional DEIM operator)")
    b.add_argument("--snapshots", required=True)
    g = b.add_mutually_exclusive_group(required=True)
    g.add_argument("--rank", type=int)
    g.add_argument("--threshold", type=float)
    b.add_argument("--threshold-mode", choices=("relative", "absolute"), default="relative")
    b.add_argument("--basis-out", required=True)
    b.add_argument("--deim", type=int, metavar="K")
    b.set_defaults(func=cmd_pod)

    r = sub.add_parser("rom", help="integrate a reduced model")
    r.add_argument("--config", required=True)
    r.add_argument("--basis")
    r.add_argument("--variant", choices=("vanilla", "i", "ii"))
    r.add_argument("--scheme", choices=("cn", "bdf2"))
    r.add_argument("--relaxed", action=argparse.BooleanOptionalAction, default=None)
    r.add_argument("--eta", type=float)
    r.add_argument("--traj-out")
    r.add_argument("--energy-out")
    r.set_defaults(func=cmd_rom)

    c = sub.add_parser("compare", help="state and energy errors of a ROM run against the FOM")
    c.add_argument("--fom-energy", required=True)
    c.add_argument("--rom-energy", required=True)
    c.add_argument("--fom-snapshots", required=True)
    c.add_argument("--rom-traj", required=True)
    c.add_argument("--report", required=True)
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except (ConfigError, ModelError, DimensionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FormatError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
