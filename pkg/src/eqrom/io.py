"""Run configuration, binary snapshot/basis formats and CSV diagnostics.

Binary layouts (all little-endian, no padding):

snapshots / trajectories::

    b"PODSNAP1" | u32 Nx | u32 Ny | u32 m | f64 Lx | f64 Ly | f64 sample_interval
    | Phi (m columns of n f64) | Q (m columns of n f64) | times (m f64)

basis::

    b"PODBASE1" | u32 n | u32 r | u32 k_deim | u32 s
    | U_phi (r columns of n f64) | U_q (r columns) | sigma_phi (s f64) | sigma_q (s f64)
    [ | W (k columns of n f64) | indices (k u32) | M (k columns of n f64) ]

``s`` is the number of stored singular values (``min(n, m)`` of the source
snapshots).
"""

from __future__ import annotations

import configparser
import csv
import io as _io
import math
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .deim import DeimOperator
from .diagnostics import COLUMNS, EnergyLog
from .errors import ConfigError, FormatError, ModelError
from .model import ModelKind, ModelSpec
from .pod import PodBasis, SnapshotSet
from .spectral import Grid2D

SNAP_MAGIC = b"PODSNAP1"
BASIS_MAGIC = b"PODBASE1"
_SNAP_HEADER = struct.Struct("<8sIIIddd")
_BASIS_HEADER = struct.Struct("<8sIIII")
ORTHO_TOL = 1e-10
U32_MAX = 2**32 - 1

_UMASK = os.umask(0)
os.umask(_UMASK)


# -- configuration -----------------------------------------------------------

_TIME_DEFAULTS = {
    ModelKind.AC: dict(dt=1e-3, T=15.0, sample_interval=0.1),
    ModelKind.CH: dict(dt=1e-3, T=90.0, sample_interval=0.1),
    ModelKind.PFC: dict(dt=1e-3, T=100.0, sample_interval=1.0),
}
_GRID_DEFAULTS = {
    ModelKind.AC: dict(Nx=128, Ny=128, Lx=1.0, Ly=1.0),
    ModelKind.CH: dict(Nx=128, Ny=128, Lx=1.0, Ly=1.0),
    ModelKind.PFC: dict(Nx=128, Ny=128, Lx=100.0, Ly=100.0),
}

_MODEL_KEYS = {"kind": str, "M": float, "eps": float, "a0": float, "b0": float,
               "gamma0": float, "A0": float, "pfc_mean": float, "pfc_amp": float,
               "pfc_radius": float}
_GRID_KEYS = {"Nx": int, "Ny": int, "Lx": float, "Ly": float}
_TIME_KEYS = {"dt": float, "T": float, "sample_interval": float}
_ROM_KEYS = {"variant": str, "scheme": str, "relaxed": bool, "eta": float, "rank": int,
             "threshold": float, "threshold_mode": str, "deim": bool, "deim_rank": int}
_PATH_KEYS = {"snapshots": str, "basis": str, "outputs": str}
_SECTIONS = {"model": _MODEL_KEYS, "grid": _GRID_KEYS, "time": _TIME_KEYS,
             "rom": _ROM_KEYS, "paths": _PATH_KEYS}


@dataclass(frozen=True)
class TimeConfig:
    dt: float
    T: float
    sample_interval: float


@dataclass(frozen=True)
class RomConfig:
    variant: str = "ii"
    scheme: str = "cn"
    relaxed: bool = False
    eta: float = 0.99
    rank: int | None = 10
    threshold: float | None = None
    threshold_mode: str = "relative"
    deim: bool = False
    deim_rank: int | None = None


@dataclass(frozen=True)
class RunConfig:
    model: ModelSpec
    grid: Grid2D
    time: TimeConfig
    rom: RomConfig = field(default_factory=RomConfig)
    paths: dict = field(default_factory=dict)

    def path(self, key: str) -> Path:
        """Configured path ``key``; a missing entry is a config error naming it."""
        if not self.paths.get(key):
            raise ConfigError(f"missing required path '{key}' in [paths]")
        return Path(self.paths[key])


def _convert(section, key, raw, typ):
    try:
        if typ is bool:
            v = raw.strip().lower()
            if v in ("1", "true", "yes", "on"):
                return True
            if v in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ is int:
            f = float(raw)
            if not f.is_integer():
                raise ValueError(raw)
            return int(f)
        if typ is float:
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError(raw)
            return v
        return raw.strip()
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} as {typ.__name__}") from None


def _read_sections(text: str) -> dict:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keep key case (Nx, M, T)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    out = {}
    for sec in cp.sections():
        if sec not in _SECTIONS:
            raise ConfigError(f"unknown section [{sec}]")
        keys = _SECTIONS[sec]
        vals = {}
        for k, raw in cp.items(sec):
            if k not in keys:
                raise ConfigError(f"unknown key '{k}' in [{sec}]")
            vals[k] = _convert(sec, k, raw, keys[k])
        out[sec] = vals
    return out


def parse_config(text: str) -> RunConfig:
    """Parse and validate a sectioned ``key = value`` run configuration.

    Sections are ``[model]``, ``[grid]``, ``[time]``, ``[rom]`` and
    ``[paths]``.  Only ``[model] kind`` is required; everything else falls
    back to the defaults of the chosen model.
    """
    sec = _read_sections(text)
    m = dict(sec.get("model", {}))
    if "kind" not in m:
        raise ConfigError("missing required key 'kind' in [model]")
    try:
        kind = ModelKind(m.pop("kind").lower())
    except ValueError:
        raise ConfigError("[model] kind must be one of ac, ch, pfc") from None
    if "A0" in m:
        m["A0_energy"] = m.pop("A0")
    try:
        spec = ModelSpec.defaults(kind, **m)
    except ModelError as exc:
        raise ConfigError(f"[model] {exc}") from None

    g = {**_GRID_DEFAULTS[kind], **sec.get("grid", {})}
    try:
        grid = Grid2D(g["Nx"], g["Ny"], g["Lx"], g["Ly"])
    except ValueError as exc:
        raise ConfigError(f"[grid] {exc}") from None

    t = {**_TIME_DEFAULTS[kind], **sec.get("time", {})}
    for key in ("dt", "sample_interval"):
        if not t[key] > 0:
            raise ConfigError(f"[time] {key} must be positive")
    if t["T"] < 0:
        raise ConfigError("[time] T must be non-negative")
    for key in ("T", "sample_interval"):
        k = round(t[key] / t["dt"])
        if abs(k * t["dt"] - t[key]) > 1e-9 * max(1.0, t[key]):
            raise ConfigError(f"[time] {key} must be a multiple of dt")
    time = TimeConfig(t["dt"], t["T"], t["sample_interval"])

    r = dict(sec.get("rom", {}))
    if "rank" in r and "threshold" in r:
        raise ConfigError("[rom] set only one of 'rank' and 'threshold'")
    if "threshold" in r:
        r["rank"] = None
    rom = RomConfig(**r)
    if rom.variant.lower() not in ("vanilla", "i", "ii"):
        raise ConfigError("[rom] variant must be vanilla, i or ii")
    if rom.scheme.lower() not in ("cn", "bdf2"):
        raise ConfigError("[rom] scheme must be cn or bdf2")
    if not 0.0 <= rom.eta <= 1.0:
        raise ConfigError(f"[rom] eta must lie in [0, 1], got {rom.eta}")
    if rom.rank is not None and rom.rank < 1:
        raise ConfigError("[rom] rank must be at least 1")
    if rom.rank is not None and rom.rank > grid.n:
        raise ConfigError(f"[rom] rank exceeds grid size {grid.n}")
    if rom.threshold is not None and not rom.threshold > 0:
        raise ConfigError("[rom] threshold must be positive")
    if rom.threshold_mode not in ("relative", "absolute"):
        raise ConfigError("[rom] threshold_mode must be relative or absolute")
    if rom.deim_rank is not None and rom.deim_rank < 1:
        raise ConfigError("[rom] deim_rank must be at least 1")
    if rom.relaxed and rom.variant.lower() == "vanilla":
        raise ConfigError("[rom] relaxed requires variant i or ii")
    rom = RomConfig(**{**rom.__dict__, "variant": rom.variant.lower(), "scheme": rom.scheme.lower()})
    return RunConfig(spec, grid, time, rom, dict(sec.get("paths", {})))


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


# -- atomic writes -----------------------------------------------------------


def atomic_write_bytes(path, data: bytes) -> None:
    """Write to a temporary sibling and rename over ``path``."""
    path = Path(path)
    parent = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(dir=parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.chmod(tmp, 0o666 & ~_UMASK)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _f64(a) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def _colmajor(A) -> bytes:
    return np.asfortranarray(A, dtype="<f8").tobytes(order="F")


def _read_cols(buf, off, n, k):
    nbytes = 8 * n * k
    A = np.frombuffer(buf, dtype="<f8", count=n * k, offset=off).reshape((n, k), order="F")
    return A.astype(float), off + nbytes


# -- snapshots ---------------------------------------------------------------


def snapshot_bytes(S: SnapshotSet) -> bytes:
    if S.grid is None:
        raise FormatError("snapshot set has no grid attached")
    g = S.grid
    for v, name in ((g.Nx, "Nx"), (g.Ny, "Ny"), (S.m, "m")):
        if v > U32_MAX:
            raise FormatError(f"{name}={v} does not fit in u32")
    head = _SNAP_HEADER.pack(SNAP_MAGIC, g.Nx, g.Ny, S.m, g.Lx, g.Ly, float(S.sample_interval))
    return head + _colmajor(S.Phi) + _colmajor(S.Q) + _f64(S.times)


def write_snapshots(path, S: SnapshotSet) -> None:
    atomic_write_bytes(path, snapshot_bytes(S))


def parse_snapshots(buf: bytes) -> SnapshotSet:
    if len(buf) < _SNAP_HEADER.size:
        raise FormatError("truncated snapshot header")
    magic, Nx, Ny, m, Lx, Ly, si = _SNAP_HEADER.unpack_from(buf, 0)
    if magic != SNAP_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {SNAP_MAGIC!r}")
    n = Nx * Ny
    expect = _SNAP_HEADER.size + 8 * (2 * m * n + m)
    if len(buf) != expect:
        raise FormatError(f"snapshot file has {len(buf)} bytes, header implies {expect}")
    try:
        grid = Grid2D(Nx, Ny, Lx, Ly)
    except ValueError as exc:
        raise FormatError(f"invalid grid in header: {exc}") from None
    off = _SNAP_HEADER.size
    Phi, off = _read_cols(buf, off, n, m)
    Q, off = _read_cols(buf, off, n, m)
    times = np.frombuffer(buf, dtype="<f8", count=m, offset=off).astype(float)
    try:
        return SnapshotSet(Phi, Q, times, grid, si)
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def read_snapshots(path) -> SnapshotSet:
    return parse_snapshots(_read(path))


def _read(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from None


# -- basis -------------------------------------------------------------------


def basis_bytes(B: PodBasis) -> bytes:
    n, r = B.n, B.r
    if r > n:
        raise FormatError(f"rank r={r} exceeds n={n}")
    s = len(B.sigma_phi)
    if len(B.sigma_q) != s:
        raise FormatError("sigma_phi and sigma_q lengths differ")
    deim = B.deim
    k = 0 if deim is None else deim.k
    parts = [_BASIS_HEADER.pack(BASIS_MAGIC, n, r, k, s), _colmajor(B.U_phi), _colmajor(B.U_q),
             _f64(B.sigma_phi), _f64(B.sigma_q)]
    if deim is not None:
        if deim.n != n:
            raise FormatError("DEIM operator and basis have different row counts")
        parts += [_colmajor(deim.W), np.asarray(deim.indices, dtype="<u4").tobytes(),
                  _colmajor(deim.M)]
    return b"".join(parts)


def write_basis(path, B: PodBasis) -> None:
    atomic_write_bytes(path, basis_bytes(B))


def parse_basis(buf: bytes, *, ortho_tol: float = ORTHO_TOL) -> PodBasis:
    if len(buf) < _BASIS_HEADER.size:
        raise FormatError("truncated basis header")
    magic, n, r, k, s = _BASIS_HEADER.unpack_from(buf, 0)
    if magic != BASIS_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {BASIS_MAGIC!r}")
    if r < 1 or r > n:
        raise FormatError(f"rank r={r} must satisfy 1 <= r <= n={n}")
    if k > n:
        raise FormatError(f"DEIM rank k={k} exceeds n={n}")
    expect = _BASIS_HEADER.size + 8 * (2 * n * r + 2 * s)
    if k:
        expect += 8 * 2 * n * k + 4 * k
    if len(buf) != expect:
        raise FormatError(f"basis file has {len(buf)} bytes, header implies {expect}")
    off = _BASIS_HEADER.size
    U_phi, off = _read_cols(buf, off, n, r)
    U_q, off = _read_cols(buf, off, n, r)
    sig_phi = np.frombuffer(buf, dtype="<f8", count=s, offset=off).astype(float)
    off += 8 * s
    sig_q = np.frombuffer(buf, dtype="<f8", count=s, offset=off).astype(float)
    off += 8 * s
    deim = None
    if k:
        W, off = _read_cols(buf, off, n, k)
        idx = np.frombuffer(buf, dtype="<u4", count=k, offset=off).astype(np.int64)
        off += 4 * k
        M, off = _read_cols(buf, off, n, k)
        if np.any(idx >= n) or len(set(idx.tolist())) != k:
            raise FormatError("DEIM indices out of range or repeated")
        deim = DeimOperator(W, idx, M, float(np.linalg.cond(W[idx, :])))
    B = PodBasis(U_phi, U_q, sig_phi, sig_q, deim=deim)
    err = B.orthonormality_error()
    if not err <= ortho_tol:
        raise FormatError(f"basis columns are not orthonormal (defect {err:.2e})")
    return B


def read_basis(path) -> PodBasis:
    return parse_basis(_read(path))


# -- CSV ---------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    v = float(v)
    if math.isnan(v):
        return ""
    return repr(v)


def energy_csv_text(log: EnergyLog) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in log.rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_energy_csv(path, log: EnergyLog) -> None:
    atomic_write_bytes(path, energy_csv_text(log).encode())


def read_energy_csv(path) -> EnergyLog:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from None
    if not rows or tuple(rows[0]) != COLUMNS:
        raise FormatError(f"{path}: header must be {','.join(COLUMNS)}")
    log = EnergyLog()
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(COLUMNS):
            raise FormatError(f"{path}:{i}: expected {len(COLUMNS)} fields")
        try:
            vals = [float(x) if x else math.nan for x in row]
        except ValueError:
            raise FormatError(f"{path}:{i}: non-numeric field") from None
        log.append(*vals)
    return log


def write_rows_csv(path, header, rows) -> None:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
    atomic_write_bytes(path, buf.getvalue().encode())
