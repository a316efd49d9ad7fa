import csv
import math
import struct

import numpy as np
import pytest

from eqrom.deim import deim_build
from eqrom.diagnostics import COLUMNS, EnergyLog
from eqrom.errors import ConfigError, FormatError
from eqrom.io import (
    energy_csv_text,
    load_config,
    parse_config,
    read_basis,
    read_energy_csv,
    read_snapshots,
    write_basis,
    write_energy_csv,
    write_snapshots,
)
from eqrom.model import ModelKind
from eqrom.pod import PodBasis, SnapshotSet, compute_basis
from eqrom.spectral import Grid2D


@pytest.fixture
def snaps(rng):
    g = Grid2D(8, 4, 2.0, 1.0)
    return SnapshotSet(rng.standard_normal((g.n, 3)), rng.standard_normal((g.n, 3)),
                       [0.1, 0.2, 0.3], g, 0.1)


class TestConfig:
    def test_ac_defaults(self):
        cfg = parse_config("[model]\nkind = ac\n")
        assert cfg.model.kind is ModelKind.AC
        assert (cfg.model.M, cfg.model.eps, cfg.model.gamma0) == (1.0, 0.02, 1.0)
        assert (cfg.grid.Nx, cfg.grid.Ny, cfg.grid.Lx, cfg.grid.Ly) == (128, 128, 1.0, 1.0)
        assert (cfg.time.dt, cfg.time.T, cfg.time.sample_interval) == (1e-3, 15.0, 0.1)
        assert cfg.rom.rank == 10 and cfg.rom.threshold is None

    def test_ch_and_pfc_defaults(self):
        ch = parse_config("[model]\nkind = ch\n")
        assert (ch.model.M, ch.model.gamma0, ch.time.T) == (0.01, 2.0, 90.0)
        pfc = parse_config("[model]\nkind = pfc\n")
        assert (pfc.model.a0, pfc.model.b0, pfc.grid.Lx, pfc.time.T, pfc.time.dt) == (1.0, 0.325, 100.0, 100.0, 1e-3)

    def test_overrides(self):
        cfg = parse_config("[model]\nkind = ch\nM = 0.1\nA0 = 2\n[grid]\nNx = 16\nNy = 32\n"
                           "[rom]\nvariant = I\nscheme = BDF2\nrelaxed = yes\nthreshold = 1e-3\n"
                           "[paths]\nbasis = b.bin\n")
        assert cfg.model.M == 0.1 and cfg.model.A0_energy == 2.0
        assert cfg.grid.n == 512
        assert cfg.rom.variant == "i" and cfg.rom.scheme == "bdf2" and cfg.rom.relaxed
        assert cfg.rom.rank is None and cfg.rom.threshold == 1e-3
        assert str(cfg.path("basis")) == "b.bin"

    @pytest.mark.parametrize("text,key", [
        ("[model]\nkind = ac\n[rom]\neta = 1.5\n", "eta"),
        ("[model]\nkind = ac\n[rom]\nrank = 3\nthreshold = 0.1\n", "threshold"),
        ("[model]\nkind = ac\ncolour = red\n", "colour"),
        ("[model]\nkind = ac\n[solver]\ntol = 1\n", "solver"),
        ("[grid]\nNx = 8\n", "kind"),
        ("[model]\nkind = heat\n", "kind"),
        ("[model]\nkind = ac\nM = -1\n", "M"),
        ("[model]\nkind = ac\n[grid]\nNx = 7\n", "Nx"),
        ("[model]\nkind = ac\n[time]\ndt = abc\n", "dt"),
        ("[model]\nkind = ac\n[time]\nT = 0.0015\n", "T"),
        ("[model]\nkind = ac\n[rom]\nvariant = iii\n", "variant"),
        ("[model]\nkind = ac\n[rom]\nrelaxed = true\nvariant = vanilla\n", "relaxed"),
        ("[model]\nkind = ac\n[rom]\nrelaxed = maybe\n", "relaxed"),
        ("[model]\nkind = ac\n[rom]\nrank = 2.5\n", "rank"),
        ("no sections at all", "malformed"),
    ])
    def test_errors_name_key(self, text, key):
        with pytest.raises(ConfigError, match=key):
            parse_config(text)

    def test_missing_path(self):
        cfg = parse_config("[model]\nkind = ac\n")
        with pytest.raises(ConfigError, match="snapshots"):
            cfg.path("snapshots")

    def test_shipped_configs_parse(self):
        from pathlib import Path

        root = Path(__file__).resolve().parents[1] / "configs"
        kinds = {p.stem: load_config(p).model.kind.value for p in root.glob("*.ini")}
        assert kinds == {"ac": "ac", "ch": "ch", "pfc": "pfc"}


class TestSnapshotFormat:
    def test_round_trip(self, snaps, tmp_path):
        p = tmp_path / "s.bin"
        write_snapshots(p, snaps)
        S = read_snapshots(p)
        assert np.array_equal(S.Phi, snaps.Phi) and np.array_equal(S.Q, snaps.Q)
        assert np.array_equal(S.times, snaps.times)
        assert S.grid == snaps.grid and S.sample_interval == 0.1

    def test_layout(self, snaps, tmp_path):
        p = tmp_path / "s.bin"
        write_snapshots(p, snaps)
        raw = p.read_bytes()
        n, m = snaps.n, snaps.m
        assert len(raw) == 44 + 8 * (2 * m * n + m)
        magic, Nx, Ny, mm, Lx, Ly, si = struct.unpack_from("<8sIIIddd", raw)
        assert (magic, Nx, Ny, mm, Lx, Ly, si) == (b"PODSNAP1", 8, 4, 3, 2.0, 1.0, 0.1)
        first = struct.unpack_from("<d", raw, 44)[0]
        assert first == snaps.Phi[0, 0]
        second_col = struct.unpack_from("<d", raw, 44 + 8 * n)[0]
        assert second_col == snaps.Phi[0, 1]

    def test_bad_magic(self, snaps, tmp_path):
        p = tmp_path / "s.bin"
        write_snapshots(p, snaps)
        raw = bytearray(p.read_bytes())
        raw[:8] = b"PODSNAP2"
        p.write_bytes(bytes(raw))
        with pytest.raises(FormatError, match="magic"):
            read_snapshots(p)

    @pytest.mark.parametrize("cut", [10, 100, 1])
    def test_truncated(self, snaps, tmp_path, cut):
        p = tmp_path / "s.bin"
        write_snapshots(p, snaps)
        raw = p.read_bytes()
        p.write_bytes(raw[: len(raw) - cut] if cut > 1 else raw + b"\0")
        with pytest.raises(FormatError):
            read_snapshots(p)

    def test_dimension_overflow(self, tmp_path):
        p = tmp_path / "s.bin"
        p.write_bytes(struct.pack("<8sIIIddd", b"PODSNAP1", 2**31, 2**31, 5, 1.0, 1.0, 0.1))
        with pytest.raises(FormatError):
            read_snapshots(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FormatError):
            read_snapshots(tmp_path / "absent.bin")

    def test_atomic_no_temp_left(self, snaps, tmp_path):
        write_snapshots(tmp_path / "s.bin", snaps)
        assert [f.name for f in tmp_path.iterdir()] == ["s.bin"]

    def test_deterministic_bytes(self, snaps, tmp_path):
        write_snapshots(tmp_path / "a.bin", snaps)
        write_snapshots(tmp_path / "b.bin", snaps)
        assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()


class TestBasisFormat:
    def test_round_trip(self, snaps, tmp_path):
        B = compute_basis(snaps, 2)
        write_basis(tmp_path / "b.bin", B)
        R = read_basis(tmp_path / "b.bin")
        for name in ("U_phi", "U_q", "sigma_phi", "sigma_q"):
            assert np.array_equal(getattr(R, name), getattr(B, name))
        assert R.deim is None

    def test_round_trip_with_deim(self, snaps, tmp_path):
        B = compute_basis(snaps, 2)
        B.deim = deim_build(snaps.Phi, 3)
        write_basis(tmp_path / "b.bin", B)
        R = read_basis(tmp_path / "b.bin")
        assert np.array_equal(R.deim.W, B.deim.W)
        assert np.array_equal(R.deim.M, B.deim.M)
        assert R.deim.indices.tolist() == B.deim.indices.tolist()
        raw = (tmp_path / "b.bin").read_bytes()
        n, r, k, s = struct.unpack_from("<IIII", raw, 8)
        assert (n, r, k, s) == (32, 2, 3, 3)
        assert len(raw) == 24 + 8 * (2 * n * r + 2 * s) + 8 * 2 * n * k + 4 * k

    def test_orthonormality_checked(self, snaps, tmp_path):
        B = compute_basis(snaps, 2)
        bad = PodBasis(B.U_phi * 1.001, B.U_q, B.sigma_phi, B.sigma_q)
        write_basis(tmp_path / "b.bin", bad)
        with pytest.raises(FormatError, match="orthonormal"):
            read_basis(tmp_path / "b.bin")

    def test_rank_exceeding_n_rejected(self, tmp_path):
        p = tmp_path / "b.bin"
        p.write_bytes(struct.pack("<8sIIII", b"PODBASE1", 4, 5, 0, 0) + b"\0" * 8 * 40)
        with pytest.raises(FormatError, match="rank"):
            read_basis(p)

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "b.bin"
        p.write_bytes(b"PODSNAP1" + b"\0" * 40)
        with pytest.raises(FormatError):
            read_basis(p)


class TestEnergyCsv:
    def test_round_trip_and_blanks(self, tmp_path):
        log = EnergyLog()
        log.append(0.0, 1.0, mass=0.5)
        log.append(0.1, 0.9, dissipation=1.0, xi0=0.25, mass=0.5, eq_drift=1e-3)
        p = tmp_path / "e.csv"
        write_energy_csv(p, log)
        with open(p, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == list(COLUMNS)
        assert len(rows) == 3
        assert rows[1][2] == "" and rows[1][3] == ""
        back = read_energy_csv(p)
        np.testing.assert_equal(np.asarray(back.rows), np.asarray(log.rows))
        assert math.isnan(back.rows[0][2])

    def test_exact_float_text(self):
        log = EnergyLog()
        log.append(0.1, 1 / 3)
        assert repr(1 / 3) in energy_csv_text(log)

    def test_bad_header(self, tmp_path):
        p = tmp_path / "e.csv"
        p.write_text("a,b\n1,2\n")
        with pytest.raises(FormatError):
            read_energy_csv(p)
