import warnings

import numpy as np
import pytest

from eqrom.fom import fom_init, run_fom
from eqrom.model import ModelSpec, build_model
from eqrom.pod import compute_basis
from eqrom.rom import RomSystem
from eqrom.spectral import Grid2D
from eqrom.stepper import init_reduced

_CRITERIA: dict[int, tuple[str, str]] = {}


@pytest.fixture(scope="session")
def record_criterion():
    """Record a pass/fail line for the acceptance summary."""

    def record(number: int, ok: bool, detail: str):
        _CRITERIA[number] = ("PASS" if ok else "FAIL", detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        status, detail = _CRITERIA[k]
        terminalreporter.write_line(f"criterion {k:2d}: {status}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


GRIDS = {
    "ac": (Grid2D(32, 32), 1e-3, 0.01),
    "ch": (Grid2D(32, 32), 1e-3, 0.01),
    "pfc": (Grid2D(32, 32, 100.0, 100.0), 1e-2, 0.05),
}


class SmallCase:
    """A model, its short FOM snapshot run and a rank-r reduced system."""

    def __init__(self, kind, r=6, T=0.5):
        grid, dt, si = GRIDS[kind]
        self.kind, self.grid, self.dt = kind, grid, dt
        self.spec = ModelSpec.defaults(kind)
        self.model = build_model(self.spec, grid)
        self.snaps, self.log = run_fom(self.spec, grid, dt, T, si)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            self.basis = compute_basis(self.snaps, r)
        self.sys = RomSystem(self.basis, self.model)
        self.state0 = fom_init(self.spec, grid, self.model)
        self.a0 = init_reduced(self.sys, self.state0.phi).a


_CASES = {}


@pytest.fixture(scope="session")
def small_case():
    def get(kind, r=6):
        key = (kind, r)
        if key not in _CASES:
            _CASES[key] = SmallCase(kind, r)
        return _CASES[key]

    return get
