"""Per-step diagnostic log shared by the full-order and reduced integrators."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

COLUMNS = ("t", "energy", "modified_energy", "dissipation", "xi0", "mass", "eq_drift")


@dataclass
class EnergyLog:
    """Rows of ``COLUMNS``; ``nan`` marks a column that does not apply."""

    rows: list[tuple[float, ...]] = field(default_factory=list)
    metadata: dict[str, str] = field(default_factory=dict)

    def append(self, t, energy, modified_energy=np.nan, dissipation=np.nan,
               xi0=np.nan, mass=np.nan, eq_drift=np.nan):
        self.rows.append(
            (float(t), float(energy), float(modified_energy), float(dissipation),
             float(xi0), float(mass), float(eq_drift))
        )

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        i = COLUMNS.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)

    @property
    def t(self):
        return self.column("t")

    @property
    def energy(self):
        return self.column("energy")

    @property
    def mass(self):
        return self.column("mass")
