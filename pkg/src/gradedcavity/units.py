"""SI <-> natural unit conversion.

Internally every run is dimensionless: hbar = c0 = eps0 = mu0 = 1 and the
cavity height L_z is the length unit. An SI run (metres, rad/s) is scaled
into that system before solving and its energies and forces are scaled back.

    length  L_z
    time    L_z / c
    energy  hbar c / L_z
    force   hbar c / L_z^2
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

from scipy import constants

from gradedcavity.types import CavityGeometry, UnitSystem


@dataclass(frozen=True)
class UnitScales:
    """Size of one natural unit expressed in SI."""

    length: float
    time: float
    energy: float
    force: float

    @property
    def frequency(self) -> float:
        return 1.0 / self.time


IDENTITY = UnitScales(length=1.0, time=1.0, energy=1.0, force=1.0)


def natural_scales(l_z_metres: float) -> UnitScales:
    if not math.isfinite(l_z_metres) or l_z_metres <= 0:
        raise ValueError(f"L_z must be positive and finite, got {l_z_metres!r}")
    return UnitScales(
        length=l_z_metres,
        time=l_z_metres / constants.c,
        energy=constants.hbar * constants.c / l_z_metres,
        force=constants.hbar * constants.c / l_z_metres**2,
    )


def scales_for(units: UnitSystem, geometry: CavityGeometry) -> UnitScales:
    """Scales for a run whose inputs are given in `units`."""
    if units is UnitSystem.SI:
        return natural_scales(geometry.L_z)
    return IDENTITY


def unit_tag(units: UnitSystem, scales: UnitScales) -> dict[str, Any]:
    """Header block for output files: tables are always written in natural units."""
    natural = None
    if units is UnitSystem.SI:
        natural = {
            "length_m": scales.length,
            "time_s": scales.time,
            "energy_J": scales.energy,
            "force_N": scales.force,
        }
    return {"run_units": units.value, "table_units": "natural", "natural_unit": natural}


def geometry_to_natural(geometry: CavityGeometry, scales: UnitScales) -> CavityGeometry:
    return CavityGeometry(
        L_x=geometry.L_x / scales.length,
        L_y=geometry.L_y / scales.length,
        L_z=geometry.L_z / scales.length,
    )


def omega_to_natural(omega: float, scales: UnitScales) -> float:
    return omega * scales.time


def omega_to_si(omega: float, scales: UnitScales) -> float:
    return omega / scales.time


def kappa_to_natural(kappa: float, scales: UnitScales) -> float:
    """kappa carries units of time (psi depends on kappa omega)."""
    return kappa / scales.time


def energy_to_si(energy: float, scales: UnitScales) -> float:
    return energy * scales.energy


def force_to_si(force: float, scales: UnitScales) -> float:
    return force * scales.force
