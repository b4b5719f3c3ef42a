"""Closed-form spectrum of the rectangular cavity with a uniform dielectric.

omega = (c0 / sqrt(eps_r)) * sqrt((n_x pi/L_x)^2 + (n_y pi/L_y)^2 + (m pi/L_z)^2)

TE needs (n_x, n_y) != (0, 0) and m >= 1; TM needs n_x, n_y >= 1 and m >= 0.
The root index stored for TE is p = m. For TM it is p = m + 1: the graded
cavity's first TM root continues the m = 0 mode, so both tables count TM
roots from p = 1 in the same order.
"""

from __future__ import annotations

import logging
import math

from gradedcavity import __version__
from gradedcavity.spectrum.table import ModeRecord, SpectrumTable
from gradedcavity.types import CavityGeometry, DielectricProfile, ModeIndex, Polarization

logger = logging.getLogger(__name__)


def homogeneous_limit_eps(profile: DielectricProfile) -> float:
    """Uniform eps_r whose spectrum matches the graded one to second order in alpha."""
    return profile.beta * math.exp(0.5 * profile.alpha)


def homogeneous_frequency(
    geometry: CavityGeometry, eps_r: float, c0: float, n_x: int, n_y: int, m: int,
) -> float:
    k_sq = (
        (n_x * math.pi / geometry.L_x) ** 2
        + (n_y * math.pi / geometry.L_y) ** 2
        + (m * math.pi / geometry.L_z) ** 2
    )
    return c0 / math.sqrt(eps_r) * math.sqrt(k_sq)


def closed_form_records(
    geometry: CavityGeometry,
    eps_r: float,
    c0: float,
    omega_max: float,
    *,
    include_tm_zero: bool = True,
) -> list[ModeRecord]:
    """All closed-form modes with omega <= omega_max, unsorted."""
    k_max = omega_max * math.sqrt(eps_r) / c0
    nx_max = int(k_max * geometry.L_x / math.pi)
    ny_max = int(k_max * geometry.L_y / math.pi)
    m_max = int(k_max * geometry.L_z / math.pi)
    records: list[ModeRecord] = []
    for n_x in range(nx_max + 1):
        k_x = n_x * math.pi / geometry.L_x
        for n_y in range(ny_max + 1):
            k_y = n_y * math.pi / geometry.L_y
            for m in range(m_max + 1):
                omega = homogeneous_frequency(geometry, eps_r, c0, n_x, n_y, m)
                if omega > omega_max or omega == 0.0:
                    continue
                if (n_x or n_y) and m >= 1:
                    records.append(
                        ModeRecord(ModeIndex(Polarization.TE, n_x, n_y, m), omega, k_x, k_y)
                    )
                if n_x and n_y and (m >= 1 or include_tm_zero):
                    records.append(
                        ModeRecord(ModeIndex(Polarization.TM, n_x, n_y, m + 1), omega, k_x, k_y)
                    )
    return records


def homogeneous_spectrum(
    geometry: CavityGeometry,
    eps_r: float,
    omega_max: float,
    *,
    eps0: float = 1.0,
    mu0: float = 1.0,
    hbar: float = 1.0,
    include_tm_zero: bool = True,
) -> SpectrumTable:
    """Reference spectrum of the same box filled with a uniform eps_r."""
    if not math.isfinite(eps_r) or eps_r <= 0:
        raise ValueError(f"eps_r must be positive and finite, got {eps_r!r}")
    if not math.isfinite(omega_max) or omega_max <= 0:
        raise ValueError(f"omega_max must be positive and finite, got {omega_max!r}")
    profile = DielectricProfile(beta=eps_r, alpha=0.0, eps0=eps0, mu0=mu0, hbar=hbar)
    records = closed_form_records(
        geometry, eps_r, profile.c0, omega_max, include_tm_zero=include_tm_zero,
    )
    logger.debug("Homogeneous spectrum eps_r=%g: %d modes below %g", eps_r, len(records), omega_max)
    return SpectrumTable.build(
        geometry,
        profile,
        omega_max,
        records,
        {
            "solver": "homogeneous-closed-form",
            "eps_r": eps_r,
            "include_tm_zero": include_tm_zero,
            "code_version": __version__,
        },
    )
