"""Per-mode vacuum expectation values: energy, end-face forces, their difference.

For one mode the vacuum expectation of a product of two field operators is
Re(X+ conj(Y+)) of their complex coefficients (``vacuum_bilinear``).

Face force convention: with K = d/dz the zz stress integrated over the plane
z = z0 is

    F(z0) = 1/2 int [ <d_z e_z> + <b_z h_z> - <d_x e_x> - <d_y e_y> - <b_x h_x> - <b_y h_y> ] dx dy

On the end walls the tangential e and the normal b vanish. A TE mode has no
e_z there, so its F is negative (the field pulls on the wall). A TM mode keeps
the d_z e_z term and its F carries the sign of nu^2 - 1 - eta^2 at the wall:
it pushes where eta^2 < nu^2 - 1. Either way F(0) - F(L_z) =
hbar alpha omega / (4 L_z) for a normalized mode.
"""

from __future__ import annotations

import logging
import math
import statistics
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

import numpy as np
import numpy.typing as npt

from gradedcavity.fields.mode_fields import (
    eval_fields,
    phi_profile,
    transverse_degeneracy,
)
from gradedcavity.fields.quadrature import (
    XY_EXTRA_ORDER,
    Z_RTOL,
    FaceGrid,
    face_grid,
    integrate_box,
    xy_quadrature_order,
)
from gradedcavity.spectrum.table import ModeRecord
from gradedcavity.types import CavityGeometry, DielectricProfile, Polarization

if TYPE_CHECKING:
    from gradedcavity.metrics import MetricsRegistry

logger = logging.getLogger(__name__)

ArrayLike = complex | npt.NDArray[np.complex128]


def vacuum_bilinear(x_plus: ArrayLike, y_plus: ArrayLike) -> Any:
    """Re(X+ conj(Y+)); elementwise for arrays."""
    return np.real(x_plus * np.conj(y_plus))


@dataclass(frozen=True)
class EnergyComponents:
    electric: float
    magnetic: float
    error: float

    @property
    def total(self) -> float:
        return self.electric + self.magnetic

    @property
    def equipartition_deviation(self) -> float:
        return abs(self.electric - self.magnetic) / abs(self.total)


def _order(mode: ModeRecord, extra_order: int) -> int:
    return xy_quadrature_order(mode.index.n_x, mode.index.n_y, extra=extra_order)


def energy_components(
    mode: ModeRecord,
    geometry: CavityGeometry,
    profile: DielectricProfile,
    *,
    rtol: float = Z_RTOL,
    extra_order: int = XY_EXTRA_ORDER,
    metrics: MetricsRegistry | None = None,
) -> EnergyComponents:
    """Electric 1/2 <e.d> and magnetic 1/2 <b.h> energies integrated over the box."""

    def electric(grid: FaceGrid, z: float) -> float:
        f = eval_fields(mode, geometry, profile, (grid.x, grid.y, z))
        return 0.5 * grid.integrate(np.sum(vacuum_bilinear(f.e, f.d), axis=0))

    def magnetic(grid: FaceGrid, z: float) -> float:
        f = eval_fields(mode, geometry, profile, (grid.x, grid.y, z))
        return 0.5 * grid.integrate(np.sum(vacuum_bilinear(f.b, f.h), axis=0))

    order = _order(mode, extra_order)
    e_value, e_err = integrate_box(electric, geometry, order, rtol=rtol)
    m_value, m_err = integrate_box(magnetic, geometry, order, rtol=rtol)
    if metrics is not None:
        metrics.counter_inc("quadrature_calls", 2)
    return EnergyComponents(electric=e_value, magnetic=m_value, error=e_err + m_err)


def mode_energy(
    mode: ModeRecord,
    geometry: CavityGeometry,
    profile: DielectricProfile,
    *,
    rtol: float = Z_RTOL,
    extra_order: int = XY_EXTRA_ORDER,
) -> float:
    return energy_components(mode, geometry, profile, rtol=rtol, extra_order=extra_order).total


def face_force(
    mode: ModeRecord,
    geometry: CavityGeometry,
    profile: DielectricProfile,
    z0: float,
    *,
    extra_order: int = XY_EXTRA_ORDER,
) -> float:
    """zz stress integrated over the plane z = z0 (end walls: z0 = 0 or L_z)."""
    if not 0.0 <= z0 <= geometry.L_z:
        raise ValueError(f"z0={z0!r} outside [0, L_z={geometry.L_z}]")
    grid = face_grid(geometry, _order(mode, extra_order))
    f = eval_fields(mode, geometry, profile, (grid.x, grid.y, z0))
    density = (
        vacuum_bilinear(f.d[2], f.e[2])
        + vacuum_bilinear(f.b[2], f.h[2])
        - vacuum_bilinear(f.d[0], f.e[0])
        - vacuum_bilinear(f.d[1], f.e[1])
        - vacuum_bilinear(f.b[0], f.h[0])
        - vacuum_bilinear(f.b[1], f.h[1])
    )
    return 0.5 * grid.integrate(density)


def face_force_closed_form(
    mode: ModeRecord,
    geometry: CavityGeometry,
    profile: DielectricProfile,
    z0: float,
) -> float:
    """Analytic end-wall force; z0 must be 0 or L_z."""
    if z0 not in (0.0, geometry.L_z):
        raise ValueError(f"closed form holds on the end walls only, got z0={z0!r}")
    if mode.norm is None or mode.nu is None or mode.zeta is None:
        raise ValueError(f"{mode.index.label()} is not solved and normalized")
    eta_z = mode.eta0 if z0 == 0.0 else mode.etaL
    assert eta_z is not None
    a = profile.alpha / (2 * geometry.L_z)
    area = geometry.L_x * geometry.L_y
    phi, dphi = phi_profile(mode.pol, mode.nu, mode.zeta, eta_z, mode.branch)
    if mode.pol is Polarization.TE:
        k_perp_sq = mode.k_x**2 + mode.k_y**2
        g = transverse_degeneracy(mode)
        amplitude = mode.norm * a * eta_z * dphi / profile.eps0
        return -g * area / (8 * profile.mu0) * k_perp_sq * amplitude**2
    nu = mode.nu
    return (
        -area / 8 * mode.norm**2 * mode.omega**2 * a**4 * (nu**2 - 1) * phi**2
        * (1 - nu**2 + eta_z**2) / profile.eps0
    )


def force_difference_mode(
    mode: ModeRecord,
    geometry: CavityGeometry,
    profile: DielectricProfile,
    *,
    extra_order: int = XY_EXTRA_ORDER,
) -> float:
    """F(0) - F(L_z); equals hbar alpha omega / (4 L_z) times the convention constant."""
    return (
        face_force(mode, geometry, profile, 0.0, extra_order=extra_order)
        - face_force(mode, geometry, profile, geometry.L_z, extra_order=extra_order)
    )


def expected_force_difference(
    mode: ModeRecord, geometry: CavityGeometry, profile: DielectricProfile,
) -> float:
    return profile.hbar * profile.alpha * mode.omega / (4 * geometry.L_z)


@dataclass(frozen=True)
class ModeCheck:
    """Quadrature results for one mode, before the convention constant is known."""

    mode: ModeRecord
    energy: EnergyComponents
    energy_ratio: float
    force_difference: float
    force_ratio_raw: float

    def force_ratio(self, convention_constant: float) -> float:
        return self.force_ratio_raw / convention_constant

    def to_dict(self, convention_constant: float) -> dict[str, Any]:
        return {
            "mode": self.mode.index.label(),
            "omega": self.mode.omega,
            "energy": self.energy.total,
            "electric": self.energy.electric,
            "magnetic": self.energy.magnetic,
            "energy_ratio": self.energy_ratio,
            "equipartition_deviation": self.energy.equipartition_deviation,
            "force_difference": self.force_difference,
            "force_ratio": self.force_ratio(convention_constant),
            "quadrature_error": self.energy.error,
        }


def check_mode(
    mode: ModeRecord,
    geometry: CavityGeometry,
    profile: DielectricProfile,
    *,
    rtol: float = Z_RTOL,
    extra_order: int = XY_EXTRA_ORDER,
    metrics: MetricsRegistry | None = None,
) -> ModeCheck:
    """Energy and force-difference quadratures for one normalized mode."""
    if metrics is not None:
        with metrics.timed("mode_quadrature_seconds"):
            energy = energy_components(
                mode, geometry, profile, rtol=rtol, extra_order=extra_order, metrics=metrics,
            )
    else:
        energy = energy_components(mode, geometry, profile, rtol=rtol, extra_order=extra_order)
    delta = force_difference_mode(mode, geometry, profile, extra_order=extra_order)
    return ModeCheck(
        mode=mode,
        energy=energy,
        energy_ratio=energy.total / (0.5 * profile.hbar * mode.omega),
        force_difference=delta,
        force_ratio_raw=delta / expected_force_difference(mode, geometry, profile),
    )


@dataclass(frozen=True)
class ConventionMeasurement:
    """Mean of energy / (hbar omega / 2) over a mode set and its relative spread."""

    constant: float
    max_relative_spread: float
    count: int


def measure_convention_constant(checks: Sequence[ModeCheck]) -> ConventionMeasurement:
    if not checks:
        raise ValueError("no modes to measure the convention constant on")
    ratios = [c.energy_ratio for c in checks]
    mean = math.fsum(ratios) / len(ratios)
    spread = max(abs(r - mean) for r in ratios) / abs(mean)
    if len(ratios) > 1:
        logger.debug("convention constant %.15g, stdev %.3g", mean, statistics.pstdev(ratios))
    return ConventionMeasurement(constant=mean, max_relative_spread=spread, count=len(ratios))


def check_modes(
    modes: Sequence[ModeRecord],
    geometry: CavityGeometry,
    profile: DielectricProfile,
    *,
    rtol: float = Z_RTOL,
    extra_order: int = XY_EXTRA_ORDER,
    threads: int = 1,
    metrics: MetricsRegistry | None = None,
) -> list[ModeCheck]:
    """check_mode over a mode list; output order follows the input."""

    def run(mode: ModeRecord) -> ModeCheck:
        return check_mode(
            mode, geometry, profile, rtol=rtol, extra_order=extra_order, metrics=metrics,
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, modes))
    return [run(m) for m in modes]
