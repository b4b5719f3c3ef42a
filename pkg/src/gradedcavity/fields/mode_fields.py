"""Mode profiles, vector potentials, derived fields and normalization.

Complex mode convention: a stationary mode is A(t) = A+ e^{-i omega t} + c.c.
and everything here is the A+ coefficient, so e = i omega A, d = eps(z) e,
h = b / mu0. With a = alpha / (2 L_z), cx = cos(k_x x), sy = sin(k_y y), ...

TE:  A = (N/eps0) Phi(eta) (-k_y cx sy, k_x sx cy, 0)
     b = (N/eps0) (-a eta Phi' k_x sx cy, -a eta Phi' k_y cx sy, Phi k_perp^2 cx cy)

TM:  A = C ((Phi' + Phi/eta) k_x cx sy, (Phi' + Phi/eta) k_y sx cy, a (nu^2 - 1) Phi/eta sx sy)
     b = C a eta Phi (k_y sx cy, -k_x cx sy, 0),        C = N omega / (eps0 c0)

The TM curl uses the Bessel equation of order nu to collapse d/dz of the
transverse amplitude. Positions take array x, y (broadcast together) and a
scalar z.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any

import numpy as np
import numpy.typing as npt

from gradedcavity.fields.quadrature import (
    FaceGrid,
    integrate_box,
    xy_quadrature_order,
)
from gradedcavity.special.bessel import (
    BesselDomainError,
    BesselOverflowError,
    bessel_j,
    bessel_j_prime,
    bessel_y,
    bessel_y_prime,
    log_scaled,
    log_scaled_prime,
)
from gradedcavity.spectrum.table import ModeRecord, SpectrumTable
from gradedcavity.types import CavityGeometry, DielectricProfile, Polarization, ZetaBranch

logger = logging.getLogger(__name__)

ComplexArray = npt.NDArray[np.complex128]
Coordinate = float | npt.NDArray[np.float64]
Position = tuple[Coordinate, Coordinate, float]

# Grid used to estimate max eps |A| over the box for residual scaling.
_SCALE_SAMPLES = 9

FIELD_CSV_COLUMNS = ("x", "y", "z") + tuple(
    f"{part}_{name}{axis}"
    for name in ("A", "e", "b", "d")
    for axis in "xyz"
    for part in ("re", "im")
)


class UnsolvedModeError(ValueError):
    """Raised when a record lacks the Bessel data or norm a computation needs."""


class NormalizationError(ArithmeticError):
    """Raised when the closed-form norm^2 is not positive and finite."""


class StepSizeError(ValueError):
    """Raised when a finite-difference stencil would leave the box."""


@dataclass(frozen=True)
class ComplexModeField:
    """Field coefficients at one position; each array has shape (3, *broadcast(x, y))."""

    position: Position
    A: ComplexArray
    e: ComplexArray
    b: ComplexArray
    d: ComplexArray
    h: ComplexArray


@dataclass(frozen=True)
class NormalizationResult:
    norm: float
    norm_squared: float
    I_value: float
    Omega: float
    degeneracy: int
    branch: ZetaBranch

    def to_dict(self) -> dict[str, Any]:
        return {
            "norm": self.norm,
            "norm_squared": self.norm_squared,
            "I_value": self.I_value,
            "Omega": self.Omega,
            "degeneracy": self.degeneracy,
            "branch": self.branch.value,
        }


def phi_profile(
    pol: Polarization,
    nu: float,
    zeta: float,
    eta_value: float,
    branch: ZetaBranch = ZetaBranch.STANDARD,
) -> tuple[float, float]:
    """(Phi, dPhi/deta) with Phi = J + zeta Y, or zeta J + Y on the swapped branch.

    The radial shape is the same for both polarizations; only nu and zeta differ.
    """
    if not isinstance(pol, Polarization):
        raise TypeError(f"pol must be a Polarization, got {pol!r}")
    if not eta_value > 0:
        raise BesselDomainError(f"eta must be > 0, got {eta_value!r}")
    try:
        j, y = bessel_j(nu, eta_value), bessel_y(nu, eta_value)
        jp, yp = bessel_j_prime(nu, eta_value), bessel_y_prime(nu, eta_value)
    except BesselOverflowError:
        base, deriv = log_scaled(nu, eta_value), log_scaled_prime(nu, eta_value)
        j, y, jp, yp = base.j, base.y, deriv.j, deriv.y
    if branch is ZetaBranch.STANDARD:
        return j + zeta * y, jp + zeta * yp
    return zeta * j + y, zeta * jp + yp


def _require_profile(mode: ModeRecord) -> tuple[float, float, float]:
    if mode.nu is None or mode.zeta is None or mode.eta0 is None or mode.etaL is None:
        raise UnsolvedModeError(
            f"{mode.index.label()} has no Bessel profile (closed-form record)"
        )
    return mode.nu, mode.zeta, mode.eta0


def _require_norm(mode: ModeRecord) -> float:
    _require_profile(mode)
    if mode.norm is None:
        raise UnsolvedModeError(f"{mode.index.label()} is not normalized")
    return mode.norm


def transverse_degeneracy(mode: ModeRecord) -> int:
    """2 when one TE transverse index is zero (the transverse integral doubles), else 1."""
    if mode.pol is Polarization.TE and (mode.index.n_x == 0 or mode.index.n_y == 0):
        return 2
    return 1


def eta_at(
    mode: ModeRecord, geometry: CavityGeometry, profile: DielectricProfile, z: float,
) -> float:
    _, _, eta0 = _require_profile(mode)
    z = min(max(z, 0.0), geometry.L_z)
    return eta0 * math.exp(0.5 * profile.alpha * (z / geometry.L_z))


def normalization(
    mode: ModeRecord, geometry: CavityGeometry, profile: DielectricProfile,
) -> NormalizationResult:
    """Closed-form norm making the mode energy hbar omega / 2."""
    nu, zeta, omega_arg = _require_profile(mode)
    eta_l = mode.etaL
    assert eta_l is not None
    hbar, eps0, c0 = profile.hbar, profile.eps0, profile.c0
    alpha, beta = profile.alpha, profile.beta
    L_z = geometry.L_z
    area = geometry.L_x * geometry.L_y
    g = transverse_degeneracy(mode)

    if mode.pol is Polarization.TE:
        _, dphi0 = phi_profile(mode.pol, nu, zeta, omega_arg, mode.branch)
        _, dphi_l = phi_profile(mode.pol, nu, zeta, eta_l, mode.branch)
        I_value = math.exp(alpha) * dphi_l**2 - dphi0**2
        norm_sq = (
            16 * hbar * eps0 * L_z**2
            / (alpha**2 * math.sqrt(beta) * c0 * nu**2 * area * I_value * omega_arg)
            / g
        )
    else:
        phi0, _ = phi_profile(mode.pol, nu, zeta, omega_arg, mode.branch)
        phi_l, _ = phi_profile(mode.pol, nu, zeta, eta_l, mode.branch)
        I_value = (1 - nu**2 + eta_l**2) * phi_l**2 - (1 - nu**2 + omega_arg**2) * phi0**2
        norm_sq = (
            64 * hbar * eps0 * math.sqrt(beta) * L_z**4
            / (alpha**4 * c0 * (nu**2 - 1) * area * I_value * omega_arg)
        )

    if not math.isfinite(norm_sq) or norm_sq <= 0:
        raise NormalizationError(
            f"{mode.index.label()}: norm^2 = {norm_sq!r} (I = {I_value!r}); "
            "root or branch identification is inconsistent"
        )
    return NormalizationResult(
        norm=math.sqrt(norm_sq),
        norm_squared=norm_sq,
        I_value=I_value,
        Omega=omega_arg,
        degeneracy=g,
        branch=mode.branch,
    )


def attach_normalizations(
    table: SpectrumTable,
    *,
    convention_constant: float = 1.0,
    threads: int = 1,
) -> SpectrumTable:
    """New table with norm filled for every record that has a Bessel profile.

    A measured convention constant c != 1 rescales each norm by 1 / sqrt(c).
    """
    if not convention_constant > 0:
        raise ValueError(f"convention constant must be > 0, got {convention_constant!r}")
    scale = 1.0 / math.sqrt(convention_constant)

    def solve(record: ModeRecord) -> ModeRecord:
        if not record.has_profile:
            return record
        result = normalization(record, table.geometry, table.profile)
        return record.with_norm(result.norm * scale)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(solve, table.records))
    else:
        records = [solve(r) for r in table.records]
    skipped = sum(1 for r in records if r.norm is None)
    if skipped:
        logger.info("%d closed-form records left without a norm", skipped)
    return table.with_records(records)


def _check_position(geometry: CavityGeometry, r: Position) -> None:
    x, y, z = r
    xs, ys = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    slack_x, slack_y, slack_z = 1e-12 * geometry.L_x, 1e-12 * geometry.L_y, 1e-12 * geometry.L_z
    if (
        np.any(xs < -slack_x) or np.any(xs > geometry.L_x + slack_x)
        or np.any(ys < -slack_y) or np.any(ys > geometry.L_y + slack_y)
        or not -slack_z <= z <= geometry.L_z + slack_z
    ):
        raise ValueError(f"position outside the box {geometry}")


def _trig(mode: ModeRecord, x: Coordinate, y: Coordinate) -> tuple[Any, Any, Any, Any]:
    kx_x = mode.k_x * np.asarray(x, dtype=float)
    ky_y = mode.k_y * np.asarray(y, dtype=float)
    return np.cos(kx_x), np.sin(kx_x), np.cos(ky_y), np.sin(ky_y)


def _profile_terms(
    mode: ModeRecord, geometry: CavityGeometry, profile: DielectricProfile, z: float,
) -> tuple[float, float, float]:
    nu, zeta, _ = _require_profile(mode)
    eta_z = eta_at(mode, geometry, profile, z)
    phi, dphi = phi_profile(mode.pol, nu, zeta, eta_z, mode.branch)
    return phi, dphi, eta_z


def _potential_and_curl(
    mode: ModeRecord, geometry: CavityGeometry, profile: DielectricProfile, r: Position,
) -> tuple[ComplexArray, ComplexArray]:
    norm = _require_norm(mode)
    _check_position(geometry, r)
    x, y, z = r
    cx, sx, cy, sy = _trig(mode, x, y)
    phi, dphi, eta_z = _profile_terms(mode, geometry, profile, z)
    a = profile.alpha / (2 * geometry.L_z)
    k_x, k_y = mode.k_x, mode.k_y
    zero = np.zeros(np.broadcast(cx, cy).shape)

    if mode.pol is Polarization.TE:
        f = norm / profile.eps0 * phi
        f_z = norm / profile.eps0 * dphi * a * eta_z
        A = [-k_y * cx * sy * f, k_x * sx * cy * f, zero]
        b = [
            -f_z * k_x * sx * cy,
            -f_z * k_y * cx * sy,
            f * (k_x**2 + k_y**2) * cx * cy,
        ]
    else:
        nu = mode.nu
        assert nu is not None
        C = norm * mode.omega / (profile.eps0 * profile.c0)
        G = dphi + phi / eta_z
        H = a * (nu**2 - 1) * phi / eta_z
        curl = C * a * eta_z * phi
        A = [C * G * k_x * cx * sy, C * G * k_y * sx * cy, C * H * sx * sy]
        b = [curl * k_y * sx * cy, -curl * k_x * cx * sy, zero]

    shape = zero.shape
    A_arr = np.array([np.broadcast_to(c, shape) for c in A], dtype=np.complex128)
    b_arr = np.array([np.broadcast_to(c, shape) for c in b], dtype=np.complex128)
    return A_arr, b_arr


def eval_potential(
    mode: ModeRecord, geometry: CavityGeometry, profile: DielectricProfile, r: Position,
) -> ComplexArray:
    """(A_x, A_y, A_z) coefficients of dx, dy, dz at r."""
    A, _ = _potential_and_curl(mode, geometry, profile, r)
    return A


def eval_fields(
    mode: ModeRecord, geometry: CavityGeometry, profile: DielectricProfile, r: Position,
) -> ComplexModeField:
    A, b = _potential_and_curl(mode, geometry, profile, r)
    e = 1j * mode.omega * A
    eps = profile.permittivity(min(max(r[2], 0.0), geometry.L_z), geometry.L_z)
    return ComplexModeField(position=r, A=A, e=e, b=b, d=eps * e, h=b / profile.mu0)


def potential_scale(
    mode: ModeRecord, geometry: CavityGeometry, profile: DielectricProfile,
) -> float:
    """max eps |A| over a sampling grid of the box."""
    samples = np.linspace(0.0, 1.0, _SCALE_SAMPLES)
    x, y = np.meshgrid(samples * geometry.L_x, samples * geometry.L_y, indexing="ij")
    peak = 0.0
    for t in samples:
        z = float(t * geometry.L_z)
        A = eval_potential(mode, geometry, profile, (x, y, z))
        eps = profile.permittivity(z, geometry.L_z)
        peak = max(peak, float(np.max(eps * np.sqrt(np.sum(np.abs(A) ** 2, axis=0)))))
    return peak


def _check_stencil(geometry: CavityGeometry, r: tuple[float, float, float], h: float) -> None:
    x, y, z = r
    if not h > 0:
        raise StepSizeError(f"step must be > 0, got {h!r}")
    if min(x, geometry.L_x - x, y, geometry.L_y - y, z, geometry.L_z - z) < h:
        raise StepSizeError(f"step {h!r} reaches past a wall from {r}")


def gauge_divergence(
    mode: ModeRecord,
    geometry: CavityGeometry,
    profile: DielectricProfile,
    r: tuple[float, float, float],
    h: float,
) -> float:
    """Central-difference div(eps A) at r, in units of max(eps |A|) / L_z."""
    _check_stencil(geometry, r, h)
    x, y, z = r

    def eps_a(px: float, py: float, pz: float, component: int) -> complex:
        A = eval_potential(mode, geometry, profile, (px, py, pz))
        return complex(profile.permittivity(pz, geometry.L_z) * A[component])

    div = (
        (eps_a(x + h, y, z, 0) - eps_a(x - h, y, z, 0))
        + (eps_a(x, y + h, z, 1) - eps_a(x, y - h, z, 1))
        + (eps_a(x, y, z + h, 2) - eps_a(x, y, z - h, 2))
    ) / (2 * h)
    return abs(div) / (potential_scale(mode, geometry, profile) / geometry.L_z)


def helmholtz_residual(
    mode: ModeRecord,
    geometry: CavityGeometry,
    profile: DielectricProfile,
    r: tuple[float, float, float],
    h: float,
) -> float:
    """|curl b - mu0 eps omega^2 A| at r, in units of mu0 omega^2 max(eps |A|).

    curl b by central differences of the analytic b.
    """
    _check_stencil(geometry, r, h)
    x, y, z = r

    def b_at(px: float, py: float, pz: float) -> ComplexArray:
        return eval_fields(mode, geometry, profile, (px, py, pz)).b

    db_dx = (b_at(x + h, y, z) - b_at(x - h, y, z)) / (2 * h)
    db_dy = (b_at(x, y + h, z) - b_at(x, y - h, z)) / (2 * h)
    db_dz = (b_at(x, y, z + h) - b_at(x, y, z - h)) / (2 * h)
    curl_b = np.array([
        db_dy[2] - db_dz[1],
        db_dz[0] - db_dx[2],
        db_dx[1] - db_dy[0],
    ])
    A = eval_potential(mode, geometry, profile, (x, y, z))
    source = profile.mu0 * profile.permittivity(z, geometry.L_z) * mode.omega**2 * A
    residual = float(np.sqrt(np.sum(np.abs(curl_b - source) ** 2)))
    scale = profile.mu0 * mode.omega**2 * potential_scale(mode, geometry, profile)
    return residual / scale


def inner_product(
    mode_a: ModeRecord,
    mode_b: ModeRecord,
    geometry: CavityGeometry,
    profile: DielectricProfile,
    *,
    rtol: float = 1e-10,
    atol: float = 0.0,
) -> float:
    """Re of the eps-weighted overlap, integral of eps A_a . conj(A_b) over the box."""
    order = xy_quadrature_order(
        mode_a.index.n_x, mode_a.index.n_y, mode_b.index.n_x, mode_b.index.n_y,
    )

    def density(grid: FaceGrid, z: float) -> float:
        A_a = eval_potential(mode_a, geometry, profile, (grid.x, grid.y, z))
        A_b = eval_potential(mode_b, geometry, profile, (grid.x, grid.y, z))
        overlap = np.real(np.sum(A_a * np.conj(A_b), axis=0))
        return profile.permittivity(z, geometry.L_z) * grid.integrate(overlap)

    value, _ = integrate_box(density, geometry, order, rtol=rtol, atol=atol)
    return value


def field_grid_rows(
    mode: ModeRecord,
    geometry: CavityGeometry,
    profile: DielectricProfile,
    xs: Iterable[float],
    ys: Iterable[float],
    zs: Iterable[float],
) -> list[list[float]]:
    """Rows of x, y, z then Re/Im of A, e, b, d (24 numbers) on a tensor grid."""
    x_vals = np.asarray(list(xs), dtype=float)
    y_vals = np.asarray(list(ys), dtype=float)
    X, Y = np.meshgrid(x_vals, y_vals, indexing="ij")
    rows: list[list[float]] = []
    for z in zs:
        fields = eval_fields(mode, geometry, profile, (X, Y, float(z)))
        stacked = np.concatenate([fields.A, fields.e, fields.b, fields.d])  # (12, nx, ny)
        for i in range(X.shape[0]):
            for j in range(X.shape[1]):
                row = [float(X[i, j]), float(Y[i, j]), float(z)]
                for value in stacked[:, i, j]:
                    row.extend((float(value.real), float(value.imag)))
                rows.append(row)
    return rows
