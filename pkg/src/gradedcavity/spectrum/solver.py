"""Eigenfrequencies of the conducting box with eps(z) = eps0 beta exp(alpha z / L_z).

Along z every mode is a cylinder function of

    eta(z) = 2 L_z omega sqrt(beta) exp(alpha z / 2 L_z) / (alpha c0)

of order nu_TE = (2 L_z / alpha) k_perp or nu_TM = sqrt(nu_TE^2 + 1). The
eigenfrequencies are the positive roots of the Bessel cross product between
the end-wall arguments eta(0) and eta(L_z): plain J, Y for TE and the tilde
pair x f' + f for TM.

Root search: no root lies below omega_start = k_perp c0 exp(-alpha/2) / sqrt(beta),
since both polarizations need eps mu omega^2 > k_perp^2 somewhere in the box.
Above it the scan grid is uniform in the WKB phase Theta(omega), which counts
axial half-waves, so roots are evenly covered both near cutoff and far above
it. Sign changes of the normalized cross product become brackets for Brent's
method. The scan is repeated at half the step until two grids agree on the
root count.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterator
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import TYPE_CHECKING, Any

from scipy import optimize

from gradedcavity import __version__
from gradedcavity.special.bessel import (
    cross_product,
    cross_product_tilde,
    log_scaled,
    log_scaled_tilde,
    normalized_cross_product,
)
from gradedcavity.spectrum.homogeneous import closed_form_records, homogeneous_limit_eps
from gradedcavity.spectrum.table import ModeRecord, SpectrumTable
from gradedcavity.types import (
    CavityGeometry,
    DielectricProfile,
    ModeIndex,
    Polarization,
    ZetaBranch,
    check_transverse_index,
)

if TYPE_CHECKING:
    from gradedcavity.metrics import MetricsRegistry

logger = logging.getLogger(__name__)

SCAN_FRACTION = 0.125
MAX_HALVINGS = 4
ROOT_RTOL = 1e-14
# Scan never starts below this multiple of c0 / L_z (Y_nu diverges at eta -> 0).
OMEGA_FLOOR = 1e-9
SMALL_ALPHA_THRESHOLD = 1e-4
# |denominator| / modulus below this switches zeta to the swapped branch.
ZETA_DEGENERACY = 1e-8


class RootScanError(RuntimeError):
    """Raised when the root scan cannot certify a complete set of roots."""

    def __init__(self, message: str, pol: Polarization, n_x: int, n_y: int) -> None:
        super().__init__(f"{pol.value}({n_x},{n_y}): {message}")
        self.pol = pol
        self.n_x = n_x
        self.n_y = n_y


class ZetaDegeneracyError(ArithmeticError):
    """Raised when the matching-coefficient denominator vanishes at eta(0)."""


@dataclass(frozen=True)
class SolverSettings:
    scan_fraction: float = SCAN_FRACTION
    max_halvings: int = MAX_HALVINGS
    root_rtol: float = ROOT_RTOL
    small_alpha_threshold: float = SMALL_ALPHA_THRESHOLD
    include_tm_zero: bool = True
    threads: int = 1

    def provenance(self) -> dict[str, Any]:
        """Settings that affect the table; thread count does not."""
        data = asdict(self)
        del data["threads"]
        return data


def _require_graded(profile: DielectricProfile) -> None:
    if profile.alpha <= 0:
        raise ValueError("graded-profile spectrum needs alpha > 0")


def _require_omega(omega: float) -> None:
    if not math.isfinite(omega) or omega <= 0:
        raise ValueError(f"omega must be positive and finite, got {omega!r}")


def eta(profile: DielectricProfile, geometry: CavityGeometry, omega: float, z: float) -> float:
    _require_graded(profile)
    _require_omega(omega)
    if not 0.0 <= z <= geometry.L_z:
        raise ValueError(f"z={z!r} outside [0, L_z={geometry.L_z}]")
    prefactor = 2 * geometry.L_z * omega * math.sqrt(profile.beta) / (profile.alpha * profile.c0)
    return prefactor * math.exp(0.5 * profile.alpha * (z / geometry.L_z))


def end_wall_etas(
    profile: DielectricProfile, geometry: CavityGeometry, omega: float,
) -> tuple[float, float]:
    """(eta(0), eta(L_z)) with eta(L_z) = eta(0) exp(alpha/2) exactly."""
    eta0 = eta(profile, geometry, omega, 0.0)
    return eta0, eta0 * math.exp(0.5 * profile.alpha)


def transverse_wavenumbers(geometry: CavityGeometry, n_x: int, n_y: int) -> tuple[float, float]:
    return n_x * math.pi / geometry.L_x, n_y * math.pi / geometry.L_y


def transverse_order(geometry: CavityGeometry, profile: DielectricProfile, k_perp: float) -> float:
    """nu_TE = (2 L_z / alpha) k_perp."""
    return 2 * geometry.L_z * k_perp / profile.alpha


def mode_parameters(
    geometry: CavityGeometry,
    profile: DielectricProfile,
    pol: Polarization,
    n_x: int,
    n_y: int,
) -> tuple[float, float, float]:
    """Return (k_x, k_y, nu) for a transverse index pair."""
    check_transverse_index(pol, n_x, n_y)
    _require_graded(profile)
    k_x, k_y = transverse_wavenumbers(geometry, n_x, n_y)
    nu_te = transverse_order(geometry, profile, math.hypot(k_x, k_y))
    if pol is Polarization.TE:
        return k_x, k_y, nu_te
    return k_x, k_y, math.sqrt(nu_te * nu_te + 1.0)


def spectrum_fn(
    pol: Polarization,
    nu: float,
    profile: DielectricProfile,
    geometry: CavityGeometry,
    omega: float,
) -> float:
    """Raw cross product whose positive roots are the eigenfrequencies."""
    eta0, eta_l = end_wall_etas(profile, geometry, omega)
    if pol is Polarization.TE:
        return cross_product(nu, eta0, eta_l)
    return cross_product_tilde(nu, eta0, eta_l)


def normalized_spectrum_fn(
    pol: Polarization,
    nu: float,
    profile: DielectricProfile,
    geometry: CavityGeometry,
    omega: float,
) -> float:
    """Cross product divided by the end-wall moduli: same roots and signs, bounded by 1."""
    eta0, eta_l = end_wall_etas(profile, geometry, omega)
    return normalized_cross_product(nu, eta0, eta_l, tilde=pol is Polarization.TM)


def scan_start(geometry: CavityGeometry, profile: DielectricProfile, k_perp: float) -> float:
    """Lowest frequency at which a root can exist for this k_perp."""
    cutoff = k_perp * profile.c0 * math.exp(-0.5 * profile.alpha) / math.sqrt(profile.beta)
    return max(OMEGA_FLOOR * profile.c0 / geometry.L_z, cutoff)


def wkb_phase(nu_perp: float, eta0: float, eta_l: float) -> float:
    """Axial half-wave count between the walls in the WKB approximation."""

    def antiderivative(value: float) -> float:
        s = math.sqrt(max(value * value - nu_perp * nu_perp, 0.0))
        return s - nu_perp * math.atan2(s, nu_perp)

    return (antiderivative(eta_l) - antiderivative(eta0)) / math.pi


def scan_grid(
    geometry: CavityGeometry,
    profile: DielectricProfile,
    k_perp: float,
    omega_lo: float,
    omega_hi: float,
    step: float,
) -> list[float]:
    """Frequencies from omega_lo to omega_hi spaced `step` apart in WKB phase."""
    nu_perp = transverse_order(geometry, profile, k_perp)
    growth = math.exp(0.5 * profile.alpha)

    def offset(omega: float, target: float) -> float:
        eta0 = eta(profile, geometry, omega, 0.0)
        return wkb_phase(nu_perp, eta0, eta0 * growth) - target

    start = offset(omega_lo, 0.0)
    end = offset(omega_hi, 0.0)
    nodes = [omega_lo]
    k = 1
    while start + k * step < end:
        target = start + k * step
        nodes.append(
            float(optimize.brentq(offset, nodes[-1], omega_hi, args=(target,), rtol=1e-12))
        )
        k += 1
    nodes.append(omega_hi)
    return nodes


def _brackets(g: Callable[[float], float], nodes: list[float]) -> list[tuple[float, float]]:
    found: list[tuple[float, float]] = []
    prev_w, prev_g = nodes[0], g(nodes[0])
    for w in nodes[1:]:
        value = g(w)
        if value == 0.0:
            found.append((w, w))
        elif prev_g * value < 0.0:
            found.append((prev_w, w))
        prev_w, prev_g = w, value
    return found


def find_roots(
    pol: Polarization,
    geometry: CavityGeometry,
    profile: DielectricProfile,
    n_x: int,
    n_y: int,
    omega_max: float,
    *,
    scan_fraction: float = SCAN_FRACTION,
    max_halvings: int = MAX_HALVINGS,
    root_rtol: float = ROOT_RTOL,
    metrics: MetricsRegistry | None = None,
) -> list[float]:
    """All roots in (0, omega_max] for one transverse pair, ascending."""
    _require_omega(omega_max)
    if max_halvings < 1:
        raise ValueError(f"max_halvings must be >= 1, got {max_halvings}")
    k_x, k_y, nu = mode_parameters(geometry, profile, pol, n_x, n_y)
    k_perp = math.hypot(k_x, k_y)
    omega_lo = scan_start(geometry, profile, k_perp)
    if omega_lo >= omega_max:
        return []

    def g(omega: float) -> float:
        return normalized_spectrum_fn(pol, nu, profile, geometry, omega)

    step = scan_fraction
    brackets = _brackets(g, scan_grid(geometry, profile, k_perp, omega_lo, omega_max, step))
    for _ in range(max_halvings):
        step /= 2
        finer = _brackets(g, scan_grid(geometry, profile, k_perp, omega_lo, omega_max, step))
        if len(finer) == len(brackets):
            break
        logger.warning(
            "%s(%d,%d): %d roots at step %g but %d at %g, refining",
            pol.value, n_x, n_y, len(brackets), 2 * step, len(finer), step,
        )
        if metrics is not None:
            metrics.counter_inc("scan_halvings")
        brackets = finer
    else:
        raise RootScanError(
            f"root count not stable after {max_halvings} step halvings", pol, n_x, n_y,
        )

    roots = [
        lo if lo == hi else float(optimize.brentq(g, lo, hi, xtol=1e-300, rtol=root_rtol))
        for lo, hi in brackets
    ]
    logger.debug(
        "%s(%d,%d): nu=%.6g, %d roots below %g", pol.value, n_x, n_y, nu, len(roots), omega_max,
    )
    if metrics is not None:
        metrics.counter_inc("roots_found", len(roots))
    return roots


def zeta_coefficient(
    pol: Polarization,
    nu: float,
    profile: DielectricProfile,
    geometry: CavityGeometry,
    omega: float,
) -> float:
    """zeta with Phi = J + zeta Y vanishing (TE) or with vanishing tilde (TM) at eta(0)."""
    eta0 = eta(profile, geometry, omega, 0.0)
    pair = log_scaled(nu, eta0) if pol is Polarization.TE else log_scaled_tilde(nu, eta0)
    j_unit, y_unit = pair.unit()
    if abs(y_unit) < ZETA_DEGENERACY:
        raise ZetaDegeneracyError(
            f"{pol.value} zeta denominator vanishes at eta(0)={eta0!r} (nu={nu!r})"
        )
    return -j_unit / y_unit


def matching_coefficient(
    pol: Polarization,
    nu: float,
    profile: DielectricProfile,
    geometry: CavityGeometry,
    omega: float,
) -> tuple[float, ZetaBranch]:
    """zeta and the branch it belongs to; falls back to Phi = zeta J + Y when degenerate."""
    try:
        return zeta_coefficient(pol, nu, profile, geometry, omega), ZetaBranch.STANDARD
    except ZetaDegeneracyError:
        eta0 = eta(profile, geometry, omega, 0.0)
        pair = log_scaled(nu, eta0) if pol is Polarization.TE else log_scaled_tilde(nu, eta0)
        j_unit, y_unit = pair.unit()
        logger.warning(
            "%s: degenerate zeta at omega=%g, nu=%g; using swapped branch", pol.value, omega, nu,
        )
        return -y_unit / j_unit, ZetaBranch.SWAPPED


def _transverse_pairs(
    geometry: CavityGeometry, profile: DielectricProfile, omega_max: float,
) -> Iterator[tuple[Polarization, int, int]]:
    """Every (pol, n_x, n_y) whose scan start lies below omega_max."""
    k_cap = omega_max * math.sqrt(profile.beta) * math.exp(0.5 * profile.alpha) / profile.c0
    nx_max = int(k_cap * geometry.L_x / math.pi)
    ny_max = int(k_cap * geometry.L_y / math.pi)
    for pol in (Polarization.TE, Polarization.TM):
        start = 1 if pol is Polarization.TM else 0
        for n_x in range(start, nx_max + 1):
            for n_y in range(start, ny_max + 1):
                if n_x == 0 and n_y == 0:
                    continue
                k_x, k_y = transverse_wavenumbers(geometry, n_x, n_y)
                if math.hypot(k_x, k_y) < k_cap:
                    yield pol, n_x, n_y


def _solve_pair(
    pol: Polarization,
    n_x: int,
    n_y: int,
    geometry: CavityGeometry,
    profile: DielectricProfile,
    omega_max: float,
    settings: SolverSettings,
    metrics: MetricsRegistry | None,
) -> list[ModeRecord]:
    k_x, k_y, nu = mode_parameters(geometry, profile, pol, n_x, n_y)
    try:
        roots = find_roots(
            pol, geometry, profile, n_x, n_y, omega_max,
            scan_fraction=settings.scan_fraction,
            max_halvings=settings.max_halvings,
            root_rtol=settings.root_rtol,
            metrics=metrics,
        )
        records = []
        for p, omega in enumerate(roots, start=1):
            zeta, branch = matching_coefficient(pol, nu, profile, geometry, omega)
            eta0, eta_l = end_wall_etas(profile, geometry, omega)
            records.append(ModeRecord(
                index=ModeIndex(pol, n_x, n_y, p),
                omega=omega,
                k_x=k_x,
                k_y=k_y,
                nu=nu,
                zeta=zeta,
                eta0=eta0,
                etaL=eta_l,
                branch=branch,
            ))
    except (ArithmeticError, ValueError) as exc:
        raise RootScanError(str(exc), pol, n_x, n_y) from exc
    return records


def enumerate_modes(
    geometry: CavityGeometry,
    profile: DielectricProfile,
    omega_max: float,
    *,
    settings: SolverSettings | None = None,
    metrics: MetricsRegistry | None = None,
) -> SpectrumTable:
    """Every mode with omega <= omega_max, sorted; norms are left unset."""
    settings = settings or SolverSettings()
    _require_omega(omega_max)
    provenance: dict[str, Any] = {**settings.provenance(), "code_version": __version__}

    if profile.alpha < settings.small_alpha_threshold:
        eps_r = homogeneous_limit_eps(profile)
        logger.warning(
            "alpha=%g below %g: using the homogeneous closed form with eps_r=%g",
            profile.alpha, settings.small_alpha_threshold, eps_r,
        )
        records = closed_form_records(
            geometry, eps_r, profile.c0, omega_max,
            include_tm_zero=settings.include_tm_zero,
        )
        provenance["solver"] = "homogeneous-closed-form"
        provenance["eps_r"] = eps_r
        return SpectrumTable.build(geometry, profile, omega_max, records, provenance)

    pairs = list(_transverse_pairs(geometry, profile, omega_max))

    def solve(pair: tuple[Polarization, int, int]) -> list[ModeRecord]:
        return _solve_pair(*pair, geometry, profile, omega_max, settings, metrics)

    if settings.threads > 1:
        with ThreadPoolExecutor(max_workers=settings.threads) as pool:
            groups = list(pool.map(solve, pairs))
    else:
        groups = [solve(pair) for pair in pairs]

    provenance["solver"] = "bessel-cross-product"
    table = SpectrumTable.build(
        geometry, profile, omega_max, (r for group in groups for r in group), provenance,
    )
    logger.info(
        "Spectrum alpha=%g beta=%g: %d modes from %d transverse pairs below omega_max=%g",
        profile.alpha, profile.beta, len(table), len(pairs), omega_max,
    )
    return table
