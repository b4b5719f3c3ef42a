"""Regularized spectral sums of the per-mode vacuum weights.

    <E>_reg  = (hbar / 2)             sum omega psi(kappa, omega)
    <dF>_reg = (hbar alpha / 4 L_z)   sum omega psi(kappa, omega)

Both share one compensated sum S over the table in ascending-omega order, so
<dF>_reg / <E>_reg = alpha / (2 L_z) up to the rounding of two constants.
The tail beyond omega_max is bounded with a Weyl-type mode density
V beta^{3/2} e^{3 alpha / 2} omega^2 / (pi^2 c0^3). This is a heuristic bound,
used only to flag incomplete results.
"""

from __future__ import annotations

import hashlib
import logging
import math
from collections.abc import Iterable
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy import integrate

from gradedcavity.spectrum.table import SpectrumTable
from gradedcavity.types import CavityGeometry, DielectricProfile, Observable, RegulatorKind

logger = logging.getLogger(__name__)

TAIL_RTOL = 1e-8


class RegulatorError(ValueError):
    """Raised for an invalid regulator or an unregulated sum without acknowledgment."""


class TableMismatchError(ValueError):
    """Raised when two spectrum tables cannot be compared term by term."""


@dataclass(frozen=True)
class Regulator:
    """psi(kappa, omega): exp(-kappa omega), exp(-kappa^2 omega^2), or 1."""

    kind: RegulatorKind = RegulatorKind.EXPONENTIAL
    kappa: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.kappa) or self.kappa < 0:
            raise RegulatorError(f"kappa must be finite and >= 0, got {self.kappa!r}")

    @property
    def is_trivial(self) -> bool:
        """True when psi == 1 for every omega."""
        return self.kind is RegulatorKind.NONE or self.kappa == 0.0

    def psi(self, omega: float) -> float:
        if self.is_trivial:
            return 1.0
        if self.kind is RegulatorKind.EXPONENTIAL:
            return math.exp(-self.kappa * omega)
        return math.exp(-((self.kappa * omega) ** 2))

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "kappa": self.kappa}


@dataclass(frozen=True)
class VacuumSumResult:
    observable: Observable
    value: float
    mode_count: int
    tail_bound: float
    regulator: Regulator
    table_hash: str
    complete: bool
    convention_constant: float = 1.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "observable": self.observable.value,
            "value": self.value,
            "kappa": self.regulator.kappa,
            "regulator": self.regulator.kind.value,
            "mode_count": self.mode_count,
            "tail_bound": self.tail_bound if math.isfinite(self.tail_bound) else None,
            "complete": self.complete,
            "convention_constant": self.convention_constant,
            "table_hash": self.table_hash,
        }


def compensated_sum(values: Iterable[float]) -> float:
    """Neumaier's compensated summation in the given order."""
    total = 0.0
    compensation = 0.0
    for value in values:
        t = total + value
        if abs(total) >= abs(value):
            compensation += (total - t) + value
        else:
            compensation += (value - t) + total
        total = t
    return total + compensation


def observable_weight(
    observable: Observable, geometry: CavityGeometry, profile: DielectricProfile,
) -> float:
    """Constant factor in front of omega psi for one mode."""
    if observable is Observable.ENERGY:
        return profile.hbar / 2
    return profile.hbar * profile.alpha / (4 * geometry.L_z)


def weyl_density(omega: float, geometry: CavityGeometry, profile: DielectricProfile) -> float:
    """Heuristic mode density dN/domega of the graded cavity."""
    return (
        geometry.volume * profile.beta**1.5 * math.exp(1.5 * profile.alpha) * omega**2
        / (math.pi**2 * profile.c0**3)
    )


def tail_bound(table: SpectrumTable, regulator: Regulator, observable: Observable) -> float:
    """Weyl estimate of the omitted sum beyond omega_max; inf when unregulated."""
    weight = observable_weight(observable, table.geometry, table.profile)
    if weight == 0.0:
        return 0.0
    if regulator.is_trivial:
        return math.inf

    def integrand(omega: float) -> float:
        density = weyl_density(omega, table.geometry, table.profile)
        return weight * omega * regulator.psi(omega) * density

    value, _ = integrate.quad(integrand, table.omega_max, np.inf, limit=200)
    return float(value)


def _require_regulated(regulator: Regulator, allow_truncated: bool) -> None:
    if regulator.is_trivial and not allow_truncated:
        raise RegulatorError(
            "unregulated sum (kappa = 0 or kind = none) needs allow_truncated=True"
        )


def regularized_sum(
    table: SpectrumTable,
    regulator: Regulator,
    observable: Observable,
    *,
    allow_truncated: bool = False,
    tail_rtol: float = TAIL_RTOL,
    convention_constant: float = 1.0,
) -> VacuumSumResult:
    _require_regulated(regulator, allow_truncated)
    weight = observable_weight(observable, table.geometry, table.profile)
    total = compensated_sum(r.omega * regulator.psi(r.omega) for r in table.records)
    value = weight * total
    bound = tail_bound(table, regulator, observable)
    complete = bound <= tail_rtol * abs(value)
    if not complete:
        logger.warning(
            "%s sum incomplete: tail bound %.3g exceeds %.1g of value %.6g (kappa=%g)",
            observable.value, bound, tail_rtol, value, regulator.kappa,
        )
    return VacuumSumResult(
        observable=observable,
        value=value,
        mode_count=len(table),
        tail_bound=bound,
        regulator=regulator,
        table_hash=table.content_hash(),
        complete=complete,
        convention_constant=convention_constant,
    )


def homogeneous_subtraction(
    inhom: SpectrumTable,
    hom: SpectrumTable,
    regulator: Regulator,
    *,
    observable: Observable = Observable.ENERGY,
    tail_rtol: float = TAIL_RTOL,
) -> VacuumSumResult:
    """Regularized sum of the graded table minus that of the uniform reference, same kappa."""
    if inhom.geometry != hom.geometry:
        raise TableMismatchError(f"geometry differs: {inhom.geometry} vs {hom.geometry}")
    if not math.isclose(inhom.omega_max, hom.omega_max, rel_tol=1e-12):
        raise TableMismatchError(
            f"cutoffs differ: {inhom.omega_max!r} vs {hom.omega_max!r}"
        )
    if regulator.is_trivial:
        raise RegulatorError("homogeneous subtraction needs kappa > 0")
    graded = regularized_sum(inhom, regulator, observable, tail_rtol=tail_rtol)
    reference = regularized_sum(hom, regulator, observable, tail_rtol=tail_rtol)
    bound = graded.tail_bound + reference.tail_bound
    scale = max(abs(graded.value), abs(reference.value))
    digest = hashlib.sha256(f"{graded.table_hash}:{reference.table_hash}".encode()).hexdigest()
    return VacuumSumResult(
        observable=observable,
        value=graded.value - reference.value,
        mode_count=graded.mode_count,
        tail_bound=bound,
        regulator=regulator,
        table_hash=digest,
        complete=bound <= tail_rtol * scale,
    )
