"""Shared types, enums, and dataclasses used across modules."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


class Polarization(Enum):
    TE = "TE"
    TM = "TM"


class ZetaBranch(Enum):
    """Which Bessel function carries the matching coefficient."""

    STANDARD = "standard"  # Phi = J + zeta * Y
    SWAPPED = "swapped"  # Phi = zeta * J + Y


class RegulatorKind(Enum):
    EXPONENTIAL = "exponential"
    GAUSSIAN = "gaussian"
    NONE = "none"


class Observable(Enum):
    ENERGY = "energy"
    FORCE_DIFFERENCE = "force_difference"


class UnitSystem(Enum):
    NATURAL = "natural"
    SI = "SI"


class ModeIndexError(ValueError):
    """Raised for an index combination that does not describe a cavity mode."""


def _positive_finite(name: str, value: float) -> None:
    if not math.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class CavityGeometry:
    """Edge lengths of the conducting box; z is the grading axis."""

    L_x: float
    L_y: float
    L_z: float

    def __post_init__(self) -> None:
        _positive_finite("L_x", self.L_x)
        _positive_finite("L_y", self.L_y)
        _positive_finite("L_z", self.L_z)

    @property
    def volume(self) -> float:
        return self.L_x * self.L_y * self.L_z

    def contains(self, x: float, y: float, z: float, *, slack: float = 1e-12) -> bool:
        """True if the point lies in the closed box (walls included)."""
        return (
            -slack * self.L_x <= x <= self.L_x * (1 + slack)
            and -slack * self.L_y <= y <= self.L_y * (1 + slack)
            and -slack * self.L_z <= z <= self.L_z * (1 + slack)
        )


@dataclass(frozen=True)
class DielectricProfile:
    """Permittivity eps(z) = eps0 * beta * exp(alpha * z / L_z) plus vacuum constants.

    alpha == 0 describes the homogeneous reference medium with eps_r = beta.
    """

    beta: float
    alpha: float
    eps0: float = 1.0
    mu0: float = 1.0
    hbar: float = 1.0

    def __post_init__(self) -> None:
        _positive_finite("beta", self.beta)
        if not math.isfinite(self.alpha) or self.alpha < 0:
            raise ValueError(f"alpha must be non-negative and finite, got {self.alpha!r}")
        _positive_finite("eps0", self.eps0)
        _positive_finite("mu0", self.mu0)
        _positive_finite("hbar", self.hbar)

    @property
    def c0(self) -> float:
        return 1.0 / math.sqrt(self.eps0 * self.mu0)

    @property
    def is_homogeneous(self) -> bool:
        return self.alpha == 0.0

    def permittivity(self, z: float, L_z: float) -> float:
        return self.eps0 * self.beta * math.exp(self.alpha * (z / L_z))


@dataclass(frozen=True)
class ModeIndex:
    """Polarization, transverse integers and root index p >= 1."""

    pol: Polarization
    n_x: int
    n_y: int
    p: int

    def __post_init__(self) -> None:
        check_transverse_index(self.pol, self.n_x, self.n_y)
        if self.p < 1:
            raise ModeIndexError(f"root index p must be >= 1, got {self.p}")

    def label(self) -> str:
        return f"{self.pol.value}({self.n_x},{self.n_y},{self.p})"

    def sort_key(self) -> tuple[int, int, int, int]:
        return (0 if self.pol is Polarization.TE else 1, self.n_x, self.n_y, self.p)


def check_transverse_index(pol: Polarization, n_x: int, n_y: int) -> None:
    """Reject transverse pairs whose field vanishes identically."""
    if n_x < 0 or n_y < 0:
        raise ModeIndexError(f"{pol.value}: n_x, n_y must be >= 0, got ({n_x}, {n_y})")
    if pol is Polarization.TE and n_x == 0 and n_y == 0:
        raise ModeIndexError("TE: (n_x, n_y) = (0, 0) carries no field")
    if pol is Polarization.TM and (n_x == 0 or n_y == 0):
        raise ModeIndexError(f"TM: n_x and n_y must both be >= 1, got ({n_x}, {n_y})")
