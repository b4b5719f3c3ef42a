"""Real-order Bessel functions of the first and second kind.

Double-precision values come from ``scipy.special.jv`` / ``yv``. A value
outside the window [TINY, HUGE] is unrepresentable when it comes from the
monotone region x <= debye.MAX_RATIO * nu: the plain functions raise
``BesselOverflowError`` there and the log-scaled functions fall back to the
uniform large-order expansion in ``debye``. Above that ratio the functions
oscillate, so a zero or sub-TINY value is a point on a zero crossing and is
kept as it is. Cross products are assembled from signed logarithms so their
sign survives even when both products leave the double range.

All functions are pure; they can be called from any thread.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass

from scipy import special

from gradedcavity.special import debye

TINY = 1e-290
HUGE = 1e290
# Y_nu(x) and Y'_nu(x) are reported as overflow below this argument.
Y_ARGUMENT_FLOOR = 1e-300

_LOG_MAX = math.log(1.7976931348623157e308)

SignedLog = tuple[float, float]


class BesselDomainError(ValueError):
    """Raised for negative or non-finite order, or non-positive argument."""


class BesselOverflowError(ArithmeticError):
    """Raised when a value cannot be represented in double precision."""


@dataclass(frozen=True)
class ScaledPair:
    """Signed logarithms of a first-kind / second-kind pair at one argument.

    Used for (J, Y), (J', Y') and the tilde pair (xJ' + J, xY' + Y).
    A zero value has sign 0 and log -inf.
    """

    sign_j: float
    log_abs_j: float
    sign_y: float
    log_abs_y: float

    @property
    def j(self) -> float:
        return _to_float((self.sign_j, self.log_abs_j))

    @property
    def y(self) -> float:
        return _to_float((self.sign_y, self.log_abs_y))

    @property
    def log_modulus(self) -> float:
        """log M with M = sqrt(j^2 + y^2)."""
        peak = max(self.log_abs_j, self.log_abs_y)
        return peak + 0.5 * math.log(
            math.exp(2 * (self.log_abs_j - peak)) + math.exp(2 * (self.log_abs_y - peak))
        )

    def unit(self) -> tuple[float, float]:
        """Return (j / M, y / M)."""
        log_mod = self.log_modulus
        return (
            self.sign_j * math.exp(self.log_abs_j - log_mod),
            self.sign_y * math.exp(self.log_abs_y - log_mod),
        )


def _validate(nu: float, x: float) -> None:
    if not (math.isfinite(nu) and math.isfinite(x)):
        raise BesselDomainError(f"non-finite input nu={nu!r}, x={x!r}")
    if nu < 0:
        raise BesselDomainError(f"order must be >= 0, got {nu!r}")
    if x <= 0:
        raise BesselDomainError(f"argument must be > 0, got {x!r}")


def _representable(value: float) -> bool:
    return math.isfinite(value) and TINY <= abs(value) <= HUGE


def _oscillatory(nu: float, x: float) -> bool:
    return x > debye.MAX_RATIO * nu


def _on_zero_crossing(value: float, nu: float, x: float) -> bool:
    """True for a finite value below TINY where J and Y have zeros."""
    return math.isfinite(value) and abs(value) < TINY and _oscillatory(nu, x)


def _resolve(
    value: float, func: Callable[[float, float], SignedLog], nu: float, x: float,
) -> SignedLog:
    if _representable(value) or _on_zero_crossing(value, nu, x):
        return _signed_log(value)
    return _debye(func, nu, x)


def _signed_log(value: float) -> SignedLog:
    if value == 0.0:
        return 0.0, -math.inf
    return math.copysign(1.0, value), math.log(abs(value))


def _to_float(item: SignedLog) -> float:
    sign, log_abs = item
    if sign == 0.0:
        return 0.0
    if log_abs > _LOG_MAX:
        raise BesselOverflowError(f"value exp({log_abs:.6g}) exceeds double range")
    return sign * math.exp(log_abs)


def _signed_add(a: SignedLog, b: SignedLog) -> SignedLog:
    if a[0] == 0.0:
        return b
    if b[0] == 0.0:
        return a
    if a[1] < b[1]:
        a, b = b, a
    total = 1.0 + (b[0] / a[0]) * math.exp(b[1] - a[1])
    if total == 0.0:
        return 0.0, -math.inf
    return a[0] * math.copysign(1.0, total), a[1] + math.log(abs(total))


def _debye(func: Callable[[float, float], SignedLog], nu: float, x: float) -> SignedLog:
    try:
        return func(nu, x)
    except debye.DebyeRangeError as exc:
        raise BesselOverflowError(
            f"nu={nu!r}, x={x!r} is outside both the double range and the asymptotic region"
        ) from exc


def _recurrence_derivative(
    func: Callable[[float, float], float], nu: float, x: float,
) -> float:
    """f'_nu(x) = f_{nu-1}(x) - (nu / x) f_nu(x)."""
    lower = float(func(nu - 1.0, x))
    base = float(func(nu, x))
    if not (math.isfinite(lower) and math.isfinite(base)):
        raise BesselOverflowError(f"derivative at nu={nu!r}, x={x!r} is not finite")
    peak = max(abs(lower), abs(base))
    if peak > HUGE or (peak < TINY and not _oscillatory(nu, x)):
        raise BesselOverflowError(f"derivative at nu={nu!r}, x={x!r} outside double range")
    value = lower - (nu / x) * base
    if not math.isfinite(value) or abs(value) > HUGE:
        raise BesselOverflowError(f"derivative at nu={nu!r}, x={x!r} outside double range")
    return value


def bessel_j(nu: float, x: float) -> float:
    _validate(nu, x)
    value = float(special.jv(nu, x))
    if not (_representable(value) or _on_zero_crossing(value, nu, x)):
        raise BesselOverflowError(f"J_{nu}({x}) = {value!r} is outside double range")
    return value


def bessel_y(nu: float, x: float) -> float:
    _validate(nu, x)
    if x < Y_ARGUMENT_FLOOR:
        raise BesselOverflowError(f"Y_{nu}({x}) diverges below x = {Y_ARGUMENT_FLOOR}")
    value = float(special.yv(nu, x))
    if not (_representable(value) or _on_zero_crossing(value, nu, x)):
        raise BesselOverflowError(f"Y_{nu}({x}) = {value!r} is outside double range")
    return value


def bessel_j_prime(nu: float, x: float) -> float:
    _validate(nu, x)
    return _recurrence_derivative(special.jv, nu, x)


def bessel_y_prime(nu: float, x: float) -> float:
    _validate(nu, x)
    if x < Y_ARGUMENT_FLOOR:
        raise BesselOverflowError(f"Y'_{nu}({x}) diverges below x = {Y_ARGUMENT_FLOOR}")
    return _recurrence_derivative(special.yv, nu, x)


def log_scaled(nu: float, x: float) -> ScaledPair:
    """Signed logs of J_nu(x) and Y_nu(x), valid beyond the double range."""
    _validate(nu, x)
    j = float(special.jv(nu, x))
    y = float(special.yv(nu, x))
    sj, lj = _resolve(j, debye.log_j, nu, x)
    sy, ly = _resolve(y, debye.log_y, nu, x)
    return ScaledPair(sj, lj, sy, ly)


def log_scaled_prime(nu: float, x: float) -> ScaledPair:
    """Signed logs of J'_nu(x) and Y'_nu(x)."""
    _validate(nu, x)
    try:
        sj, lj = _signed_log(_recurrence_derivative(special.jv, nu, x))
    except BesselOverflowError:
        sj, lj = _debye(debye.log_j_prime, nu, x)
    try:
        sy, ly = _signed_log(_recurrence_derivative(special.yv, nu, x))
    except BesselOverflowError:
        sy, ly = _debye(debye.log_y_prime, nu, x)
    return ScaledPair(sj, lj, sy, ly)


def log_scaled_tilde(nu: float, x: float) -> ScaledPair:
    """Signed logs of the tilde pair x f'(x) + f(x) for f = J_nu, Y_nu."""
    base = log_scaled(nu, x)
    deriv = log_scaled_prime(nu, x)
    log_x = math.log(x)
    sj, lj = _signed_add((deriv.sign_j, deriv.log_abs_j + log_x), (base.sign_j, base.log_abs_j))
    sy, ly = _signed_add((deriv.sign_y, deriv.log_abs_y + log_x), (base.sign_y, base.log_abs_y))
    return ScaledPair(sj, lj, sy, ly)


def _signed_cross(pa: ScaledPair, pb: ScaledPair) -> SignedLog:
    first = (pa.sign_j * pb.sign_y, pa.log_abs_j + pb.log_abs_y)
    second = (-pb.sign_j * pa.sign_y, pb.log_abs_j + pa.log_abs_y)
    return _signed_add(first, second)


def _cross(pa: ScaledPair, pb: ScaledPair) -> float:
    direct = (pa.log_abs_j, pa.log_abs_y, pb.log_abs_j, pb.log_abs_y)
    if all(math.log(TINY) <= v <= math.log(HUGE) for v in direct):
        return pa.j * pb.y - pb.j * pa.y
    return _to_float(_signed_cross(pa, pb))


def cross_product(nu: float, a: float, b: float) -> float:
    """J_nu(a) Y_nu(b) - J_nu(b) Y_nu(a)."""
    _validate(nu, a)
    _validate(nu, b)
    if a == b:
        return 0.0
    return _cross(log_scaled(nu, a), log_scaled(nu, b))


def cross_product_tilde(nu: float, a: float, b: float) -> float:
    """J~_nu(a) Y~_nu(b) - J~_nu(b) Y~_nu(a) with f~(x) = x f'(x) + f(x)."""
    _validate(nu, a)
    _validate(nu, b)
    if a == b:
        return 0.0
    return _cross(log_scaled_tilde(nu, a), log_scaled_tilde(nu, b))


def cross_product_sign(nu: float, a: float, b: float, *, tilde: bool = False) -> float:
    """Sign of the cross product computed purely on the log-scaled path."""
    scaled = log_scaled_tilde if tilde else log_scaled
    return _signed_cross(scaled(nu, a), scaled(nu, b))[0]


def normalized_cross_product(nu: float, a: float, b: float, *, tilde: bool = False) -> float:
    """Cross product divided by the moduli M(a) M(b); bounded by 1 in magnitude.

    Same zeros and signs as the raw cross product, but never overflows. A
    nonzero result too small for a double is reported as +-TINY.
    """
    _validate(nu, a)
    _validate(nu, b)
    if a == b:
        return 0.0
    scaled = log_scaled_tilde if tilde else log_scaled
    pa, pb = scaled(nu, a), scaled(nu, b)
    sign, log_abs = _signed_cross(pa, pb)
    if sign == 0.0:
        return 0.0
    return sign * max(math.exp(log_abs - pa.log_modulus - pb.log_modulus), TINY)
