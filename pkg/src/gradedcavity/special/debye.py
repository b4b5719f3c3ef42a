"""Uniform large-order (Debye) expansions for J_nu, Y_nu and their derivatives.

Valid for 0 < x < nu with nu large, where J_nu(x) is exponentially small and
Y_nu(x) exponentially large. Every function returns a signed logarithm
(sign, log|value|) so results far outside the double range stay usable.

With x = nu * sech(a) and t = coth(a):

    J_nu  ~  exp(nu (tanh a - a)) / sqrt(2 pi nu tanh a) * sum u_k(t) / nu^k
    Y_nu  ~ -exp(nu (a - tanh a)) / sqrt(pi nu tanh a / 2) * sum (-1)^k u_k(t) / nu^k
    J'_nu ~  sqrt(sinh 2a / (4 pi nu)) exp(nu (tanh a - a)) * sum v_k(t) / nu^k
    Y'_nu ~  sqrt(sinh 2a / (pi nu)) exp(nu (a - tanh a)) * sum (-1)^k v_k(t) / nu^k
"""

from __future__ import annotations

import math
from functools import lru_cache

from numpy.polynomial import Polynomial

# Correction terms kept in each series. With nu >= MIN_ORDER the truncation
# error is far below double precision away from the turning point.
TERMS = 8
MIN_ORDER = 20.0
# x / nu above this is too close to the turning point for the expansion.
MAX_RATIO = 0.9
# Last retained term must be this small relative to the sum.
SERIES_RTOL = 1e-12

SignedLog = tuple[float, float]


class DebyeRangeError(ArithmeticError):
    """Raised when (nu, x) lies outside the region the expansion covers."""


@lru_cache(maxsize=1)
def coefficient_polynomials() -> tuple[tuple[Polynomial, ...], tuple[Polynomial, ...]]:
    """Return (u_0..u_{TERMS-1}, v_0..v_{TERMS-1}) as polynomials in t.

    u_{k+1}(t) = t^2 (1 - t^2) u_k'(t) / 2 + (1/8) int_0^t (1 - 5 s^2) u_k(s) ds
    v_k(t) = u_k(t) + t (t^2 - 1) (u_{k-1}(t) / 2 + t u_{k-1}'(t))
    """
    t = Polynomial([0.0, 1.0])
    one = Polynomial([1.0])
    u: list[Polynomial] = [one]
    for _ in range(TERMS - 1):
        prev = u[-1]
        integrand = (one - 5 * t**2) * prev
        u.append(0.5 * t**2 * (one - t**2) * prev.deriv() + integrand.integ(lbnd=0) / 8)
    v: list[Polynomial] = [one]
    for k in range(1, TERMS):
        v.append(u[k] + t * (t**2 - one) * (0.5 * u[k - 1] + t * u[k - 1].deriv()))
    return tuple(u), tuple(v)


def _series(polys: tuple[Polynomial, ...], t: float, nu: float, alternating: bool) -> float:
    total = 0.0
    scale = 1.0
    term = 0.0
    for k, poly in enumerate(polys):
        term = float(poly(t)) * scale
        total += -term if (alternating and k % 2) else term
        scale /= nu
    if abs(term) > SERIES_RTOL * abs(total):
        raise DebyeRangeError(f"Debye series not converged at nu={nu!r}, t={t!r}")
    return total


def _log_sinh_2a(a: float) -> float:
    return 2 * a + math.log1p(-math.exp(-4 * a)) - math.log(2.0)


def _geometry(nu: float, x: float) -> tuple[float, float, float]:
    """Return (a, tanh a, coth a) for x = nu sech a."""
    if not (nu >= MIN_ORDER and 0 < x <= MAX_RATIO * nu):
        raise DebyeRangeError(f"Debye expansion not applicable at nu={nu!r}, x={x!r}")
    tanh_a = math.sqrt((nu - x) * (nu + x)) / nu
    a = math.acosh(nu / x)
    return a, tanh_a, 1.0 / tanh_a


def _signed(value: float, log_scale: float) -> SignedLog:
    if value == 0.0:
        return 0.0, -math.inf
    return math.copysign(1.0, value), log_scale + math.log(abs(value))


def log_j(nu: float, x: float) -> SignedLog:
    a, tanh_a, coth_a = _geometry(nu, x)
    u, _ = coefficient_polynomials()
    log_scale = nu * (tanh_a - a) - 0.5 * math.log(2 * math.pi * nu * tanh_a)
    return _signed(_series(u, coth_a, nu, alternating=False), log_scale)


def log_y(nu: float, x: float) -> SignedLog:
    a, tanh_a, coth_a = _geometry(nu, x)
    u, _ = coefficient_polynomials()
    log_scale = nu * (a - tanh_a) - 0.5 * math.log(0.5 * math.pi * nu * tanh_a)
    return _signed(-_series(u, coth_a, nu, alternating=True), log_scale)


def log_j_prime(nu: float, x: float) -> SignedLog:
    a, tanh_a, coth_a = _geometry(nu, x)
    _, v = coefficient_polynomials()
    log_scale = nu * (tanh_a - a) + 0.5 * (_log_sinh_2a(a) - math.log(4 * math.pi * nu))
    return _signed(_series(v, coth_a, nu, alternating=False), log_scale)


def log_y_prime(nu: float, x: float) -> SignedLog:
    a, tanh_a, coth_a = _geometry(nu, x)
    _, v = coefficient_polynomials()
    log_scale = nu * (a - tanh_a) + 0.5 * (_log_sinh_2a(a) - math.log(math.pi * nu))
    return _signed(_series(v, coth_a, nu, alternating=True), log_scale)
