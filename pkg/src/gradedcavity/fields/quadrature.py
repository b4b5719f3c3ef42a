"""Box quadrature: tensor Gauss-Legendre on x, y and adaptive quad along z.

The x, y dependence of every mode is a trigonometric polynomial, so a fixed
Gauss-Legendre rule with order 2 max(n_x, n_y) + extra integrates it to
rounding. The z dependence carries the Bessel profile and goes through
``scipy.integrate.quad``.
"""

from __future__ import annotations

import logging
import warnings
from collections.abc import Callable
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import numpy.typing as npt
from numpy.polynomial.legendre import leggauss
from scipy import integrate

from gradedcavity.types import CavityGeometry

logger = logging.getLogger(__name__)

XY_EXTRA_ORDER = 16
Z_RTOL = 1e-10
Z_LIMIT = 200

FloatArray = npt.NDArray[np.float64]


class QuadratureError(RuntimeError):
    """Raised when adaptive quadrature does not reach the requested tolerance."""

    def __init__(self, message: str, estimate: float | None = None) -> None:
        if estimate is not None:
            message = f"{message} (error estimate {estimate:.3g})"
        super().__init__(message)
        self.estimate = estimate


@lru_cache(maxsize=64)
def _reference_rule(order: int) -> tuple[FloatArray, FloatArray]:
    nodes, weights = leggauss(order)
    return nodes, weights


def gauss_legendre(order: int, lo: float, hi: float) -> tuple[FloatArray, FloatArray]:
    """Nodes and weights of the order-point rule mapped to [lo, hi]."""
    if order < 1:
        raise ValueError(f"quadrature order must be >= 1, got {order}")
    nodes, weights = _reference_rule(order)
    half = 0.5 * (hi - lo)
    return lo + half * (nodes + 1.0), half * weights


def xy_quadrature_order(*transverse: int, extra: int = XY_EXTRA_ORDER) -> int:
    return 2 * max(transverse, default=0) + extra


@dataclass(frozen=True)
class FaceGrid:
    """Tensor-product nodes on a z = const plane with their weights."""

    x: FloatArray
    y: FloatArray
    weights: FloatArray

    def integrate(self, values: FloatArray) -> float:
        return float(np.sum(self.weights * values))


def face_grid(geometry: CavityGeometry, order: int) -> FaceGrid:
    x_nodes, x_weights = gauss_legendre(order, 0.0, geometry.L_x)
    y_nodes, y_weights = gauss_legendre(order, 0.0, geometry.L_y)
    x, y = np.meshgrid(x_nodes, y_nodes, indexing="ij")
    return FaceGrid(x=x, y=y, weights=np.outer(x_weights, y_weights))


def integrate_z(
    func: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    rtol: float = Z_RTOL,
    atol: float = 0.0,
    limit: int = Z_LIMIT,
) -> tuple[float, float]:
    """Adaptive integral of func over [lo, hi]; returns (value, error estimate)."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, abserr = integrate.quad(func, lo, hi, epsabs=atol, epsrel=rtol, limit=limit)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"z quadrature did not converge: {exc}") from exc
    if abserr > max(atol, 10 * rtol * abs(value)):
        raise QuadratureError("z quadrature above tolerance", estimate=abserr)
    return float(value), float(abserr)


def integrate_box(
    density: Callable[[FaceGrid, float], float],
    geometry: CavityGeometry,
    order: int,
    *,
    rtol: float = Z_RTOL,
    atol: float = 0.0,
) -> tuple[float, float]:
    """Integrate over the box: density(grid, z) returns the face integral at height z."""
    grid = face_grid(geometry, order)
    return integrate_z(lambda z: density(grid, z), 0.0, geometry.L_z, rtol=rtol, atol=atol)
