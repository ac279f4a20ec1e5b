"""Tanh activation with closed-form derivatives up to order five.

Fourth-order operators evaluate sigma'''' at every collocation point and
hidden-parameter gradients need one order more, hence the ceiling of 5.
Derivatives are polynomials in t = tanh(z), generated once by the
recurrence Q_0(t) = t, Q_{n+1}(t) = Q_n'(t) * (1 - t^2).
"""

from __future__ import annotations

from enum import Enum

import numpy as np
from numpy.polynomial import polynomial as _poly

MAX_ORDER = 5


class UnsupportedOrderError(ValueError):
    """Raised for derivative orders above MAX_ORDER (raise the constant to extend)."""


class Activation(Enum):
    TANH = "tanh"


def _derivative_polynomials(max_order: int) -> tuple[np.ndarray, ...]:
    one_minus_t2 = np.array([1.0, 0.0, -1.0])
    polys = [np.array([0.0, 1.0])]
    for _ in range(max_order):
        polys.append(_poly.polymul(_poly.polyder(polys[-1]), one_minus_t2))
    return tuple(polys)


_DERIVATIVE_POLYS = _derivative_polynomials(MAX_ORDER)


def _check_order(order: int) -> None:
    if not isinstance(order, (int, np.integer)) or order < 0:
        raise ValueError(f"derivative order must be a nonnegative integer, got {order!r}")
    if order > MAX_ORDER:
        raise UnsupportedOrderError(
            f"tanh derivatives implemented up to order {MAX_ORDER}, got {order}"
        )


def tanh_derivative_from_t(order: int, t):
    """Evaluate d^order/dz^order tanh(z) given t = tanh(z).

    Lets callers reuse one tanh evaluation across several orders. The
    hot path spells out the recurrence polynomials (hit with huge arrays
    during block assembly); ``_DERIVATIVE_POLYS`` holds the generated
    coefficients for cross-checking and extension.
    """
    _check_order(order)
    t = np.asarray(t, dtype=np.float64)
    if order == 0:
        return t
    sech2 = 1.0 - t * t
    if order == 1:
        return sech2
    if order == 2:
        return -2.0 * t * sech2
    t2 = t * t
    if order == 3:
        return sech2 * (6.0 * t2 - 2.0)
    if order == 4:
        return sech2 * t * (16.0 - 24.0 * t2)
    return sech2 * (16.0 + t2 * (-120.0 + 120.0 * t2))


def tanh_derivative(order: int, z):
    """d^order/dz^order tanh evaluated at z (elementwise on arrays)."""
    return tanh_derivative_from_t(order, np.tanh(np.asarray(z, dtype=np.float64)))


def activation_derivative(kind: Activation, order: int, z):
    if kind is not Activation.TANH:
        raise ValueError(f"unsupported activation {kind!r}")
    return tanh_derivative(order, z)
