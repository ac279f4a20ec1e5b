import numpy as np
import pytest

from collobasis.activation import (
    Activation,
    MAX_ORDER,
    UnsupportedOrderError,
    _DERIVATIVE_POLYS,
    activation_derivative,
    tanh_derivative,
    tanh_derivative_from_t,
)


def test_known_values_at_zero():
    assert tanh_derivative(0, 0.0) == 0.0
    assert tanh_derivative(1, 0.0) == 1.0
    # recurrence gives Q3(t) = (6t^2 - 2)(1 - t^2), so Q3(0) = -2
    assert tanh_derivative(3, 0.0) == -2.0


def test_third_derivative_confirmed_by_finite_differences():
    h = 1e-5
    fd = (tanh_derivative(2, h) - tanh_derivative(2, -h)) / (2 * h)
    assert abs(fd - (-2.0)) < 1e-6


@pytest.mark.parametrize("order", range(1, MAX_ORDER + 1))
def test_matches_finite_differences_of_previous_order(order, rng):
    z = rng.uniform(-3.0, 3.0, size=50)
    h = 1e-5
    fd = (tanh_derivative(order - 1, z + h) - tanh_derivative(order - 1, z - h)) / (2 * h)
    an = tanh_derivative(order, z)
    assert np.max(np.abs(an - fd) / np.maximum(1.0, np.abs(fd))) < 1e-6


@pytest.mark.parametrize("order", range(0, MAX_ORDER + 1))
def test_parity(order, rng):
    z = rng.uniform(-4.0, 4.0, size=40)
    sign = (-1.0) ** (order + 1)
    np.testing.assert_allclose(
        tanh_derivative(order, -z), sign * tanh_derivative(order, z), rtol=0, atol=1e-15
    )


def test_bounded_by_16():
    z = np.linspace(-40.0, 40.0, 20001)
    for order in range(MAX_ORDER + 1):
        assert np.max(np.abs(tanh_derivative(order, z))) <= 16.0


def test_fast_path_matches_generated_polynomials(rng):
    from numpy.polynomial import polynomial as P

    t = np.tanh(rng.uniform(-5, 5, size=200))
    for order in range(1, MAX_ORDER + 1):
        np.testing.assert_allclose(
            tanh_derivative_from_t(order, t),
            P.polyval(t, _DERIVATIVE_POLYS[order]),
            rtol=1e-12,
            atol=1e-13,
        )


def test_order_above_ceiling_raises():
    with pytest.raises(UnsupportedOrderError):
        tanh_derivative(MAX_ORDER + 1, 0.3)
    with pytest.raises(ValueError):
        tanh_derivative(-1, 0.3)


def test_activation_dispatch():
    assert activation_derivative(Activation.TANH, 1, 0.0) == 1.0
    with pytest.raises(ValueError):
        activation_derivative("relu", 1, 0.0)
