import math

import numpy as np
import pytest

from collobasis.basis import (
    BasisSet,
    ClosedFormBasis,
    CompositeBasis,
    ConcatDictionary,
    CornerSingularBasis,
    LocalizedDictionary,
    MemberDictionary,
    NeuronDictionary,
    SLFN,
    adaptive_init,
    eval_combination,
    eval_partial,
    hyperplane_density,
    make_localized_basis,
)
from collobasis.geometry import Box2D, Interval, LShape, child_rng
from collobasis.solver import SolverConfig


def _network(weights, biases, coefs):
    return CompositeBasis(NeuronDictionary(np.atleast_2d(weights), np.asarray(biases, float)),
                          np.asarray(coefs, float))


def single_neuron_2d():
    return _network(np.array([[1.0, 0.0]]), [0.0], [1.0])


def test_single_neuron_values():
    fn = single_neuron_2d()
    origin = np.zeros((1, 2))
    assert eval_partial(fn, (0, 0), origin)[0] == 0.0
    assert eval_partial(fn, (1, 0), origin)[0] == 1.0


def test_network_partial_formula(rng):
    w = rng.uniform(-2, 2, (6, 2))
    b = rng.uniform(-1, 1, 6)
    c = rng.uniform(-1, 1, 6)
    fn = _network(w, b, c)
    pts = rng.uniform(-1, 1, (20, 2))
    from collobasis.activation import tanh_derivative

    alpha = (2, 1)
    manual = np.zeros(20)
    for i in range(6):
        z = pts @ w[i] + b[i]
        manual += c[i] * tanh_derivative(3, z) * w[i, 0] ** 2 * w[i, 1]
    np.testing.assert_allclose(eval_partial(fn, alpha, pts), manual, rtol=1e-12, atol=1e-14)


def test_singular_value_at_unit_radius():
    fn = CornerSingularBasis(1)
    # angle measured from the (0,-1) corner edge: the point (1, 0) sits at
    # angular coordinate pi/2, giving sin((2/3)(pi/2)) = sin(pi/3)
    val = eval_partial(fn, (0, 0), np.array([[1.0, 0.0]]))[0]
    assert val == pytest.approx(math.sqrt(3.0) / 2.0, rel=1e-14)


def test_singular_vanishes_on_corner_edges():
    fn = CornerSingularBasis(2)
    edge_a = np.column_stack([np.zeros(9), -np.linspace(0.1, 0.9, 9)])  # x=0, y<0
    edge_b = np.column_stack([-np.linspace(0.1, 0.9, 9), np.zeros(9)])  # y=0, x<0
    np.testing.assert_allclose(fn.value(edge_a), 0.0, atol=1e-13)
    np.testing.assert_allclose(fn.value(edge_b), 0.0, atol=1e-13)


def test_singular_harmonic(rng):
    dom = LShape()
    pts = dom.uniform_interior(4000)
    r = np.hypot(pts[:, 0], pts[:, 1])
    pts = pts[(r >= 0.1) & (r <= 1.0)]
    for index in (1, 2, 5):
        fn = CornerSingularBasis(index)
        lap = fn.partial((2, 0), pts) + fn.partial((0, 2), pts)
        assert np.max(np.abs(lap)) < 1e-9


def test_eval_combination_cases(rng):
    pts = rng.uniform(-1, 1, (100, 2))
    members = [single_neuron_2d(), CornerSingularBasis(1)]
    zero_set = BasisSet(members, [0.0, 0.0])
    np.testing.assert_array_equal(eval_combination(zero_set, (0, 0), pts), np.zeros(100))
    one = BasisSet([members[0]], [1.0])
    np.testing.assert_array_equal(
        eval_combination(one, (1, 0), pts), eval_partial(members[0], (1, 0), pts)
    )
    both = BasisSet(members, [0.7, -1.3])
    manual = 0.7 * eval_partial(members[0], (0, 0), pts) - 1.3 * eval_partial(
        members[1], (0, 0), pts
    )
    np.testing.assert_allclose(eval_combination(both, (0, 0), pts), manual, atol=1e-14)


def _fd_partial(fn, alpha, pts, h=1e-5):
    """Central finite difference of the (|alpha|-1)-order partial."""
    k = max(i for i, a in enumerate(alpha) if a > 0)
    lower = list(alpha)
    lower[k] -= 1
    shift = np.zeros(pts.shape[1])
    shift[k] = h
    return (fn.partial(tuple(lower), pts + shift) - fn.partial(tuple(lower), pts - shift)) / (
        2 * h
    )


@pytest.mark.parametrize(
    "alpha",
    [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (4, 0), (2, 2), (0, 4)],
)
def test_network_partials_match_finite_differences(alpha, rng):
    fn = _network(rng.uniform(-2, 2, (8, 2)), rng.uniform(-1, 1, 8), rng.uniform(-1, 1, 8))
    pts = rng.uniform(-1, 1, (50, 2))
    an = fn.partial(alpha, pts)
    fd = _fd_partial(fn, alpha, pts)
    assert np.max(np.abs(an - fd) / np.maximum(1.0, np.abs(fd))) < 1e-6


@pytest.mark.parametrize("alpha", [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)])
def test_singular_partials_match_finite_differences(alpha, rng):
    fn = CornerSingularBasis(2)
    pts = LShape().uniform_interior(3000)
    r = np.hypot(pts[:, 0], pts[:, 1])
    pts = pts[r > 0.3][:50]
    an = fn.partial(alpha, pts)
    fd = _fd_partial(fn, alpha, pts, h=1e-6)
    assert np.max(np.abs(an - fd) / np.maximum(1.0, np.abs(fd))) < 1e-6


def test_adaptive_init_hyperplanes_pass_through_base_points(rng):
    dom = Interval(-1.0, 1.0)
    init = adaptive_init(lambda p: 1.0 + np.abs(p[:, 0]), 128, 5.0, dom, child_rng(3))
    resid = np.sum(init.weights * init.base_points, axis=1) + init.biases
    assert np.all(resid == 0.0)
    assert np.all(np.abs(init.weights) < 5.0)
    assert not init.uniform_fallback


def test_adaptive_init_zero_density_fallback():
    dom = Interval(0.0, 1.0)
    init = adaptive_init(lambda p: np.zeros(p.shape[0]), 16, 2.0, dom, child_rng(4))
    assert init.uniform_fallback


def test_hyperplane_density_counting():
    w = np.array([[1.0, 0.0]])
    b = np.array([0.0])
    tau = 0.25
    assert hyperplane_density(np.array([[0.0, 3.0]]), w, b, tau)[0] == 1.0
    assert hyperplane_density(np.array([[2 * tau, 0.0]]), w, b, tau)[0] == 0.0
    w3 = np.array([[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]])
    b3 = np.array([0.0, 5.0, -5.0])
    assert hyperplane_density(np.array([[0.0, 0.0]]), w3, b3, tau)[0] == pytest.approx(1 / 3)


def test_hyperplane_density_zero_weight_neuron_never_counts():
    w = np.array([[0.0, 0.0], [1.0, 0.0]])
    b = np.array([0.0, 0.0])
    d = hyperplane_density(np.array([[0.0, 0.0]]), w, b, 0.5)
    assert d[0] == pytest.approx(0.5)


def test_adaptive_init_density_concentrates_on_target_lobes():
    # target |sin x cos y| on (-pi, pi)^2: hyperplanes cluster where the
    # magnitude peaks and avoid its zero set
    dom = Box2D(((-np.pi, np.pi), (-np.pi, np.pi)))

    def target(p):
        return np.abs(np.sin(p[:, 0]) * np.cos(p[:, 1]))

    init = adaptive_init(target, 20_000, 3.0, dom, child_rng(5), dom.candidate_grid(300))
    lobes = np.array([[np.pi / 2, 0.0], [-np.pi / 2, 0.0]])
    # zero-set points in the deep zero region (x = +-pi lines near the
    # corners), away from the sampled mass; hyperplanes anchored at the
    # lobes still sweep points wedged between two lobes, so those carry
    # an unavoidable background density
    zeros = np.array([[3.09, 3.09], [-3.09, 3.09], [3.09, -3.09], [-3.09, -3.09]])
    d_lobe = hyperplane_density(lobes, init.weights, init.biases, 0.1).mean()
    d_zero = hyperplane_density(zeros, init.weights, init.biases, 0.1).mean()
    assert d_lobe > 2.0 * d_zero


def test_width_schedule_doubles_per_stage():
    cfg = SolverConfig(
        stages=6, width_stage1=10, weight_scale_slope=1.0, weight_scale_intercept=0.0,
        m_interior_uniform=64, m_interior_adaptive=32, m_boundary=2,
        penalty=1.0, n_opt=0, learning_rate=1e-2,
    )
    widths = [cfg.width_for(s) for s in range(1, 7)]
    assert widths == [10 * 2 ** (s - 1) for s in range(1, 7)]
    assert all(b == 2 * a for a, b in zip(widths, widths[1:]))


def _reference_field(rng):
    w = rng.uniform(-1.5, 1.5, (5, 2))
    b = rng.uniform(-0.5, 0.5, 5)
    c = rng.uniform(-1, 1, 5)
    return BasisSet([_network(w, b, c)], [1.0])


def test_localized_neuron_center_values(rng):
    u_star = _reference_field(rng)
    centers = rng.uniform(-0.8, 0.8, (12, 2))
    family = make_localized_basis(u_star, centers, 6.0, child_rng(6))
    vals = family.operator_block([((0, 0), 1.0)], centers)
    np.testing.assert_allclose(np.diag(vals), 1.0, atol=1e-13)


def test_localized_neuron_zero_shape_is_constant_one(rng):
    u_star = _reference_field(rng)
    centers = np.array([[0.1, -0.2]])
    family = LocalizedDictionary(centers, np.zeros((1, 2)), u_star)
    pts = rng.uniform(-1, 1, (40, 2))
    np.testing.assert_allclose(family.operator_block([((0, 0), 1.0)], pts)[:, 0], 1.0)


def test_localized_gradient_vanishes_at_center(rng):
    # both factors are flat at the center: the Gaussian at its peak and
    # the level-set factor because u(x) - u(x_i) vanishes there
    u_star = _reference_field(rng)
    centers = rng.uniform(-0.5, 0.5, (8, 2))
    family = make_localized_basis(u_star, centers, 4.0, child_rng(7))
    gx = family.operator_block([((1, 0), 1.0)], centers)
    gy = family.operator_block([((0, 1), 1.0)], centers)
    np.testing.assert_allclose(np.diag(gx), 0.0, atol=1e-11)
    np.testing.assert_allclose(np.diag(gy), 0.0, atol=1e-11)


@pytest.mark.parametrize("alpha", [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)])
def test_localized_partials_match_finite_differences(alpha, rng):
    u_star = _reference_field(rng)
    centers = rng.uniform(-0.5, 0.5, (6, 2))
    family = make_localized_basis(u_star, centers, 3.0, child_rng(8))
    pts = rng.uniform(-0.9, 0.9, (50, 2))
    for i in range(3):
        neuron = family.neuron(i)
        an = neuron.partial(alpha, pts)
        fd = _fd_partial(neuron, alpha, pts)
        assert np.max(np.abs(an - fd) / np.maximum(1.0, np.abs(fd))) < 1e-6


def test_localized_rejects_high_orders(rng):
    u_star = _reference_field(rng)
    family = make_localized_basis(u_star, np.zeros((2, 2)), 2.0, child_rng(9))
    with pytest.raises(ValueError, match="order"):
        family.operator_block([((3, 0), 1.0)], np.zeros((1, 2)))


def test_localized_empty_centers_give_empty_sequence(rng):
    assert make_localized_basis(_reference_field(rng), np.empty((0, 2)), 2.0, child_rng(1)) == []


def test_concat_dictionary_matches_hstack(rng):
    nd = NeuronDictionary(rng.uniform(-1, 1, (4, 2)), rng.uniform(-1, 1, 4))
    md = MemberDictionary([CornerSingularBasis(1), CornerSingularBasis(2)])
    cat = ConcatDictionary([nd, md])
    pts = LShape().uniform_interior(30)
    terms = [((0, 0), 1.0)]
    np.testing.assert_allclose(
        cat.operator_block(terms, pts),
        np.hstack([nd.operator_block(terms, pts), md.operator_block(terms, pts)]),
        atol=1e-14,
    )
    coef = rng.uniform(-1, 1, 6)
    np.testing.assert_allclose(
        cat.apply_terms(terms, pts, coef),
        cat.operator_block(terms, pts) @ coef,
        atol=1e-13,
    )


def test_basis_set_empty_is_zero():
    empty = BasisSet()
    pts = np.zeros((5, 2))
    np.testing.assert_array_equal(empty.value(pts), np.zeros(5))


def test_slfn_validation():
    with pytest.raises(ValueError):
        SLFN(np.zeros((0, 2)), np.zeros(0), np.zeros(0))
    with pytest.raises(ValueError):
        SLFN(np.zeros((3, 2)), np.zeros(2), np.zeros(3))
