import dataclasses
import math

import numpy as np
import pytest
import sympy as sp

from collobasis.basis import BasisSet, ClosedFormBasis, CompositeBasis, MemberDictionary, NeuronDictionary
from collobasis.geometry import Interval, child_rng
from collobasis.operators import Dirichlet, NegLaplacian
from collobasis.problems import builtin
from collobasis.solver import SolverConfig, solve, solve_nonlinear_ac, triple_norm
from collobasis.training import collo_lsq, field_values


def test_triple_norm_zero_and_constant():
    problem = builtin("function_fitting")
    grid = problem.domain.interior_grid(1000)
    assert triple_norm(BasisSet(), problem, grid) == 0.0
    # identity operator, no boundary term: the norm of a constant c on a
    # length-2 interval is |c| * sqrt(|domain|) = c * sqrt(2)
    val = triple_norm(lambda p: np.full(p.shape[0], 3.0), problem, grid)
    assert val == pytest.approx(3.0 * math.sqrt(2.0), rel=1e-12)


def test_triple_norm_polynomial_against_symbolic_integral():
    problem = builtin("boundary_layer")
    x = sp.symbols("x")
    u = (1 - x**2) * x**2
    # closed-form ||| u |||^2 = int(-eps u'' + b u')^2 + lam^2 (u(-1)^2 + u(1)^2)
    eps, drift = problem.params["eps"], problem.params["drift"]
    lu = -eps * sp.diff(u, x, 2) + drift * sp.diff(u, x)
    exact_interior = float(sp.integrate(lu**2, (x, -1, 1)))
    lam = 7.0
    exact = math.sqrt(exact_interior)  # boundary trace vanishes for this u
    partials = {}
    for k in range(3):
        fn = sp.lambdify(x, sp.diff(u, x, k), "numpy")
        partials[(k,)] = lambda pts, fn=fn: np.asarray(fn(pts[:, 0]), dtype=np.float64)
    v = ClosedFormBasis(1, partials)
    grid = problem.domain.interior_grid(10_000)
    bnd, nrm = problem.domain.boundary_points(2)
    got = triple_norm(v, problem, grid, bnd, nrm, penalty=lam)
    assert abs(got - exact) / exact < 1e-3


def test_triple_norm_callable_rejects_derivative_operators():
    problem = builtin("boundary_layer")
    grid = problem.domain.interior_grid(100)
    with pytest.raises(TypeError):
        triple_norm(lambda p: p[:, 0], problem, grid)


def _small_fitting_config(**overrides):
    problem = builtin("function_fitting")
    return problem, problem.config(stages=3, seed=1, **overrides)


def test_solve_zero_stages_returns_initial_state():
    problem, config = _small_fitting_config()
    result = solve(problem, dataclasses.replace(config, stages=0))
    assert result.reports == []
    assert len(result.basis) == 0
    assert result.initial_error_norm > 0


def test_estimator_tolerance_infinite_stops_after_one_stage():
    problem, config = _small_fitting_config(estimator_tolerance=float("inf"))
    result = solve(problem, config)
    assert len(result.reports) == 1


def test_solve_rejects_nonlinear_problems():
    ac = builtin("allen_cahn")
    with pytest.raises(ValueError, match="nonlinear"):
        solve(ac, ac.config(stages=1))


def test_determinism_bitwise_reports():
    problem, config = _small_fitting_config()
    a = solve(problem, config)
    b = solve(problem, config)
    assert a.initial_error_norm == b.initial_error_norm
    for ra, rb in zip(a.reports, b.reports):
        assert ra.coefficients == rb.coefficients
        assert (ra.estimator, ra.residual_interior, ra.residual_boundary) == (
            rb.estimator, rb.residual_interior, rb.residual_boundary,
        )
        assert (ra.e_linf, ra.e_l2, ra.true_error_norm) == (rb.e_linf, rb.e_l2, rb.true_error_norm)


def test_estimator_decreases_on_fitting():
    problem, config = _small_fitting_config()
    result = solve(problem, config)
    est = [r.estimator for r in result.reports]
    assert est[1] < est[0] and est[2] < est[1]


def test_zero_member_column_leaves_outer_residual_unchanged():
    # appending an identically-zero basis function must not change the
    # outer least-squares residual
    problem, config = _small_fitting_config()
    result = solve(problem, config)
    dom = problem.domain
    x = dom.uniform_interior(256)
    f = field_values(problem.source, x)
    members = result.basis.members
    fit = collo_lsq(problem.operator, f, None, None, MemberDictionary(members), x)
    zero = ClosedFormBasis(1, {(0,): lambda p: np.zeros(p.shape[0])}, max_order=4)
    fit_aug = collo_lsq(problem.operator, f, None, None, MemberDictionary(members + [zero]), x)
    assert abs(fit_aug.residual_norm - fit.residual_norm) <= 1e-12 * max(1.0, fit.residual_norm)


def test_outer_residual_monotone_in_members():
    problem, config = _small_fitting_config()
    result = solve(problem, config)
    dom = problem.domain
    x = dom.uniform_interior(256)
    f = field_values(problem.source, x)
    members = result.basis.members
    r_prev = collo_lsq(problem.operator, f, None, None, MemberDictionary(members[:2]), x)
    r_full = collo_lsq(problem.operator, f, None, None, MemberDictionary(members), x)
    assert r_full.residual_norm <= r_prev.residual_norm * (1 + 1e-12) + 1e-15


def test_report_fields_populated():
    problem, config = _small_fitting_config()
    result = solve(problem, config)
    for rep in result.reports:
        assert rep.width == config.width_for(rep.stage)
        assert rep.estimator >= 0
        assert rep.wall_ms > 0
        assert rep.effective_rank <= rep.stage
        assert len(rep.coefficients) == rep.stage
        assert rep.e_linf is not None and rep.e_l2 is not None
        assert rep.e_l2 <= rep.e_linf * math.sqrt(problem.domain.measure) * (1 + 1e-12)


def _eigenfunction_guess():
    """sin(pi(x+1)/2) sin(pi(y+1)/2): a Dirichlet Laplacian eigenfunction."""
    k = math.pi / 2.0

    def trig(fx, fy, sign):
        def fn(points):
            return sign * fx(k * (points[:, 0] + 1.0)) * fy(k * (points[:, 1] + 1.0))

        return fn

    s, c = np.sin, np.cos
    partials = {
        (0, 0): trig(s, s, 1.0),
        (1, 0): trig(c, s, k),
        (0, 1): trig(s, c, k),
        (2, 0): trig(s, s, -k * k),
        (1, 1): trig(c, c, k * k),
        (0, 2): trig(s, s, -k * k),
    }
    return ClosedFormBasis(2, partials), 2.0 * k * k


def test_nonlinear_fixed_point_keeps_coefficients():
    # with u0 a Laplacian eigenfunction (lap u0 = -lam u0) and the source
    # map f(u) = -(eps^2 lam + stab eps^2) u, u0 solves L u = f(u)
    # exactly, so the iteration is at a fixed point and the combination
    # coefficients must stay put
    ac = builtin("allen_cahn")
    guess, lam_eig = _eigenfunction_guess()
    eps, stab = ac.params["eps"], ac.params["stab"]
    factor = -(eps**2) * (lam_eig + stab)
    problem = dataclasses.replace(
        ac,
        initial_guess=guess,
        nonlinear_source=lambda u: factor * np.asarray(u),
    )
    config = ac.config(
        stages=1, seed=3, m_interior_uniform=400, m_interior_adaptive=200,
        m_boundary=40, width_stage1=8, n_opt=0, candidate_per_dim=100,
        ac_iter_slope=0, ac_iter_offset=2,
    )
    result = solve_nonlinear_ac(problem, config)
    coef = np.asarray(result.reports[-1].coefficients)
    assert coef[0] == pytest.approx(1.0, abs=1e-7)
    assert abs(result.basis.value(np.array([[0.3, -0.2]]))[0]
               - guess.value(np.array([[0.3, -0.2]]))[0]) < 1e-7


def test_nonlinear_single_iteration_runs():
    ac = builtin("allen_cahn")
    config = ac.config(
        stages=1, seed=0, m_interior_uniform=400, m_interior_adaptive=200,
        m_boundary=40, width_stage1=8, n_opt=2, candidate_per_dim=100,
        ac_iter_slope=0, ac_iter_offset=1,
    )
    result = solve_nonlinear_ac(ac, config)
    assert len(result.reports) == 1
    assert len(result.reports[0].iterations) == 1
    assert result.reports[0].iterations[0].interior_residual >= 0


def test_nonlinear_requires_initial_guess_and_source():
    fitting = builtin("function_fitting")
    with pytest.raises(ValueError, match="fixed-point"):
        solve_nonlinear_ac(fitting, fitting.config(stages=1))


def test_width_and_scale_schedules():
    cfg = SolverConfig(
        stages=4, width_stage1=6, weight_scale_slope=3.0, weight_scale_intercept=-2.0,
        m_interior_uniform=8, m_interior_adaptive=4, m_boundary=2,
        penalty=1.0, n_opt=0, learning_rate=0.1, widths=(3, 9, 27, 81),
    )
    assert [cfg.width_for(s) for s in (1, 2, 3, 4)] == [3, 9, 27, 81]
    assert cfg.weight_scale_for(3) == pytest.approx(7.0)
    assert cfg.ac_iterations_for(4) == 5
