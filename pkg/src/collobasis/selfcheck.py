"""Quick invariant and oracle checks behind ``collobasis check``.

Small instances of the same properties the test suite pins down: meant
to finish in seconds and catch a broken install or BLAS rather than to
replace the tests.
"""

from __future__ import annotations

import numpy as np

from .activation import tanh_derivative
from .basis import SLFN, adaptive_init
from .geometry import Interval, child_rng, rejection_sample
from .linalg import lstsq
from .operators import Dirichlet, NegLaplacian, loss_param_gradient
from .problems import builtin
from .solver import solve
from .training import loss_value


def _check_activation() -> bool:
    rng = child_rng(11)
    z = rng.uniform(-3.0, 3.0, size=50)
    h = 1e-5
    for order in range(1, 6):
        fd = (tanh_derivative(order - 1, z + h) - tanh_derivative(order - 1, z - h)) / (2 * h)
        an = tanh_derivative(order, z)
        if np.max(np.abs(an - fd) / np.maximum(1.0, np.abs(fd))) > 1e-6:
            return False
    return True


def _check_lstsq() -> bool:
    res = lstsq(np.eye(2), np.array([1.0, 2.0]))
    if not np.allclose(res.solution, [1.0, 2.0]) or res.residual_norm > 1e-12:
        return False
    res = lstsq(np.ones((2, 2)), np.array([1.0, 1.0]))
    if not np.allclose(res.solution, [0.5, 0.5]):
        return False
    rng = child_rng(12)
    for _ in range(20):
        a = rng.standard_normal((30, 8))
        b = rng.standard_normal(30)
        r_small = lstsq(a[:, :5], b).residual_norm
        r_big = lstsq(a, b).residual_norm
        if r_big > r_small * (1.0 + 1e-12) + 1e-14:
            return False
    return True


def _check_rejection() -> bool:
    domain = Interval(0.0, 1.0)
    grid = domain.candidate_grid(1000)
    draw = rejection_sample(np.ones(grid.shape[0]), domain, 10_000, grid, child_rng(13))
    x = np.sort(draw.points[:, 0])
    ks = np.max(np.abs(np.arange(1, x.size + 1) / x.size - x))
    return ks < 0.02


def _check_init_passthrough() -> bool:
    domain = Interval(-1.0, 1.0)
    init = adaptive_init(lambda p: 1.0 + p[:, 0] ** 2, 64, 3.0, domain, child_rng(14))
    resid = np.sum(init.weights * init.base_points, axis=1) + init.biases
    return bool(np.all(resid == 0.0))


def _check_gradient() -> bool:
    rng = child_rng(15)
    slfn = SLFN(rng.uniform(-1, 1, (4, 1)), rng.uniform(-1, 1, 4), rng.uniform(-1, 1, 4))
    x = rng.uniform(0.05, 0.95, (20, 1))
    xb = np.array([[0.0], [1.0]])
    nb = np.array([[-1.0], [1.0]])
    f = np.sin(3 * x[:, 0])
    g = np.zeros(2)
    op, bnd, lam = NegLaplacian(), Dirichlet(), 2.0
    grad = loss_param_gradient(op, bnd, slfn, x, xb, nb, f, g, lam).flat()

    def pack(s):
        return np.concatenate([s.weights.ravel(), s.biases, s.coefficients])

    def unpack(t):
        return SLFN(t[:4].reshape(4, 1), t[4:8], t[8:])

    theta = pack(slfn)
    fd = np.zeros_like(theta)
    for k in range(theta.size):
        h = 1e-6 * max(1.0, abs(theta[k]))
        tp, tm = theta.copy(), theta.copy()
        tp[k] += h
        tm[k] -= h
        lp = loss_value(op, bnd, _as_basis(unpack(tp)), x, xb, nb, f, g, lam)
        lm = loss_value(op, bnd, _as_basis(unpack(tm)), x, xb, nb, f, g, lam)
        fd[k] = (lp - lm) / (2 * h)
    rel = np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), 1e-300)
    return rel < 1e-5


def _as_basis(slfn: SLFN):
    from .basis import CompositeBasis

    return CompositeBasis(slfn.dictionary(), slfn.coefficients)


def _check_small_run() -> bool:
    problem = builtin("function_fitting")
    result = solve(problem, problem.config(stages=3, seed=3))
    est = [r.estimator for r in result.reports]
    errs = [r.e_l2 for r in result.reports]
    return len(est) == 3 and est[-1] < est[0] and errs[-1] < errs[0]


_CHECKS = [
    ("activation derivatives vs finite differences", _check_activation),
    ("truncated-SVD least squares", _check_lstsq),
    ("rejection sampling uniform KS", _check_rejection),
    ("adaptive init hyperplane pass-through", _check_init_passthrough),
    ("loss gradient vs finite differences", _check_gradient),
    ("small fitting run converges", _check_small_run),
]


def run(report=print) -> bool:
    ok = True
    for name, fn in _CHECKS:
        try:
            passed = fn()
        except Exception as exc:  # a crash is a failure, keep the tour going
            report(f"FAIL {name}: {exc}")
            ok = False
            continue
        report(("PASS " if passed else "FAIL ") + name)
        ok = ok and passed
    return ok
