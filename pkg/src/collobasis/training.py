"""Collocation least squares and the per-stage basis training loop.

One stage trains one hidden-layer network on the current residual
equation: solve the output coefficients by least squares over the frozen
hidden dictionary, refine the hidden parameters with a few Adam steps on
the squared-residual loss, then resolve the output coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import (
    BasisFunction,
    CompositeBasis,
    ConcatDictionary,
    Dictionary,
    SLFN,
)
from .geometry import as_points
from .linalg import DEFAULT_RCOND, LsqResult, lstsq
from .operators import (
    BoundarySpec,
    OperatorSpec,
    assemble_block,
    boundary_values,
    loss_param_gradient,
)


def field_values(f, points) -> np.ndarray:
    """Evaluate a field given as a callable, scalar, or per-point array."""
    pts = as_points(points)
    if callable(f):
        vals = f(pts)
    elif f is None:
        vals = 0.0
    else:
        vals = f
    return np.asarray(vals, dtype=np.float64) * np.ones(pts.shape[0])


def assemble_system(
    op: OperatorSpec,
    f,
    boundary: BoundarySpec | None,
    g,
    dictionary: Dictionary,
    x_interior,
    x_boundary=None,
    boundary_normals=None,
    penalty: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Stacked collocation system [L phi; penalty * B phi] and its rhs."""
    if dictionary.size == 0:
        raise ValueError("dictionary must not be empty")
    pts = as_points(x_interior)
    if pts.shape[0] == 0:
        raise ValueError("interior point set must not be empty")
    top = assemble_block(op, dictionary, pts)
    rhs_top = field_values(f, pts)
    if boundary is None:
        return top, rhs_top
    bpts = as_points(x_boundary)
    if bpts.shape[0] == 0:
        raise ValueError("boundary point set must not be empty")
    bottom = assemble_block(boundary, dictionary, bpts, scale=penalty, normals=boundary_normals)
    rhs_bottom = penalty * boundary_values(boundary, g, bpts)
    a = np.empty((top.shape[0] + bottom.shape[0], dictionary.size))
    a[: top.shape[0]] = top
    a[top.shape[0]:] = bottom
    return a, np.concatenate([rhs_top, rhs_bottom])


def collo_lsq(
    op: OperatorSpec,
    f,
    boundary: BoundarySpec | None,
    g,
    dictionary: Dictionary,
    x_interior,
    x_boundary=None,
    boundary_normals=None,
    penalty: float = 1.0,
    rcond: float = DEFAULT_RCOND,
) -> LsqResult:
    """Least-squares coefficients of the dictionary for (L, f) + (B, g)."""
    a, rhs = assemble_system(
        op, f, boundary, g, dictionary, x_interior, x_boundary, boundary_normals, penalty
    )
    return lstsq(a, rhs, rcond=rcond)


def loss_value(
    op: OperatorSpec,
    boundary: BoundarySpec | None,
    fn: BasisFunction,
    x_interior,
    x_boundary,
    boundary_normals,
    interior_target,
    boundary_target,
    penalty: float,
) -> float:
    """sum_X |L fn - f|^2 + penalty^2 sum_Xb |B fn - g|^2 (raw sums)."""
    pts = as_points(x_interior)
    r = fn.apply_terms(op.terms(pts), pts) - field_values(interior_target, pts)
    total = float(r @ r)
    if boundary is not None:
        bpts = as_points(x_boundary)
        rows = boundary.row_terms(bpts, boundary_normals)
        rpp = boundary.rows_per_point
        target = (
            np.zeros(rpp * bpts.shape[0])
            if boundary_target is None
            else np.asarray(boundary_target, dtype=np.float64)
        )
        for i, row in enumerate(rows):
            rb = fn.apply_terms(row, bpts) - target[i::rpp]
            total += penalty**2 * float(rb @ rb)
    return total


@dataclass
class AdamState:
    """Adam moments aligned with a flat parameter vector."""

    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, n: int, **kwargs) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), **kwargs)


def adam_step(
    state: AdamState, theta: np.ndarray, grad: np.ndarray, learning_rate: float
) -> tuple[AdamState, np.ndarray]:
    """One bias-corrected Adam update; returns the new state and parameters."""
    if theta.shape != grad.shape or theta.shape != state.first_moment.shape:
        raise ValueError("theta, gradient, and moments must be aligned")
    t = state.step_count + 1
    m = state.beta1 * state.first_moment + (1.0 - state.beta1) * grad
    v = state.beta2 * state.second_moment + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_theta = theta - learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = AdamState(m, v, t, state.beta1, state.beta2, state.eps)
    return new_state, new_theta


@dataclass
class TrainConfig:
    penalty: float
    n_opt: int
    learning_rate: float
    rcond: float = DEFAULT_RCOND

    def __post_init__(self):
        if self.penalty <= 0:
            raise ValueError("penalty must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")


@dataclass
class TrainedBasis:
    basis: CompositeBasis
    slfn: SLFN
    extra_coefficients: np.ndarray
    lsq: LsqResult
    first_lsq: LsqResult


def _split_solution(sol: np.ndarray, width: int) -> tuple[np.ndarray, np.ndarray]:
    return sol[:width].copy(), sol[width:].copy()


def _pack(slfn: SLFN) -> np.ndarray:
    return np.concatenate([slfn.weights.ravel(), slfn.biases, slfn.coefficients])


def _unpack(theta: np.ndarray, slfn: SLFN) -> SLFN:
    n, d = slfn.weights.shape
    return SLFN(
        theta[: n * d].reshape(n, d).copy(),
        theta[n * d: n * d + n].copy(),
        theta[n * d + n:].copy(),
        slfn.activation,
    )


def adaptive_basis_training(
    op: OperatorSpec,
    boundary: BoundarySpec | None,
    interior_target,
    boundary_target,
    slfn: SLFN,
    x_interior,
    x_boundary,
    boundary_normals,
    config: TrainConfig,
    extras: Dictionary | None = None,
) -> TrainedBasis:
    """Train one stage basis on the residual equation.

    (1) solve output coefficients over the hidden dictionary (plus any
    frozen extra members, e.g. knowledge-based columns), (2) take
    ``n_opt`` Adam steps on the full hidden parameters theta = (W, b, c)
    with the extras' contribution held fixed, (3) resolve the output
    coefficients. With n_opt = 0 this is exactly a single least-squares
    fit.
    """
    pts = as_points(x_interior, slfn.dim)
    f_res = field_values(interior_target, pts)
    bpts = as_points(x_boundary, slfn.dim) if boundary is not None else None
    g_res = None
    if boundary is not None:
        g_res = (
            np.asarray(boundary_target, dtype=np.float64)
            if boundary_target is not None
            else np.zeros(boundary.rows_per_point * bpts.shape[0])
        )

    def dictionary_for(net: SLFN) -> Dictionary:
        if extras is None or extras.size == 0:
            return net.dictionary()
        return ConcatDictionary([net.dictionary(), extras])

    fit = collo_lsq(
        op, f_res, boundary, g_res, dictionary_for(slfn),
        pts, bpts, boundary_normals, config.penalty, config.rcond,
    )
    first_fit = fit
    c_net, c_extra = _split_solution(fit.solution, slfn.width)
    slfn = SLFN(slfn.weights.copy(), slfn.biases.copy(), c_net, slfn.activation)

    if config.n_opt > 0:
        interior_offset = None
        boundary_offset = None
        if extras is not None and extras.size > 0 and c_extra.size:
            interior_offset = extras.apply_terms(op.terms(pts), pts, c_extra)
            if boundary is not None:
                rows = boundary.row_terms(bpts, boundary_normals)
                rpp = boundary.rows_per_point
                boundary_offset = np.zeros(rpp * bpts.shape[0])
                for r, row in enumerate(rows):
                    boundary_offset[r::rpp] = extras.apply_terms(row, bpts, c_extra)

        theta = _pack(slfn)
        state = AdamState.zeros(theta.size)
        for _ in range(config.n_opt):
            grad = loss_param_gradient(
                op, boundary, slfn, pts, bpts, boundary_normals,
                f_res, g_res, config.penalty, interior_offset, boundary_offset,
            )
            state, theta = adam_step(state, theta, grad.flat(), config.learning_rate)
            slfn = _unpack(theta, slfn)

        fit = collo_lsq(
            op, f_res, boundary, g_res, dictionary_for(slfn),
            pts, bpts, boundary_normals, config.penalty, config.rcond,
        )
        c_net, c_extra = _split_solution(fit.solution, slfn.width)
        slfn = SLFN(slfn.weights, slfn.biases, c_net, slfn.activation)

    basis = CompositeBasis(dictionary_for(slfn), np.concatenate([c_net, c_extra]))
    return TrainedBasis(basis, slfn, c_extra, fit, first_fit)
