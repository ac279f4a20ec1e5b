"""Differential and boundary operators.

Each operator reduces to a term list ``[(alpha, coeff(x)), ...]`` meaning
``sum coeff(x) * d^alpha u(x)``; boundary operators produce one such list
per condition row (Robin-type pairs emit two rows per boundary point).
That representation drives pointwise application, system-block assembly,
and the analytic gradients of the training loss with respect to hidden
parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .activation import MAX_ORDER, tanh_derivative_from_t
from .basis import (
    BasisFunction,
    Dictionary,
    SLFN,
    Term,
    _CHUNK_ENTRIES,
    _term_coeff_rows,
    as_points,
)
from .linalg import as_matrix

TWO_PI = 2.0 * math.pi


class OperatorSpec:
    """Interior differential operator."""

    required_order: int

    def terms(self, points: np.ndarray) -> list[Term]:
        raise NotImplementedError


class Identity(OperatorSpec):
    required_order = 0

    def terms(self, points):
        d = as_points(points).shape[1]
        return [((0,) * d, 1.0)]


class AdvectionDiffusion(OperatorSpec):
    """-eps u'' + drift u' in one dimension."""

    required_order = 2

    def __init__(self, eps: float, drift: float):
        self.eps = float(eps)
        self.drift = float(drift)

    def terms(self, points):
        as_points(points, 1)
        return [((2,), -self.eps), ((1,), self.drift)]


class NegLaplacian(OperatorSpec):
    required_order = 2

    def terms(self, points):
        d = as_points(points).shape[1]
        out: list[Term] = []
        for k in range(d):
            alpha = [0] * d
            alpha[k] = 2
            out.append((tuple(alpha), -1.0))
        return out


class Laplacian(OperatorSpec):
    required_order = 2

    def terms(self, points):
        return [(a, -c) for a, c in NegLaplacian().terms(points)]


class Biharmonic(OperatorSpec):
    """Delta^2 u in two dimensions."""

    required_order = 4

    def terms(self, points):
        as_points(points, 2)
        return [((4, 0), 1.0), ((2, 2), 2.0), ((0, 4), 1.0)]


class RadialPointLoad(OperatorSpec):
    """2 pi r d/dr(Delta u): the point-load equation away from the origin.

    The radial derivative is expanded in Cartesian partials,
    2 pi [x (u_xxx + u_xyy) + y (u_xxy + u_yyy)], so rows are plain
    pointwise collocation rows like any other operator.
    """

    required_order = 3

    def terms(self, points):
        pts = as_points(points, 2)
        x, y = TWO_PI * pts[:, 0], TWO_PI * pts[:, 1]
        return [((3, 0), x), ((1, 2), x), ((2, 1), y), ((0, 3), y)]


class LinearizedAC(OperatorSpec):
    """eps^2 Delta u - stab eps^2 u: the stabilized linearization."""

    required_order = 2

    def __init__(self, eps: float, stab: float):
        self.eps = float(eps)
        self.stab = float(stab)

    def terms(self, points):
        as_points(points, 2)
        e2 = self.eps**2
        return [((2, 0), e2), ((0, 2), e2), ((0, 0), -self.stab * e2)]


def _grad_terms(d: int, normals: np.ndarray) -> list[Term]:
    out: list[Term] = []
    for k in range(d):
        alpha = [0] * d
        alpha[k] = 1
        out.append((tuple(alpha), normals[:, k].copy()))
    return out


def _normal_grad_laplacian_terms(normals: np.ndarray, scale: float) -> list[Term]:
    # n . grad(Delta u) through third-order Cartesian partials (2-d)
    nx, ny = normals[:, 0], normals[:, 1]
    return [
        ((3, 0), scale * nx), ((1, 2), scale * nx),
        ((2, 1), scale * ny), ((0, 3), scale * ny),
    ]


class BoundarySpec:
    rows_per_point: int = 1
    required_order: int = 0

    def row_terms(self, points: np.ndarray, normals: np.ndarray | None) -> list[list[Term]]:
        raise NotImplementedError


class Dirichlet(BoundarySpec):
    rows_per_point = 1
    required_order = 0

    def row_terms(self, points, normals):
        d = as_points(points).shape[1]
        return [[((0,) * d, 1.0)]]


class Neumann(BoundarySpec):
    rows_per_point = 1
    required_order = 1

    def row_terms(self, points, normals):
        pts = as_points(points)
        if normals is None:
            raise ValueError("Neumann rows need outward normals")
        return [_grad_terms(pts.shape[1], np.asarray(normals, dtype=np.float64))]


class DirichletAndNormal(BoundarySpec):
    """u and du/dn enforced as two consecutive rows per point."""

    rows_per_point = 2
    required_order = 1

    def row_terms(self, points, normals):
        return Dirichlet().row_terms(points, normals) + Neumann().row_terms(points, normals)


class RobinPair(BoundarySpec):
    """u - eps1 d/dn(Delta u) and Delta u + eps2 du/dn, two rows per point."""

    rows_per_point = 2
    required_order = 3

    def __init__(self, eps1: float, eps2: float):
        self.eps1 = float(eps1)
        self.eps2 = float(eps2)

    def row_terms(self, points, normals):
        pts = as_points(points, 2)
        if normals is None:
            raise ValueError("Robin rows need outward normals")
        nrm = np.asarray(normals, dtype=np.float64)
        row1: list[Term] = [((0, 0), 1.0)]
        row1 += _normal_grad_laplacian_terms(nrm, -self.eps1)
        row2: list[Term] = [((2, 0), 1.0), ((0, 2), 1.0)]
        row2 += [(a, self.eps2 * c) for a, c in _grad_terms(2, nrm)]
        return [row1, row2]


def apply_operator(op: OperatorSpec, fn: BasisFunction, points) -> np.ndarray:
    """Operator applied to one basis function, per point."""
    pts = as_points(points)
    return fn.apply_terms(op.terms(pts), pts)


def assemble_block(
    spec: OperatorSpec | BoundarySpec,
    dictionary: Dictionary,
    points,
    scale: float = 1.0,
    normals: np.ndarray | None = None,
) -> np.ndarray:
    """System block: entry (m, n) = scale * (spec applied to phi_n at x_m).

    Boundary specs with two conditions interleave them as consecutive
    rows, each multiplied by the same scale.
    """
    pts = as_points(points)
    if isinstance(spec, OperatorSpec):
        block = dictionary.operator_block(spec.terms(pts), pts)
        if scale != 1.0:
            block = block * scale
        return block
    rows = spec.row_terms(pts, normals)
    out = np.empty((spec.rows_per_point * pts.shape[0], dictionary.size))
    for r, terms in enumerate(rows):
        sub = dictionary.operator_block(terms, pts)
        if scale != 1.0:
            sub = sub * scale
        out[r::spec.rows_per_point] = sub
    return as_matrix(out)


def boundary_values(spec: BoundarySpec, data, points) -> np.ndarray:
    """Boundary data stacked to match assemble_block row interleaving.

    ``data`` may be None (homogeneous), a scalar, a callable, or a tuple
    with one entry per condition row.
    """
    pts = as_points(points)
    m = pts.shape[0]
    rows = spec.rows_per_point
    out = np.zeros(rows * m)
    if data is None:
        return out
    if isinstance(data, np.ndarray) and data.ndim == 1 and data.shape[0] == rows * m:
        # already interleaved to match the assembled rows
        return data.astype(np.float64, copy=False)
    parts = data if isinstance(data, (tuple, list)) else (data,) * rows
    if len(parts) != rows:
        raise ValueError(f"expected {rows} boundary data entries, got {len(parts)}")
    for r, g in enumerate(parts):
        if g is None:
            continue
        vals = g(pts) if callable(g) else g
        out[r::rows] = np.asarray(vals, dtype=np.float64) * np.ones(m)
    return out


@dataclass
class ParamGradient:
    weights: np.ndarray
    biases: np.ndarray
    coefficients: np.ndarray

    def flat(self) -> np.ndarray:
        return np.concatenate([self.weights.ravel(), self.biases, self.coefficients])


def _accumulate_network_gradient(
    slfn: SLFN,
    terms: Sequence[Term],
    points: np.ndarray,
    rho: np.ndarray,
    grad: ParamGradient,
) -> None:
    """grad += sum_m rho_m * d/dtheta [ (terms applied to slfn)(x_m) ].

    Uses d/db sigma^{(n)}(z) = sigma^{(n+1)}(z) and the product rule on
    the weight powers, so it needs activation orders up to
    max|alpha| + 1.
    """
    w, b, c = slfn.weights, slfn.biases, slfn.coefficients
    n_neurons, d = w.shape
    top = max(sum(a) for a, _ in terms)
    if top + 1 > MAX_ORDER:
        raise ValueError(
            f"parameter gradient needs activation order {top + 1} > {MAX_ORDER}"
        )
    orders = sorted({s for a, _ in terms for s in (sum(a), sum(a) + 1)})

    def wpow(alpha) -> np.ndarray:
        return np.prod(w ** np.asarray(alpha, dtype=np.float64), axis=1)

    # scalar-coefficient terms share the point contractions y0/y1/yk per
    # derivative order (the coefficient moves onto the weight powers);
    # per-point coefficients need their own weighted contractions
    scalar_terms = [(a, cf, wpow(a)) for a, cf in terms if np.isscalar(cf)]
    point_terms = [
        (a, np.asarray(cf, dtype=np.float64), wpow(a)) for a, cf in terms if not np.isscalar(cf)
    ]

    rows = max(1, _CHUNK_ENTRIES // max(n_neurons, 1))
    m_total = points.shape[0]
    for lo in range(0, m_total, rows):
        sl = slice(lo, min(lo + rows, m_total))
        pts = points[sl]
        t = np.tanh(pts @ w.T + b)
        tabs = {n: tanh_derivative_from_t(n, t) for n in orders}

        contractions: dict[int, tuple] = {}

        def contract(n: int, r: np.ndarray):
            y0 = tabs[n].T @ r
            y1 = tabs[n + 1].T @ r
            yk = [tabs[n + 1].T @ (r * pts[:, k]) for k in range(d)]
            return y0, y1, yk

        def add_term(alpha, coeff, wa, y0, y1, yk):
            grad.coefficients += coeff * wa * y0
            grad.biases += coeff * c * wa * y1
            for k in range(d):
                grad.weights[:, k] += coeff * c * wa * yk[k]
                if alpha[k] > 0:
                    am = list(alpha)
                    am[k] -= 1
                    grad.weights[:, k] += coeff * c * alpha[k] * wpow(am) * y0

        for alpha, coeff, wa in scalar_terms:
            n_ord = sum(alpha)
            if n_ord not in contractions:
                contractions[n_ord] = contract(n_ord, rho[sl])
            add_term(alpha, coeff, wa, *contractions[n_ord])
        for alpha, coeff, wa in point_terms:
            n_ord = sum(alpha)
            y0, y1, yk = contract(n_ord, rho[sl] * coeff[sl])
            add_term(alpha, 1.0, wa, y0, y1, yk)


def loss_param_gradient(
    op: OperatorSpec,
    boundary: BoundarySpec | None,
    slfn: SLFN,
    x_interior,
    x_boundary,
    boundary_normals,
    interior_target: np.ndarray,
    boundary_target: np.ndarray | None,
    penalty: float,
    interior_offset: np.ndarray | None = None,
    boundary_offset: np.ndarray | None = None,
) -> ParamGradient:
    """Exact gradient of the squared-residual training loss over (W, b, c).

    The loss is sum_X |L psi - f|^2 + penalty^2 sum_Xb |B psi - g|^2 with
    raw (unnormalized) sums; targets are the residual data at the given
    points, boundary targets interleaved like the assembled rows. The
    optional offsets hold contributions of frozen extra dictionary
    members so their columns stay out of the optimized parameters.
    """
    pts = as_points(x_interior, slfn.dim)
    terms = op.terms(pts)
    grad = ParamGradient(
        np.zeros_like(slfn.weights),
        np.zeros_like(slfn.biases),
        np.zeros_like(slfn.coefficients),
    )
    dictionary = slfn.dictionary()
    vals = dictionary.apply_terms(terms, pts, slfn.coefficients)
    if interior_offset is not None:
        vals = vals + interior_offset
    rho = 2.0 * (vals - np.asarray(interior_target, dtype=np.float64))
    _accumulate_network_gradient(slfn, terms, pts, rho, grad)

    if boundary is not None:
        bpts = as_points(x_boundary, slfn.dim)
        rows = boundary.row_terms(bpts, boundary_normals)
        rpp = boundary.rows_per_point
        target = np.zeros(rpp * bpts.shape[0]) if boundary_target is None else np.asarray(
            boundary_target, dtype=np.float64
        )
        w2 = 2.0 * penalty**2
        for r, row in enumerate(rows):
            bvals = dictionary.apply_terms(row, bpts, slfn.coefficients)
            if boundary_offset is not None:
                bvals = bvals + boundary_offset[r::rpp]
            rho_b = w2 * (bvals - target[r::rpp])
            _accumulate_network_gradient(slfn, row, bpts, rho_b, grad)
    return grad
