"""The stagewise adaptive solver.

Each stage draws residual-guided collocation points, initializes and
trains one new basis function on the residual equation, re-solves the
combination coefficients in the augmented span against the original
data, and reports the stage improvement norm |||u_s - u_{s-1}|||, which
acts as the computable a-posteriori error estimator.

Norms and errors are measured on fixed validation grids disjoint from
the training points, with per-member operator values cached per grid so
a stage only ever evaluates its own new member.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .basis import (
    BasisFunction,
    BasisSet,
    CompositeBasis,
    CornerSingularBasis,
    MemberDictionary,
    SLFN,
    adaptive_init,
    make_localized_basis,
)
from .geometry import Domain, as_points, child_rng, rejection_sample
from .linalg import DEFAULT_RCOND, LsqResult
from .metrics import error_pair_from_values, evaluation_grid
from .operators import BoundarySpec, OperatorSpec, boundary_values
from .training import TrainConfig, adaptive_basis_training, collo_lsq, field_values

VALIDATION_POINTS_1D = 1000
VALIDATION_PER_AXIS_2D = 101
VALIDATION_BOUNDARY_2D = 400
# boundary validation offset chosen so points never coincide with the
# half-offset (polygon) or zero-offset (disk) training boundary points
VALIDATION_BOUNDARY_OFFSET = 0.37

_RNG_COLLOCATION = 0
_RNG_INIT = 1
_RNG_LOCALIZED = 2


@dataclass
class SolverConfig:
    """Stage-loop parameters.

    Widths follow N_s = width_stage1 * 2^(s-1) unless an explicit
    ``widths`` sequence overrides them; hidden-weight scales follow
    R_s = weight_scale_slope * s + weight_scale_intercept.
    """

    stages: int
    width_stage1: int
    weight_scale_slope: float
    weight_scale_intercept: float
    m_interior_uniform: int
    m_interior_adaptive: int
    m_boundary: int
    penalty: float
    n_opt: int
    learning_rate: float
    rcond: float = DEFAULT_RCOND
    seed: int = 0
    candidate_per_dim: int = 1000
    localized_stages: int = 0
    localized_width: int = 0
    localized_shape_scale: float = 0.0
    knowledge_neurons: bool = False
    n_knowledge: int = 20
    ac_iter_slope: int = 1
    ac_iter_offset: int = 1
    estimator_tolerance: float = 0.0
    widths: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.stages < 0:
            raise ValueError("stage count must be >= 0")
        if self.penalty <= 0:
            raise ValueError("penalty must be positive")
        if self.localized_stages and self.localized_width < 1:
            raise ValueError("localized phase needs a positive width")

    @property
    def slfn_stages(self) -> int:
        """Stages trained as networks before any localized refinement phase."""
        return self.stages - self.localized_stages

    def width_for(self, stage: int) -> int:
        if self.widths is not None:
            return int(self.widths[stage - 1])
        return int(self.width_stage1) << (stage - 1)

    def weight_scale_for(self, stage: int) -> float:
        return self.weight_scale_slope * stage + self.weight_scale_intercept

    def ac_iterations_for(self, stage: int) -> int:
        return max(1, int(self.ac_iter_slope * stage + self.ac_iter_offset))


@dataclass(frozen=True)
class IterationReport:
    iteration: int
    interior_residual: float
    boundary_residual: float


@dataclass(frozen=True)
class StageReport:
    stage: int
    width: int
    estimator: float
    residual_interior: float
    residual_boundary: float
    e_linf: float | None
    e_l2: float | None
    wall_ms: float
    effective_rank: int
    max_singular_value: float
    min_kept_singular_value: float
    outer_residual_norm: float
    true_error_norm: float
    coefficients: tuple[float, ...]
    iterations: tuple[IterationReport, ...] = ()


@dataclass
class SolveResult:
    reports: list[StageReport]
    basis: BasisSet
    initial_error_norm: float
    config: SolverConfig


def _callable_basis_values(v, terms, points):
    for alpha, _ in terms:
        if sum(alpha) > 0:
            raise TypeError("plain callables only support order-zero operators")
    vals = np.asarray(v(points), dtype=np.float64)
    out = np.zeros(points.shape[0])
    for _, coeff in terms:
        out += np.asarray(coeff) * vals
    return out


def triple_norm(
    v,
    problem,
    grid_interior,
    grid_boundary=None,
    boundary_normals=None,
    penalty: float = 1.0,
) -> float:
    """Discrete |||v||| = sqrt(||L v||^2_{L2(O)} + penalty^2 ||B v||^2_{L2(dO)}).

    ``v`` may be a basis function/set or, for order-zero operators, a
    plain callable. Quadrature is the plain grid average scaled by the
    domain (resp. boundary) measure.
    """
    pts = as_points(grid_interior)
    terms = problem.operator.terms(pts)
    if isinstance(v, BasisFunction):
        vals = v.apply_terms(terms, pts)
    else:
        vals = _callable_basis_values(v, terms, pts)
    total = problem.domain.measure / pts.shape[0] * float(vals @ vals)
    if problem.boundary is not None and grid_boundary is not None:
        bpts = as_points(grid_boundary)
        w = problem.domain.boundary_measure / bpts.shape[0]
        for row in problem.boundary.row_terms(bpts, boundary_normals):
            if isinstance(v, BasisFunction):
                bv = v.apply_terms(row, bpts)
            else:
                bv = _callable_basis_values(v, row, bpts)
            total += penalty**2 * w * float(bv @ bv)
    return float(np.sqrt(total))


class _RegionCache:
    """Per-member columns of operator values on one fixed point set."""

    def __init__(self, n_rows: int):
        self.n_rows = n_rows
        self.cols: list[np.ndarray] = []

    def add(self, col: np.ndarray) -> None:
        col = np.asarray(col, dtype=np.float64).reshape(-1)
        if col.shape[0] != self.n_rows:
            raise ValueError("cache column has the wrong length")
        self.cols.append(col)

    def combine(self, coef: np.ndarray) -> np.ndarray:
        if not self.cols:
            return np.zeros(self.n_rows)
        out = np.zeros(self.n_rows)
        for c, col in zip(np.asarray(coef, dtype=np.float64), self.cols):
            if c != 0.0:
                out += c * col
        return out


class _Workspace:
    """Fixed grids, data values, and per-member caches for one solve."""

    def __init__(self, problem, config: SolverConfig, cache_values: bool = False):
        self.problem = problem
        self.config = config
        domain: Domain = problem.domain
        self.domain = domain
        self.op: OperatorSpec = problem.operator
        self.bnd: BoundarySpec | None = problem.boundary

        self.x1 = domain.uniform_interior(config.m_interior_uniform)
        self.xb = self.nb = None
        if self.bnd is not None:
            self.xb, self.nb = domain.boundary_points(config.m_boundary)
        self.cand = domain.candidate_grid(config.candidate_per_dim)

        if domain.dim == 1:
            self.val_i = domain.interior_grid(VALIDATION_POINTS_1D)
            self.val_b = self.val_nb = None
            if self.bnd is not None:
                self.val_b, self.val_nb = domain.boundary_points(2)
        else:
            self.val_i = domain.interior_grid(VALIDATION_PER_AXIS_2D)
            self.val_b = self.val_nb = None
            if self.bnd is not None:
                self.val_b, self.val_nb = domain.boundary_points(
                    VALIDATION_BOUNDARY_2D, offset=VALIDATION_BOUNDARY_OFFSET
                )

        self.err_pts = evaluation_grid(domain, problem.error_grid)
        self.exact_err = None
        if problem.exact is not None:
            self.exact_err = np.asarray(problem.exact(self.err_pts), dtype=np.float64)

        self.f_x1 = field_values(problem.source, self.x1)
        self.f_cand = field_values(problem.source, self.cand)
        self.f_val = field_values(problem.source, self.val_i)
        self.g_b = self.g_val = None
        self.rpp = 0
        if self.bnd is not None:
            self.rpp = self.bnd.rows_per_point
            self.g_b = boundary_values(self.bnd, problem.boundary_data, self.xb)
            self.g_val = boundary_values(self.bnd, problem.boundary_data, self.val_b)

        self.cache_values = cache_values
        self.members: list[BasisFunction] = []
        self.L_x1 = _RegionCache(self.x1.shape[0])
        self.L_cand = _RegionCache(self.cand.shape[0])
        self.L_val = _RegionCache(self.val_i.shape[0])
        self.err_vals = _RegionCache(self.err_pts.shape[0])
        self.B_xb = _RegionCache(self.rpp * self.xb.shape[0]) if self.bnd is not None else None
        self.B_val = _RegionCache(self.rpp * self.val_b.shape[0]) if self.bnd is not None else None
        self.v_x1 = _RegionCache(self.x1.shape[0]) if cache_values else None
        self.v_cand = _RegionCache(self.cand.shape[0]) if cache_values else None
        self.v_val = _RegionCache(self.val_i.shape[0]) if cache_values else None

    def operator_values(self, fn: BasisFunction, points) -> np.ndarray:
        return fn.apply_terms(self.op.terms(points), points)

    def boundary_rows(self, fn: BasisFunction, points, normals) -> np.ndarray:
        rows = self.bnd.row_terms(points, normals)
        out = np.empty(self.rpp * as_points(points).shape[0])
        for r, row in enumerate(rows):
            out[r::self.rpp] = fn.apply_terms(row, points)
        return out

    def add_member(self, fn: BasisFunction) -> None:
        self.members.append(fn)
        self.L_x1.add(self.operator_values(fn, self.x1))
        self.L_cand.add(self.operator_values(fn, self.cand))
        self.L_val.add(self.operator_values(fn, self.val_i))
        self.err_vals.add(fn.value(self.err_pts))
        if self.bnd is not None:
            self.B_xb.add(self.boundary_rows(fn, self.xb, self.nb))
            self.B_val.add(self.boundary_rows(fn, self.val_b, self.val_nb))
        if self.cache_values:
            self.v_x1.add(fn.value(self.x1))
            self.v_cand.add(fn.value(self.cand))
            self.v_val.add(fn.value(self.val_i))

    def grid_norm(self, interior_vals, boundary_vals) -> float:
        total = self.domain.measure / interior_vals.shape[0] * float(interior_vals @ interior_vals)
        if boundary_vals is not None:
            w = self.domain.boundary_measure / self.val_b.shape[0]
            total += self.config.penalty**2 * w * float(boundary_vals @ boundary_vals)
        return float(np.sqrt(total))

    def residual_norms(self, beta: np.ndarray, f_interior=None, g_boundary=None) -> tuple[float, float]:
        """Validation-grid L2 norms of (f - L u, g - B u) for u = members @ beta."""
        fi = self.f_val if f_interior is None else f_interior
        ri = fi - self.L_val.combine(beta)
        interior = float(
            np.sqrt(self.domain.measure / ri.shape[0] * float(ri @ ri))
        )
        boundary = 0.0
        if self.bnd is not None:
            gb = self.g_val if g_boundary is None else g_boundary
            rb = gb - self.B_val.combine(beta)
            boundary = float(
                np.sqrt(self.domain.boundary_measure / self.val_b.shape[0] * float(rb @ rb))
            )
        return interior, boundary

    def combined_norm(self, interior: float, boundary: float) -> float:
        return float(np.sqrt(interior**2 + self.config.penalty**2 * boundary**2))

    def estimator(self, new_beta: np.ndarray, old_beta: np.ndarray) -> float:
        delta = new_beta.copy()
        delta[: old_beta.shape[0]] -= old_beta
        vi = self.L_val.combine(delta)
        vb = self.B_val.combine(delta) if self.bnd is not None else None
        return self.grid_norm(vi, vb)

    def error_pair(self, beta: np.ndarray):
        if self.exact_err is None:
            return None, None
        approx = self.err_vals.combine(beta)
        pair = error_pair_from_values(
            self.exact_err, approx, self.domain, self.problem.error_grid, self.err_pts
        )
        return pair.e_linf, pair.e_l2


def _knowledge_extras(config: SolverConfig):
    if not config.knowledge_neurons:
        return None
    return MemberDictionary(
        [CornerSingularBasis(i) for i in range(1, config.n_knowledge + 1)]
    )


def _initial_members(problem, ws: _Workspace) -> np.ndarray:
    if problem.initial_guess is not None:
        ws.add_member(problem.initial_guess)
        return np.array([1.0])
    return np.zeros(0)


def _stage_points(ws: _Workspace, density_vals: np.ndarray, rng) -> tuple[np.ndarray, np.ndarray]:
    draw = rejection_sample(
        density_vals, ws.domain, ws.config.m_interior_adaptive, ws.cand, rng
    )
    return draw.points, np.vstack([ws.x1, draw.points])


def solve(problem, config: SolverConfig) -> SolveResult:
    """Run the stage loop on a linear problem (Algorithm: see module doc)."""
    if getattr(problem, "nonlinear_source", None) is not None:
        raise ValueError("use solve_nonlinear_ac for fixed-point problems")
    ws = _Workspace(problem, config)
    beta = _initial_members(problem, ws)
    extras = _knowledge_extras(config)

    ri0, rb0 = ws.residual_norms(beta)
    initial_error_norm = ws.combined_norm(ri0, rb0)
    reports: list[StageReport] = []

    for s in range(1, config.stages + 1):
        t0 = time.perf_counter()
        density = ws.f_cand - ws.L_cand.combine(beta)
        x2, x = _stage_points(ws, density, child_rng(config.seed, s, _RNG_COLLOCATION))

        f_res_x1 = ws.f_x1 - ws.L_x1.combine(beta)
        u_prev = BasisSet(ws.members, beta)
        f_res_x2 = field_values(problem.source, x2)
        if ws.members:
            f_res_x2 = f_res_x2 - ws.operator_values(u_prev, x2)
        f_res = np.concatenate([f_res_x1, f_res_x2])
        g_res = None
        if ws.bnd is not None:
            g_res = ws.g_b - ws.B_xb.combine(beta)

        localized = config.localized_stages > 0 and s > config.slfn_stages
        if localized:
            rng_loc = child_rng(config.seed, s, _RNG_LOCALIZED)
            centers = rejection_sample(
                density, ws.domain, config.localized_width, ws.cand, rng_loc
            ).points
            family = make_localized_basis(
                u_prev, centers, config.localized_shape_scale, rng_loc
            )
            fit = collo_lsq(
                ws.op, f_res, ws.bnd, g_res, family, x, ws.xb, ws.nb,
                config.penalty, config.rcond,
            )
            psi: BasisFunction = CompositeBasis(family, fit.solution)
            width = family.size
        else:
            width = config.width_for(s)
            init = adaptive_init(
                density, width, config.weight_scale_for(s), ws.domain,
                child_rng(config.seed, s, _RNG_INIT), ws.cand,
            )
            slfn = SLFN(init.weights, init.biases, np.zeros(width))
            trained = adaptive_basis_training(
                ws.op, ws.bnd, f_res, g_res, slfn, x, ws.xb, ws.nb,
                TrainConfig(config.penalty, config.n_opt, config.learning_rate, config.rcond),
                extras,
            )
            psi = trained.basis

        ws.add_member(psi)
        outer = collo_lsq(
            ws.op,
            np.concatenate([ws.f_x1, field_values(problem.source, x2)]),
            ws.bnd,
            ws.g_b,
            MemberDictionary(ws.members),
            x, ws.xb, ws.nb, config.penalty, config.rcond,
        )
        new_beta = outer.solution

        est = ws.estimator(new_beta, beta)
        ri, rb = ws.residual_norms(new_beta)
        e_linf, e_l2 = ws.error_pair(new_beta)
        beta = new_beta
        reports.append(
            StageReport(
                stage=s,
                width=width,
                estimator=est,
                residual_interior=ri,
                residual_boundary=rb,
                e_linf=e_linf,
                e_l2=e_l2,
                wall_ms=(time.perf_counter() - t0) * 1e3,
                effective_rank=outer.effective_rank,
                max_singular_value=outer.max_singular_value,
                min_kept_singular_value=outer.min_kept_singular_value,
                outer_residual_norm=outer.residual_norm,
                true_error_norm=ws.combined_norm(ri, rb),
                coefficients=tuple(float(v) for v in beta),
            )
        )
        if config.estimator_tolerance > 0 and est < config.estimator_tolerance:
            break

    return SolveResult(reports, BasisSet(ws.members, beta), initial_error_norm, config)


def solve_nonlinear_ac(problem, config: SolverConfig) -> SolveResult:
    """Fixed-point stage procedure for the semilinear (Allen-Cahn type) problem.

    Per stage s, the iteration re-linearizes around the running iterate:
    solve in the old span with source f(u~), train the stage candidate on
    the resulting residual pair, re-solve in the augmented span, repeat
    I_s times, then commit the last candidate. The candidate is
    adaptively initialized once per stage and warm-started across
    iterations. Divergence (a 10x jump of the fixed-point interior
    residual between consecutive iterations) aborts with diagnostics.
    """
    f_of_u = getattr(problem, "nonlinear_source", None)
    if f_of_u is None:
        raise ValueError("problem does not define a fixed-point source")
    ws = _Workspace(problem, config, cache_values=True)
    beta = _initial_members(problem, ws)
    if beta.size == 0:
        raise ValueError("the fixed-point solver needs a nonzero initial guess")

    reports: list[StageReport] = []
    train_cfg = TrainConfig(config.penalty, config.n_opt, config.learning_rate, config.rcond)
    ri0, rb0 = _ac_residuals(ws, f_of_u, beta, None)
    initial_error_norm = ws.combined_norm(ri0, rb0)
    prev_resid = ri0
    # divergence guard floor: residuals at rounding level fluctuate by
    # orders of magnitude without meaning anything
    u0_vals = ws.v_val.combine(beta)
    guard_floor = 1e-10 * float(
        np.sqrt(ws.domain.measure / u0_vals.shape[0] * float(u0_vals @ u0_vals)) + 1.0
    )

    for s in range(1, config.stages + 1):
        t0 = time.perf_counter()
        width = config.width_for(s)

        density0 = _ac_candidate_density(ws, f_of_u, beta, None)
        init = adaptive_init(
            density0, width, config.weight_scale_for(s), ws.domain,
            child_rng(config.seed, s, _RNG_INIT), ws.cand,
        )
        slfn = SLFN(init.weights, init.biases, np.zeros(width))
        candidate: BasisFunction | None = None
        beta_aug = beta
        iters: list[IterationReport] = []
        last_fit: LsqResult | None = None

        for i in range(config.ac_iterations_for(s)):
            density = _ac_candidate_density(ws, f_of_u, beta_aug, candidate)
            x2, x = _stage_points(
                ws, density, child_rng(config.seed, s, _RNG_COLLOCATION, i)
            )

            u_run = _ac_values(ws, beta_aug, candidate, x2)
            f_src = f_of_u(u_run)

            old_dict = MemberDictionary(ws.members)
            prev_fit = collo_lsq(
                ws.op, f_src, ws.bnd, ws.g_b, old_dict, x, ws.xb, ws.nb,
                config.penalty, config.rcond,
            )
            beta_prev = prev_fit.solution
            L_prev = np.concatenate([
                ws.L_x1.combine(beta_prev),
                old_dict.operator_block(ws.op.terms(x2), x2) @ beta_prev,
            ])
            f_res = f_src - L_prev
            g_res = -(ws.B_xb.combine(beta_prev))

            trained = adaptive_basis_training(
                ws.op, ws.bnd, f_res, g_res, slfn, x, ws.xb, ws.nb, train_cfg
            )
            slfn = trained.slfn
            candidate = trained.basis
            last_fit = trained.lsq

            aug = MemberDictionary(ws.members + [candidate])
            aug_fit = collo_lsq(
                ws.op, f_src, ws.bnd, ws.g_b, aug, x, ws.xb, ws.nb,
                config.penalty, config.rcond,
            )
            beta_aug = aug_fit.solution

            ri, rb = _ac_residuals(ws, f_of_u, beta_aug, candidate)
            iters.append(IterationReport(i + 1, ri, rb))
            if ri > 10.0 * max(prev_resid, guard_floor):
                raise RuntimeError(
                    f"fixed-point iteration diverged at stage {s}, iteration {i + 1}: "
                    f"interior residual {ri:.3e} > 10 x {prev_resid:.3e}"
                )
            prev_resid = ri

        ws.add_member(candidate)
        new_beta = beta_aug
        est = ws.estimator(new_beta, beta)
        ri, rb = _ac_residuals(ws, f_of_u, new_beta, None)
        e_linf, e_l2 = ws.error_pair(new_beta)
        beta = new_beta
        reports.append(
            StageReport(
                stage=s,
                width=width,
                estimator=est,
                residual_interior=ri,
                residual_boundary=rb,
                e_linf=e_linf,
                e_l2=e_l2,
                wall_ms=(time.perf_counter() - t0) * 1e3,
                effective_rank=last_fit.effective_rank,
                max_singular_value=last_fit.max_singular_value,
                min_kept_singular_value=last_fit.min_kept_singular_value,
                outer_residual_norm=last_fit.residual_norm,
                true_error_norm=ws.combined_norm(ri, rb),
                coefficients=tuple(float(v) for v in beta),
                iterations=tuple(iters),
            )
        )
        if config.estimator_tolerance > 0 and est < config.estimator_tolerance:
            break

    return SolveResult(reports, BasisSet(ws.members, beta), initial_error_norm, config)


def _ac_values(ws: _Workspace, beta, candidate, x2) -> np.ndarray:
    """Running-iterate values at the stage training points X1 u X2."""
    u1 = ws.v_x1.combine(beta[: len(ws.members)])
    u2 = BasisSet(ws.members, beta[: len(ws.members)]).value(x2)
    if candidate is not None:
        u1 = u1 + beta[-1] * candidate.value(ws.x1)
        u2 = u2 + beta[-1] * candidate.value(x2)
    return np.concatenate([u1, u2])


def _ac_candidate_density(ws: _Workspace, f_of_u, beta, candidate) -> np.ndarray:
    """Fixed-point residual f(u) - L u on the rejection candidate grid."""
    u = ws.v_cand.combine(beta[: len(ws.members)])
    lu = ws.L_cand.combine(beta[: len(ws.members)])
    if candidate is not None:
        u = u + beta[-1] * candidate.value(ws.cand)
        lu = lu + beta[-1] * ws.operator_values(candidate, ws.cand)
    return f_of_u(u) - lu


def _ac_residuals(ws: _Workspace, f_of_u, beta, candidate) -> tuple[float, float]:
    """Validation-grid norms of the fixed-point residual and boundary trace."""
    u = ws.v_val.combine(beta[: len(ws.members)])
    lu = ws.L_val.combine(beta[: len(ws.members)])
    ub = ws.B_val.combine(beta[: len(ws.members)])
    if candidate is not None:
        u = u + beta[-1] * candidate.value(ws.val_i)
        lu = lu + beta[-1] * ws.operator_values(candidate, ws.val_i)
        ub = ub + beta[-1] * ws.boundary_rows(candidate, ws.val_b, ws.val_nb)
    r = f_of_u(u) - lu
    interior = float(np.sqrt(ws.domain.measure / r.shape[0] * float(r @ r)))
    rb = ws.g_val - ub
    boundary = float(
        np.sqrt(ws.domain.boundary_measure / ws.val_b.shape[0] * float(rb @ rb))
    )
    return interior, boundary
