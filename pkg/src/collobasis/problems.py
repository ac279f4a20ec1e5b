"""Benchmark problems with exact solutions and compiled-in run parameters.

Each preset bundles the PDE (operator, boundary conditions, data), the
domain, the exact solution with hand-coded derivatives where one exists,
and the default solver parameters that reproduce the reference runs.
Constructing a preset runs a consistency self-check of the exact
solution against the equation and boundary data at random points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .basis import BasisFunction, ClosedFormBasis
from .geometry import Box2D, Disk, Domain, Interval, LShape, as_points, child_rng
from .metrics import ErrorPair, error_metrics, evaluation_grid
from .operators import (
    AdvectionDiffusion,
    Biharmonic,
    BoundarySpec,
    Dirichlet,
    DirichletAndNormal,
    Identity,
    LinearizedAC,
    NegLaplacian,
    OperatorSpec,
    RadialPointLoad,
    RobinPair,
)
from .solver import SolverConfig

__all__ = [
    "ProblemSpec",
    "ErrorPair",
    "builtin",
    "preset_names",
    "error_metrics",
    "evaluation_grid",
]

_SELF_CHECK_SEED = 987654321
_SELF_CHECK_POINTS = 100
_SELF_CHECK_TOL = 1e-6


@dataclass
class ProblemSpec:
    name: str
    operator: OperatorSpec
    boundary: BoundarySpec | None
    domain: Domain
    source: Callable | float
    boundary_data: object = None
    exact: Callable | None = None
    params: dict = field(default_factory=dict)
    initial_guess: BasisFunction | None = None
    nonlinear_source: Callable | None = None
    error_grid: str = "uniform"
    default_config: SolverConfig | None = None
    # analytic L(exact) and interleaved boundary rows of exact, used by the
    # construction self-check (tests carry independent symbolic oracles)
    exact_operator_values: Callable | None = None
    exact_boundary_rows: Callable | None = None

    def config(self, **overrides) -> SolverConfig:
        if self.default_config is None:
            raise ValueError(f"problem {self.name!r} has no default configuration")
        return replace(self.default_config, **overrides)

    def self_check(self) -> None:
        """Verify the exact solution against the PDE and boundary data."""
        if self.exact is None or self.exact_operator_values is None:
            return
        rng = child_rng(_SELF_CHECK_SEED)
        pts = _random_interior(self.domain, _SELF_CHECK_POINTS, rng)
        lhs = np.asarray(self.exact_operator_values(pts), dtype=np.float64)
        rhs = np.asarray(self.source(pts) if callable(self.source) else self.source)
        rhs = rhs * np.ones(pts.shape[0])
        scale = np.maximum(1.0, np.abs(rhs))
        worst = float(np.max(np.abs(lhs - rhs) / scale))
        if worst > _SELF_CHECK_TOL:
            raise AssertionError(
                f"{self.name}: exact solution violates the PDE (rel err {worst:.2e})"
            )
        if self.boundary is not None and self.exact_boundary_rows is not None:
            bpts, normals = self.domain.boundary_points(
                max(2, min(50, 2 if self.domain.dim == 1 else 50))
            )
            rows = np.asarray(self.exact_boundary_rows(bpts, normals), dtype=np.float64)
            from .operators import boundary_values

            data = boundary_values(self.boundary, self.boundary_data, bpts)
            worst_b = float(np.max(np.abs(rows - data)))
            if worst_b > _SELF_CHECK_TOL:
                raise AssertionError(
                    f"{self.name}: exact solution violates the boundary data "
                    f"(abs err {worst_b:.2e})"
                )


def _random_interior(domain: Domain, n: int, rng: np.random.Generator) -> np.ndarray:
    box = domain.bounding_box
    out = []
    got = 0
    while got < n:
        draw = rng.uniform(box[:, 0], box[:, 1], size=(4 * n, domain.dim))
        keep = draw[domain.contains(draw)]
        out.append(keep[: n - got])
        got += min(keep.shape[0], n - got)
    return np.vstack(out)


# ---------------------------------------------------------------------------
# presets


def _fitting() -> ProblemSpec:
    def target(points):
        x = as_points(points, 1)[:, 0]
        return (
            np.sin(x)
            + np.sin(3 * np.pi * x) / 3.0
            + np.sin(5 * np.pi * x) / 5.0
            + np.sin(7 * np.pi * x) / 7.0
        )

    return ProblemSpec(
        name="function_fitting",
        operator=Identity(),
        boundary=None,
        domain=Interval(-1.0, 1.0),
        source=target,
        exact=target,
        exact_operator_values=target,
        params={"penalty_unused": 1.0},
        default_config=SolverConfig(
            stages=7,
            width_stage1=10,
            weight_scale_slope=3.0,
            weight_scale_intercept=-2.0,
            m_interior_uniform=512,
            m_interior_adaptive=256,
            m_boundary=2,
            penalty=1.0,
            n_opt=10,
            learning_rate=5e-2,
        ),
    )


def _boundary_layer(eps: float = 1e-2, drift: float = -1.0) -> ProblemSpec:
    q = drift / eps
    coth_q = 1.0 / math.tanh(q)
    log_cosh_q = abs(q) + math.log1p(math.exp(-2.0 * abs(q))) - math.log(2.0)

    def layer(x):
        # e^{qx} / cosh(q), evaluated in log space to survive large |q|
        return np.exp(q * x - log_cosh_q)

    def exact(points):
        x = as_points(points, 1)[:, 0]
        return x / drift - (coth_q / drift) * (layer(x) - 1.0)

    def exact_d1(points):
        x = as_points(points, 1)[:, 0]
        return 1.0 / drift - (coth_q * q / drift) * layer(x)

    def exact_d2(points):
        x = as_points(points, 1)[:, 0]
        return -(coth_q * q * q / drift) * layer(x)

    def lop(points):
        return -eps * exact_d2(points) + drift * exact_d1(points)

    return ProblemSpec(
        name="boundary_layer",
        operator=AdvectionDiffusion(eps, drift),
        boundary=Dirichlet(),
        domain=Interval(-1.0, 1.0),
        source=1.0,
        boundary_data=0.0,
        exact=exact,
        exact_operator_values=lop,
        exact_boundary_rows=lambda pts, normals: exact(pts),
        params={"eps": eps, "drift": drift},
        default_config=SolverConfig(
            stages=5,
            width_stage1=40,
            weight_scale_slope=3.0,
            weight_scale_intercept=7.0,
            m_interior_uniform=512,
            m_interior_adaptive=256,
            m_boundary=2,
            penalty=10.0,
            n_opt=20,
            learning_rate=5e-2,
        ),
    )


def _lshape() -> ProblemSpec:
    return ProblemSpec(
        name="lshape_poisson",
        operator=NegLaplacian(),
        boundary=Dirichlet(),
        domain=LShape(-1.0, 1.0),
        source=1.0,
        boundary_data=0.0,
        exact=None,
        params={"n_knowledge": 20},
        default_config=SolverConfig(
            stages=9,
            width_stage1=20,
            weight_scale_slope=2.0,
            weight_scale_intercept=-1.0,
            m_interior_uniform=10_000,
            m_interior_adaptive=5_000,
            m_boundary=4_000,
            penalty=1e3,
            n_opt=10,
            learning_rate=5e-3,
            knowledge_neurons=True,
            n_knowledge=20,
        ),
    )


def _rapid_source(eps: float) -> ProblemSpec:
    rr = 1.0 / 16.0
    cx = cy = 0.5

    def pieces(points):
        p = as_points(points, 2)
        x, y = p[:, 0], p[:, 1]
        dx, dy = x - cx, y - cy
        rho2 = dx * dx + dy * dy
        w = rr - rho2
        quot = eps * eps + w * w
        amp = eps / (np.pi * quot)
        bump = 0.5 + np.arctan(w / eps) / np.pi
        poly = 16.0 * x * (1.0 - x) * y * (1.0 - y)
        poly_x = 16.0 * (1.0 - 2.0 * x) * y * (1.0 - y)
        poly_y = 16.0 * x * (1.0 - x) * (1.0 - 2.0 * y)
        lap_poly = -32.0 * (y * (1.0 - y) + x * (1.0 - x))
        bump_x = -2.0 * amp * dx
        bump_y = -2.0 * amp * dy
        lap_bump = -4.0 * amp - 8.0 * w * rho2 * amp / quot
        return poly, poly_x, poly_y, lap_poly, bump, bump_x, bump_y, lap_bump

    def exact(points):
        poly, _, _, _, bump, _, _, _ = pieces(points)
        return poly * bump

    def laplacian(points):
        poly, px, py, lp, bump, bx, by, lb = pieces(points)
        return lp * bump + 2.0 * (px * bx + py * by) + poly * lb

    def source(points):
        return -laplacian(points)

    def neg_laplacian(points):
        return -laplacian(points)

    tag = int(round(1.0 / eps))
    s1, s2 = (8, 3) if tag == 120 else (8, 5)
    big = tag == 500
    return ProblemSpec(
        name=f"rapid_source_eps{tag}",
        operator=NegLaplacian(),
        boundary=Dirichlet(),
        domain=Box2D(((0.0, 1.0), (0.0, 1.0))),
        source=source,
        boundary_data=0.0,
        exact=exact,
        exact_operator_values=neg_laplacian,
        exact_boundary_rows=lambda pts, normals: exact(pts),
        params={"eps": eps, "r": rr, "center": (cx, cy)},
        default_config=SolverConfig(
            stages=s1 + s2,
            width_stage1=20,
            weight_scale_slope=3.0,
            weight_scale_intercept=-2.0,
            m_interior_uniform=90_000 if big else 10_000,
            m_interior_adaptive=45_000 if big else 5_000,
            m_boundary=16_000 if big else 4_000,
            penalty=1e3,
            n_opt=10,
            learning_rate=5e-2,
            localized_stages=s2,
            localized_width=1500,
            localized_shape_scale=10.0,
        ),
    )


def _biharmonic_smooth() -> ProblemSpec:
    pi = np.pi

    def s0(t):
        return np.sin(pi * t) ** 2

    def s1(t):
        return pi * np.sin(2.0 * pi * t)

    def s2(t):
        return 2.0 * pi**2 * np.cos(2.0 * pi * t)

    def s4(t):
        return -8.0 * pi**4 * np.cos(2.0 * pi * t)

    def g0(t):
        return (1.0 - t * t) ** 4

    def g1(t):
        return -8.0 * t * (1.0 - t * t) ** 3

    def g2(t):
        return -8.0 + 72.0 * t**2 - 120.0 * t**4 + 56.0 * t**6

    def g4(t):
        return 144.0 - 1440.0 * t**2 + 1680.0 * t**4

    def exact(points):
        p = as_points(points, 2)
        x, y = p[:, 0], p[:, 1]
        return s0(x) * s0(y) + g0(x) * g0(y)

    def source(points):
        p = as_points(points, 2)
        x, y = p[:, 0], p[:, 1]
        return (
            s4(x) * s0(y) + 2.0 * s2(x) * s2(y) + s0(x) * s4(y)
            + g4(x) * g0(y) + 2.0 * g2(x) * g2(y) + g0(x) * g4(y)
        )

    def boundary_rows(points, normals):
        p = as_points(points, 2)
        x, y = p[:, 0], p[:, 1]
        ux = s1(x) * s0(y) + g1(x) * g0(y)
        uy = s0(x) * s1(y) + g0(x) * g1(y)
        out = np.empty(2 * p.shape[0])
        out[0::2] = exact(p)
        out[1::2] = normals[:, 0] * ux + normals[:, 1] * uy
        return out

    return ProblemSpec(
        name="biharmonic_smooth",
        operator=Biharmonic(),
        boundary=DirichletAndNormal(),
        domain=Box2D(((-1.0, 1.0), (-1.0, 1.0))),
        source=source,
        boundary_data=(0.0, 0.0),
        exact=exact,
        exact_operator_values=source,
        exact_boundary_rows=boundary_rows,
        default_config=SolverConfig(
            stages=7,
            width_stage1=40,
            weight_scale_slope=1.0,
            weight_scale_intercept=1.0,
            m_interior_uniform=10_000,
            m_interior_adaptive=5_000,
            m_boundary=4_000,
            penalty=1e3,
            n_opt=10,
            learning_rate=5e-3,
        ),
    )


def _point_load(eps1: float = 1.0, eps2: float = 1.0) -> ProblemSpec:
    c1 = (-1.0 / (2.0 * math.pi) - eps2 / (8.0 * math.pi)) / (4.0 + 2.0 * eps2)
    c2 = -c1 + eps1 / (2.0 * math.pi)

    def radius(points):
        p = as_points(points, 2)
        return np.hypot(p[:, 0], p[:, 1])

    def exact(points):
        r = radius(points)
        with np.errstate(divide="ignore", invalid="ignore"):
            core = np.where(r > 0.0, r * r * np.log(r) / (8.0 * math.pi), 0.0)
        return core + c1 * r * r + c2

    def boundary_rows(points, normals):
        r = radius(points)  # = 1 on the unit circle
        u = exact(points)
        u_r = r * np.log(np.maximum(r, 1e-300)) / (4.0 * math.pi) + r / (8.0 * math.pi) + 2.0 * c1 * r
        lap = np.log(np.maximum(r, 1e-300)) / (2.0 * math.pi) + 1.0 / (2.0 * math.pi) + 4.0 * c1
        dn_lap = 1.0 / (2.0 * math.pi * r)
        out = np.empty(2 * r.shape[0])
        out[0::2] = u - eps1 * dn_lap
        out[1::2] = lap + eps2 * u_r
        return out

    return ProblemSpec(
        name="disk_point_load",
        operator=RadialPointLoad(),
        boundary=RobinPair(eps1, eps2),
        domain=Disk((0.0, 0.0), 1.0),
        source=1.0,
        boundary_data=(0.0, 0.0),
        exact=exact,
        exact_operator_values=lambda pts: np.ones(as_points(pts, 2).shape[0]),
        exact_boundary_rows=boundary_rows,
        error_grid="polar",
        params={"eps1": eps1, "eps2": eps2, "c1": c1, "c2": c2},
        default_config=SolverConfig(
            stages=8,
            width_stage1=20,
            weight_scale_slope=1.0,
            weight_scale_intercept=0.0,
            m_interior_uniform=10_000,
            m_interior_adaptive=5_000,
            m_boundary=4_000,
            penalty=1e3,
            n_opt=10,
            learning_rate=5e-3,
        ),
    )


def _ac_initial_guess(r0: float, r1: float) -> ClosedFormBasis:
    log_ratio = math.log(r1 / r0)

    def split(points):
        p = as_points(points, 2)
        x, y = p[:, 0], p[:, 1]
        r2 = x * x + y * y
        r = np.sqrt(r2)
        ramp = (r > r0) & (r < r1)
        return x, y, r, r2, ramp

    def value(points):
        x, y, r, r2, ramp = split(points)
        out = np.where(r <= r0, 1.0, 0.0)
        safe_r = np.where(ramp, r, 1.0)
        out = np.where(ramp, np.log(r1 / safe_r) / log_ratio, out)
        return out

    def d1(axis):
        def fn(points):
            x, y, r, r2, ramp = split(points)
            coord = x if axis == 0 else y
            with np.errstate(divide="ignore", invalid="ignore"):
                vals = -coord / (log_ratio * r2)
            return np.where(ramp, vals, 0.0)

        return fn

    def d2(ax1, ax2):
        def fn(points):
            x, y, r, r2, ramp = split(points)
            with np.errstate(divide="ignore", invalid="ignore"):
                if ax1 == ax2:
                    coord = x if ax1 == 0 else y
                    vals = (2.0 * coord * coord - r2) / (log_ratio * r2 * r2)
                else:
                    vals = 2.0 * x * y / (log_ratio * r2 * r2)
            return np.where(ramp, vals, 0.0)

        return fn

    return ClosedFormBasis(
        dim=2,
        partials={
            (0, 0): value,
            (1, 0): d1(0),
            (0, 1): d1(1),
            (2, 0): d2(0, 0),
            (1, 1): d2(0, 1),
            (0, 2): d2(1, 1),
        },
    )


def _allen_cahn(eps: float = 0.1, stab_times_eps2: float = 2.0) -> ProblemSpec:
    stab = stab_times_eps2 / eps**2
    r0, r1 = 0.7, 0.9

    def fixed_point_source(u_values):
        u = np.asarray(u_values, dtype=np.float64)
        return u**3 - (1.0 + stab * eps**2) * u

    return ProblemSpec(
        name="allen_cahn",
        operator=LinearizedAC(eps, stab),
        boundary=Dirichlet(),
        domain=Box2D(((-1.0, 1.0), (-1.0, 1.0))),
        source=0.0,
        boundary_data=0.0,
        exact=None,
        initial_guess=_ac_initial_guess(r0, r1),
        nonlinear_source=fixed_point_source,
        params={"eps": eps, "stab": stab, "r0": r0, "r1": r1},
        default_config=SolverConfig(
            stages=6,
            width_stage1=40,
            weight_scale_slope=1.0,
            weight_scale_intercept=0.0,
            m_interior_uniform=10_000,
            m_interior_adaptive=5_000,
            m_boundary=400,
            penalty=1e3,
            n_opt=10,
            learning_rate=5e-3,
            ac_iter_slope=1,
            ac_iter_offset=1,
        ),
    )


_BUILDERS: dict[str, Callable[[], ProblemSpec]] = {
    "function_fitting": _fitting,
    "boundary_layer": _boundary_layer,
    "lshape_poisson": _lshape,
    "rapid_source_eps120": lambda: _rapid_source(1.0 / 120.0),
    "rapid_source_eps500": lambda: _rapid_source(1.0 / 500.0),
    "biharmonic_smooth": _biharmonic_smooth,
    "disk_point_load": _point_load,
    "allen_cahn": _allen_cahn,
}


def preset_names() -> list[str]:
    return list(_BUILDERS)


def builtin(name: str) -> ProblemSpec:
    """Construct a named benchmark problem (self-checked)."""
    try:
        builder = _BUILDERS[name]
    except KeyError:
        known = ", ".join(_BUILDERS)
        raise KeyError(f"unknown problem {name!r}; available: {known}") from None
    spec = builder()
    spec.self_check()
    return spec
