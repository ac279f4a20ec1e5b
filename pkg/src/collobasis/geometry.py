"""Computational domains, structured point generation, rejection sampling.

Conventions used throughout the package:

* point sets are ``(M, d)`` float64 arrays, also in one dimension;
* interior grids are cell-centered so no generated point ever lands on
  the boundary (boundary rows come from the separate boundary sampler);
* boundary samplers return the points together with outward unit
  normals, since boundary operators need them;
* all randomness flows through an explicit ``numpy.random.Generator``.
"""

from __future__ import annotations

import math
from typing import Callable, NamedTuple

import numpy as np

CANDIDATE_POINTS_PER_DIM = 1000
MAX_REJECTION_DRAWS_PER_POINT = 10**6


class BoundarySample(NamedTuple):
    points: np.ndarray   # (M, d)
    normals: np.ndarray  # (M, d) outward unit normals


class RejectionResult(NamedTuple):
    points: np.ndarray
    uniform_fallback: bool  # True when the density was identically zero


def as_points(x, dim: int | None = None) -> np.ndarray:
    p = np.asarray(x, dtype=np.float64)
    if p.ndim == 1:
        p = p[:, None]
    if p.ndim != 2:
        raise ValueError(f"points must be a (M, d) array, got ndim={p.ndim}")
    if dim is not None and p.shape[1] != dim:
        raise ValueError(f"expected dimension {dim}, got {p.shape[1]}")
    return p


def _cell_centers(lo: float, hi: float, n: int) -> np.ndarray:
    return lo + (np.arange(n) + 0.5) * (hi - lo) / n


class Domain:
    """Base class: bounded domain with an indicator and measured boundary."""

    dim: int

    @property
    def bounding_box(self) -> np.ndarray:
        """(d, 2) array of per-axis [lo, hi]."""
        raise NotImplementedError

    @property
    def measure(self) -> float:
        raise NotImplementedError

    @property
    def boundary_measure(self) -> float:
        raise NotImplementedError

    def contains(self, points) -> np.ndarray:
        """Indicator of the open interior, as a boolean mask."""
        raise NotImplementedError

    def boundary_points(self, m: int, offset: float | None = None) -> BoundarySample:
        raise NotImplementedError

    def interior_grid(self, per_axis: int) -> np.ndarray:
        """All cell-centered tensor-grid points lying inside the domain."""
        box = self.bounding_box
        axes = [_cell_centers(lo, hi, per_axis) for lo, hi in box]
        if self.dim == 1:
            pts = axes[0][:, None]
        else:
            xx, yy = np.meshgrid(axes[0], axes[1], indexing="ij")
            pts = np.column_stack([xx.ravel(), yy.ravel()])
        return pts[self.contains(pts)]

    def uniform_interior(self, m: int) -> np.ndarray:
        """Exactly m interior points from an equidistant cell-centered grid.

        The grid pitch is refined until at least m points survive the
        indicator filter, then the trailing points are dropped.
        """
        if m < 1:
            raise ValueError("point count must be >= 1")
        n = math.ceil(m ** (1.0 / self.dim))
        for _ in range(10_000):
            pts = self.interior_grid(n)
            if pts.shape[0] >= m:
                return pts[:m]
            if pts.shape[0] == 0 and n > 64:
                raise ValueError("domain interior appears to be empty")
            n += 1
        raise ValueError("could not generate the requested interior points")

    def candidate_grid(self, per_dim: int = CANDIDATE_POINTS_PER_DIM) -> np.ndarray:
        """Fine cell-centered grid used as the rejection-sampling candidate pool."""
        return self.interior_grid(per_dim)


class Interval(Domain):
    dim = 1

    def __init__(self, a: float, b: float):
        if not b > a:
            raise ValueError("interval requires b > a")
        self.a = float(a)
        self.b = float(b)

    @property
    def bounding_box(self) -> np.ndarray:
        return np.array([[self.a, self.b]])

    @property
    def measure(self) -> float:
        return self.b - self.a

    @property
    def boundary_measure(self) -> float:
        # counting measure on the two endpoints
        return 2.0

    def contains(self, points) -> np.ndarray:
        x = as_points(points, 1)[:, 0]
        return (x > self.a) & (x < self.b)

    def boundary_points(self, m: int, offset: float | None = None) -> BoundarySample:
        if m != 2:
            raise ValueError("a 1-d interval has exactly 2 boundary points")
        pts = np.array([[self.a], [self.b]])
        normals = np.array([[-1.0], [1.0]])
        return BoundarySample(pts, normals)


class _PolygonDomain(Domain):
    """Shared machinery for axis-aligned polygonal domains (ccw vertex list)."""

    dim = 2

    def __init__(self, vertices: np.ndarray):
        self._vertices = np.asarray(vertices, dtype=np.float64)
        segs = np.roll(self._vertices, -1, axis=0) - self._vertices
        self._edge_len = np.hypot(segs[:, 0], segs[:, 1])
        self._edge_dir = segs / self._edge_len[:, None]
        # interior lies left of a ccw traversal, so outward is the right normal
        self._edge_normal = np.column_stack([self._edge_dir[:, 1], -self._edge_dir[:, 0]])
        self._cumlen = np.concatenate([[0.0], np.cumsum(self._edge_len)])

    @property
    def boundary_measure(self) -> float:
        return float(self._cumlen[-1])

    def boundary_points(self, m: int, offset: float | None = None) -> BoundarySample:
        if m < 2:
            raise ValueError("need at least 2 boundary points")
        if offset is None:
            offset = 0.5  # half-spacing start keeps points off the corners
        perimeter = self.boundary_measure
        arc = (np.arange(m) + offset) * perimeter / m
        arc = np.mod(arc, perimeter)
        edge = np.searchsorted(self._cumlen, arc, side="right") - 1
        edge = np.clip(edge, 0, len(self._edge_len) - 1)
        t = arc - self._cumlen[edge]
        pts = self._vertices[edge] + t[:, None] * self._edge_dir[edge]
        return BoundarySample(pts, self._edge_normal[edge].copy())


class Box2D(_PolygonDomain):
    def __init__(self, bounds):
        (x0, x1), (y0, y1) = bounds
        if not (x1 > x0 and y1 > y0):
            raise ValueError("box requires hi > lo on both axes")
        self._bounds = ((float(x0), float(x1)), (float(y0), float(y1)))
        super().__init__(
            np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
        )

    @property
    def bounding_box(self) -> np.ndarray:
        return np.array(self._bounds)

    @property
    def measure(self) -> float:
        (x0, x1), (y0, y1) = self._bounds
        return (x1 - x0) * (y1 - y0)

    def contains(self, points) -> np.ndarray:
        p = as_points(points, 2)
        (x0, x1), (y0, y1) = self._bounds
        return (p[:, 0] > x0) & (p[:, 0] < x1) & (p[:, 1] > y0) & (p[:, 1] < y1)


class LShape(_PolygonDomain):
    """(lo, hi)^2 with the closed lower-left quadrant (lo, corner]^2 removed.

    The reentrant corner sits at ``corner`` (default: the origin of the
    standard (-1,1)^2 setup).
    """

    def __init__(self, lo: float = -1.0, hi: float = 1.0, corner: tuple[float, float] = (0.0, 0.0)):
        cx, cy = corner
        if not (lo < cx < hi and lo < cy < hi):
            raise ValueError("corner must be strictly inside the square")
        self.lo, self.hi = float(lo), float(hi)
        self.corner = (float(cx), float(cy))
        super().__init__(
            np.array([
                [cx, lo], [hi, lo], [hi, hi], [lo, hi], [lo, cy], [cx, cy],
            ])
        )

    @property
    def bounding_box(self) -> np.ndarray:
        return np.array([[self.lo, self.hi], [self.lo, self.hi]])

    @property
    def measure(self) -> float:
        cx, cy = self.corner
        return (self.hi - self.lo) ** 2 - (cx - self.lo) * (cy - self.lo)

    def contains(self, points) -> np.ndarray:
        p = as_points(points, 2)
        cx, cy = self.corner
        in_square = (
            (p[:, 0] > self.lo) & (p[:, 0] < self.hi)
            & (p[:, 1] > self.lo) & (p[:, 1] < self.hi)
        )
        in_cut = (p[:, 0] <= cx) & (p[:, 1] <= cy)
        return in_square & ~in_cut

    def boundary_points(self, m: int, offset: float | None = None) -> BoundarySample:
        sample = super().boundary_points(m, offset)
        # corner singular functions blow up in second derivatives at the
        # reentrant corner, so nudge any coincident point into the domain
        cx, cy = self.corner
        at_corner = np.hypot(sample.points[:, 0] - cx, sample.points[:, 1] - cy) < 1e-12
        if at_corner.any():
            shift = 1e-10 / math.sqrt(2.0)
            sample.points[at_corner] += shift
        return sample


class Disk(Domain):
    dim = 2

    def __init__(self, center, radius: float):
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.center = np.asarray(center, dtype=np.float64).reshape(2)
        self.radius = float(radius)

    @property
    def bounding_box(self) -> np.ndarray:
        c, r = self.center, self.radius
        return np.array([[c[0] - r, c[0] + r], [c[1] - r, c[1] + r]])

    @property
    def measure(self) -> float:
        return math.pi * self.radius**2

    @property
    def boundary_measure(self) -> float:
        return 2.0 * math.pi * self.radius

    def contains(self, points) -> np.ndarray:
        p = as_points(points, 2)
        return np.hypot(p[:, 0] - self.center[0], p[:, 1] - self.center[1]) < self.radius

    def boundary_points(self, m: int, offset: float | None = None) -> BoundarySample:
        if m < 2:
            raise ValueError("need at least 2 boundary points")
        if offset is None:
            offset = 0.0
        theta = (np.arange(m) + offset) * 2.0 * math.pi / m
        normals = np.column_stack([np.cos(theta), np.sin(theta)])
        pts = self.center + self.radius * normals
        return BoundarySample(pts, normals)

    def polar_grid(self, per_axis: int) -> np.ndarray:
        """Cell-centered grid uniform in (r, theta); excludes r = 0."""
        r = _cell_centers(0.0, self.radius, per_axis)
        theta = _cell_centers(0.0, 2.0 * math.pi, per_axis)
        rr, tt = np.meshgrid(r, theta, indexing="ij")
        return np.column_stack([
            self.center[0] + rr.ravel() * np.cos(tt.ravel()),
            self.center[1] + rr.ravel() * np.sin(tt.ravel()),
        ])

    def interior_grid(self, per_axis: int) -> np.ndarray:
        # interior grids follow the polar convention used on circular domains
        return self.polar_grid(per_axis)

    def candidate_grid(self, per_dim: int = CANDIDATE_POINTS_PER_DIM) -> np.ndarray:
        # candidates come from the Cartesian bounding-box grid filtered by
        # the indicator, matching the generic complex-geometry path
        box = self.bounding_box
        x = _cell_centers(box[0, 0], box[0, 1], per_dim)
        y = _cell_centers(box[1, 0], box[1, 1], per_dim)
        xx, yy = np.meshgrid(x, y, indexing="ij")
        pts = np.column_stack([xx.ravel(), yy.ravel()])
        return pts[self.contains(pts)]


def rejection_sample(
    density: Callable[[np.ndarray], np.ndarray] | np.ndarray,
    domain: Domain,
    n: int,
    candidate_grid: np.ndarray,
    rng: np.random.Generator,
    max_draws_per_point: int = MAX_REJECTION_DRAWS_PER_POINT,
) -> RejectionResult:
    """Draw n points from the candidate grid with density proportional to |D|.

    Candidates are drawn uniformly from ``candidate_grid``; a draw x is
    accepted when ``|D(x)| >= r`` for r uniform on (0, M] with
    ``M = max |D|`` over the grid. If D vanishes identically the draws
    fall back to uniform (flagged in the result). Deterministic for a
    fixed generator state.
    """
    if n < 1:
        raise ValueError("sample count must be >= 1")
    candidates = as_points(candidate_grid, domain.dim)
    if candidates.shape[0] == 0:
        raise ValueError("candidate grid is empty")
    vals = density(candidates) if callable(density) else np.asarray(density, dtype=np.float64)
    vals = np.abs(np.asarray(vals, dtype=np.float64).reshape(-1))
    if vals.shape[0] != candidates.shape[0]:
        raise ValueError("density values do not align with the candidate grid")
    if not np.isfinite(vals).all():
        raise ValueError("density contains non-finite values")

    m = float(vals.max())
    k = candidates.shape[0]
    if m == 0.0:
        idx = rng.integers(0, k, size=n)
        return RejectionResult(candidates[idx], True)

    budget = max_draws_per_point * n
    drawn = 0
    accepted: list[np.ndarray] = []
    n_accepted = 0
    while n_accepted < n:
        if drawn >= budget:
            raise RuntimeError(
                f"rejection sampling exceeded {budget} draws; density may be ill-posed"
            )
        batch = min(max(2 * (n - n_accepted), 1024), budget - drawn)
        idx = rng.integers(0, k, size=batch)
        # r in (0, M] so zero-density candidates are never accepted
        r = m * (1.0 - rng.random(batch))
        keep = idx[vals[idx] >= r]
        accepted.append(keep)
        n_accepted += keep.size
        drawn += batch
    idx = np.concatenate(accepted)[:n]
    return RejectionResult(candidates[idx], False)


def child_rng(master_seed: int, *path: int) -> np.random.Generator:
    """Deterministic child stream for (seed, stage, purpose, ...) tuples."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), *map(int, path)]))
