"""Basis functions and dictionaries.

A *basis function* is anything with analytic partial derivatives up to
its supported order: a trained single-hidden-layer network, a hand-coded
closed form, a corner singular function, or a localized bump. A
*dictionary* is an ordered family of such functions evaluated column-wise
when assembling collocation systems.

Differential operators are passed around as *term lists*: sequences of
``(alpha, coeff)`` pairs where ``alpha`` is a derivative multi-index and
``coeff`` is a scalar or per-point array, so that the operator value is
``sum_alpha coeff(x) * d^alpha f(x)``. This keeps every evaluation path
(single function, dictionary block, parameter gradient) on one kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .activation import Activation, tanh_derivative_from_t
from .geometry import Domain, RejectionResult, as_points, rejection_sample

Alpha = tuple[int, ...]
Term = tuple[Alpha, "float | np.ndarray"]

# evaluation kernels process points in chunks of at most this many
# (point, neuron) entries to bound temporary memory
_CHUNK_ENTRIES = 1 << 22


def zero_alpha(dim: int) -> Alpha:
    return (0,) * dim


def _term_coeff_rows(coeff, sl: slice):
    if np.isscalar(coeff):
        return coeff
    return np.asarray(coeff)[sl]


class BasisFunction:
    """Interface: analytic partials up to ``max_order``."""

    dim: int
    max_order: int

    def partial(self, alpha: Alpha, points) -> np.ndarray:
        """d^alpha f at each point, as a (M,) array."""
        return self.apply_terms([(tuple(alpha), 1.0)], points)

    def apply_terms(self, terms: Sequence[Term], points) -> np.ndarray:
        """sum over terms of coeff(x) * d^alpha f(x)."""
        raise NotImplementedError

    def value(self, points) -> np.ndarray:
        return self.partial(zero_alpha(self.dim), points)

    def _check_order(self, terms: Sequence[Term]) -> None:
        top = max((sum(alpha) for alpha, _ in terms), default=0)
        if top > self.max_order:
            raise ValueError(
                f"{type(self).__name__} supports derivatives up to order "
                f"{self.max_order}, requested {top}"
            )


class Dictionary:
    """Ordered family of basis functions with columnwise evaluation."""

    dim: int
    size: int
    max_order: int

    def operator_block(self, terms: Sequence[Term], points) -> np.ndarray:
        """(M, size) block with entry (m, j) = sum_t coeff_t(x_m) d^alpha_t phi_j(x_m)."""
        raise NotImplementedError

    def apply_terms(self, terms: Sequence[Term], points, coef: np.ndarray) -> np.ndarray:
        return self.operator_block(terms, points) @ np.asarray(coef, dtype=np.float64)

    def __len__(self) -> int:
        return self.size


class NeuronDictionary(Dictionary):
    """Hidden-layer dictionary {sigma(w_i . x + b_i)}_i with tanh activation.

    d^alpha sigma(w.x+b) = sigma^(|alpha|)(w.x+b) * prod_k w_k^alpha_k,
    so blocks for any term list share a single tanh table per chunk.
    """

    def __init__(self, weights, biases, activation: Activation = Activation.TANH):
        self.weights = np.ascontiguousarray(weights, dtype=np.float64)
        self.biases = np.ascontiguousarray(biases, dtype=np.float64)
        if self.weights.ndim != 2 or self.biases.ndim != 1:
            raise ValueError("weights must be (N, d) and biases (N,)")
        if self.weights.shape[0] != self.biases.shape[0]:
            raise ValueError("weights/biases length mismatch")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.biases).all()):
            raise ValueError("non-finite hidden parameters")
        if activation is not Activation.TANH:
            raise ValueError(f"unsupported activation {activation!r}")
        self.activation = activation

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    max_order = 5

    def _wpow(self, alpha: Alpha) -> np.ndarray:
        return np.prod(self.weights ** np.asarray(alpha, dtype=np.float64), axis=1)

    def _chunks(self, m: int):
        rows = max(1, _CHUNK_ENTRIES // max(self.size, 1))
        for lo in range(0, m, rows):
            yield slice(lo, min(lo + rows, m))

    def _fold_terms(self, terms: Sequence[Term]):
        """Collapse scalar-coefficient terms into one weight vector per order.

        Terms with per-point coefficients stay separate: (alpha, coeff,
        wpow) triples.
        """
        folded: dict[int, np.ndarray] = {}
        pointwise = []
        for alpha, coeff in terms:
            wp = self._wpow(alpha)
            if np.isscalar(coeff):
                n = sum(alpha)
                folded[n] = folded.get(n, 0.0) + coeff * wp
            else:
                pointwise.append((sum(alpha), np.asarray(coeff, dtype=np.float64), wp))
        return folded, pointwise

    def operator_block(self, terms: Sequence[Term], points, scale: float = 1.0) -> np.ndarray:
        pts = as_points(points, self.dim)
        m = pts.shape[0]
        out = np.zeros((m, self.size))
        folded, pointwise = self._fold_terms(terms)
        orders = sorted(set(folded) | {n for n, _, _ in pointwise})
        for sl in self._chunks(m):
            t = np.tanh(pts[sl] @ self.weights.T + self.biases)
            tabs = {n: tanh_derivative_from_t(n, t) for n in orders}
            acc = out[sl]
            for n, w in folded.items():
                acc += tabs[n] * w
            for n, coeff, wp in pointwise:
                acc += coeff[sl][:, None] * (tabs[n] * wp)
        if scale != 1.0:
            out *= scale
        return out

    def apply_terms(self, terms: Sequence[Term], points, coef: np.ndarray) -> np.ndarray:
        pts = as_points(points, self.dim)
        coef = np.asarray(coef, dtype=np.float64)
        m = pts.shape[0]
        out = np.zeros(m)
        folded, pointwise = self._fold_terms(terms)
        orders = sorted(set(folded) | {n for n, _, _ in pointwise})
        for sl in self._chunks(m):
            t = np.tanh(pts[sl] @ self.weights.T + self.biases)
            tabs = {n: tanh_derivative_from_t(n, t) for n in orders}
            for n, w in folded.items():
                out[sl] += tabs[n] @ (w * coef)
            for n, coeff, wp in pointwise:
                out[sl] += coeff[sl] * (tabs[n] @ (wp * coef))
        return out


@dataclass
class SLFN:
    """Trainable single-hidden-layer network sum_i c_i sigma(w_i.x + b_i)."""

    weights: np.ndarray       # (N, d)
    biases: np.ndarray        # (N,)
    coefficients: np.ndarray  # (N,)
    activation: Activation = Activation.TANH

    def __post_init__(self):
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        self.biases = np.ascontiguousarray(self.biases, dtype=np.float64)
        self.coefficients = np.ascontiguousarray(self.coefficients, dtype=np.float64)
        n = self.weights.shape[0]
        if n < 1:
            raise ValueError("network width must be >= 1")
        if self.biases.shape != (n,) or self.coefficients.shape != (n,):
            raise ValueError("parameter shapes are inconsistent")

    @property
    def width(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def dictionary(self) -> NeuronDictionary:
        return NeuronDictionary(self.weights, self.biases, self.activation)

    def value(self, points) -> np.ndarray:
        d = self.dim
        return self.dictionary().apply_terms([(zero_alpha(d), 1.0)], points, self.coefficients)


class CompositeBasis(BasisFunction):
    """Frozen linear combination over a dictionary; one outer-system column."""

    def __init__(self, dictionary: Dictionary, coefficients):
        self.dictionary = dictionary
        self.coefficients = np.ascontiguousarray(coefficients, dtype=np.float64)
        if self.coefficients.shape != (dictionary.size,):
            raise ValueError("coefficient length must match dictionary size")
        self.dim = dictionary.dim
        self.max_order = dictionary.max_order

    def apply_terms(self, terms: Sequence[Term], points) -> np.ndarray:
        self._check_order(terms)
        return self.dictionary.apply_terms(terms, points, self.coefficients)


class ClosedFormBasis(BasisFunction):
    """Hand-coded basis function: one callable per supported multi-index."""

    def __init__(self, dim: int, partials: dict[Alpha, "callable"], max_order: int | None = None):
        self.dim = dim
        self._partials = {tuple(a): fn for a, fn in partials.items()}
        if zero_alpha(dim) not in self._partials:
            raise ValueError("a value callable (alpha = 0) is required")
        self.max_order = (
            max(sum(a) for a in self._partials) if max_order is None else max_order
        )

    def apply_terms(self, terms: Sequence[Term], points) -> np.ndarray:
        pts = as_points(points, self.dim)
        out = np.zeros(pts.shape[0])
        for alpha, coeff in terms:
            alpha = tuple(alpha)
            if alpha not in self._partials:
                raise ValueError(f"closed-form basis has no partial for alpha={alpha}")
            out += np.asarray(coeff) * np.asarray(self._partials[alpha](pts), dtype=np.float64)
        return out


class CornerSingularBasis(BasisFunction):
    """r^lam sin(lam * theta') with lam = 2i/3: harmonic corner functions.

    theta' is measured counterclockwise from the (0,-1) edge of the
    reentrant corner at the origin, so the function vanishes on both
    corner edges of the standard L-shaped domain. Implemented through
    principal-branch complex powers:

        d^alpha = Im[ e^{i lam pi/2} * lam(lam-1)...(lam-m+1) * i^{alpha_y} * z^{lam-m} ]

    with z = x + iy and m = |alpha|. Points closer than 1e-13 to the
    corner are nudged 1e-10 toward the interior before evaluating
    (negative powers of r blow up there and the solver never places
    points at the corner by construction).
    """

    dim = 2
    max_order = 2

    def __init__(self, index: int, corner: tuple[float, float] = (0.0, 0.0)):
        if index < 1:
            raise ValueError("singular index must be >= 1")
        self.index = int(index)
        self.exponent = 2.0 * index / 3.0
        self.corner = (float(corner[0]), float(corner[1]))

    def apply_terms(self, terms: Sequence[Term], points) -> np.ndarray:
        self._check_order(terms)
        pts = as_points(points, 2)
        lam = self.exponent
        phase = complex(np.exp(1j * lam * math.pi / 2.0))

        # fold scalar-coefficient terms of equal derivative order into one
        # complex factor; the Laplacian of a harmonic power folds to zero
        # and skips the z**(lam-m) evaluation entirely
        folded: dict[int, complex] = {}
        pointwise: list[tuple[int, np.ndarray, complex]] = []
        for alpha, coeff in terms:
            m = sum(alpha)
            falling = 1.0
            for j in range(m):
                falling *= lam - j
            factor = phase * falling * (1j ** alpha[1])
            if np.isscalar(coeff):
                folded[m] = folded.get(m, 0.0) + coeff * factor
            else:
                pointwise.append((m, np.asarray(coeff, dtype=np.float64), factor))

        orders = [m for m, c in folded.items() if c != 0.0]
        orders += [m for m, _, _ in pointwise]
        if not orders:
            return np.zeros(pts.shape[0])

        z = (pts[:, 0] - self.corner[0]) + 1j * (pts[:, 1] - self.corner[1])
        tiny = np.abs(z) < 1e-13
        if tiny.any():
            z = z.copy()
            z[tiny] = (1e-10 + 1e-10j) / math.sqrt(2.0)
        powers = {m: z ** (lam - m) for m in sorted(set(orders))}
        out = np.zeros(pts.shape[0])
        for m, factor in folded.items():
            if factor != 0.0:
                out += np.imag(factor * powers[m])
        for m, coeff, factor in pointwise:
            out += coeff * np.imag(factor * powers[m])
        return out


class MemberDictionary(Dictionary):
    """Dictionary over an explicit list of basis functions (outer systems)."""

    def __init__(self, members: Sequence[BasisFunction]):
        self.members = list(members)
        if not self.members:
            raise ValueError("dictionary must not be empty")
        self.dim = self.members[0].dim
        self.max_order = min(f.max_order for f in self.members)

    @property
    def size(self) -> int:
        return len(self.members)

    def operator_block(self, terms: Sequence[Term], points) -> np.ndarray:
        pts = as_points(points, self.dim)
        out = np.empty((pts.shape[0], len(self.members)))
        for j, f in enumerate(self.members):
            out[:, j] = f.apply_terms(terms, pts)
        return out

    def apply_terms(self, terms: Sequence[Term], points, coef: np.ndarray) -> np.ndarray:
        pts = as_points(points, self.dim)
        coef = np.asarray(coef, dtype=np.float64)
        out = np.zeros(pts.shape[0])
        for c, f in zip(coef, self.members):
            if c != 0.0:
                out += c * f.apply_terms(terms, pts)
        return out


class ConcatDictionary(Dictionary):
    def __init__(self, parts: Sequence[Dictionary]):
        self.parts = [p for p in parts if p is not None and p.size > 0]
        if not self.parts:
            raise ValueError("dictionary must not be empty")
        self.dim = self.parts[0].dim
        self.max_order = min(p.max_order for p in self.parts)

    @property
    def size(self) -> int:
        return sum(p.size for p in self.parts)

    def operator_block(self, terms: Sequence[Term], points) -> np.ndarray:
        return np.hstack([p.operator_block(terms, points) for p in self.parts])

    def apply_terms(self, terms: Sequence[Term], points, coef: np.ndarray) -> np.ndarray:
        coef = np.asarray(coef, dtype=np.float64)
        out = np.zeros(as_points(points, self.dim).shape[0])
        lo = 0
        for p in self.parts:
            out += p.apply_terms(terms, points, coef[lo:lo + p.size])
            lo += p.size
        return out


class LocalizedDictionary(Dictionary):
    """Bump functions concentrated near centers and level sets of a field.

    phi_i(x) = exp(-||k_i . (x - x_i)||^2)              (componentwise k_i)
             * exp(-1/2 ||k_i||^2 (u(x) - u(x_i))^2)

    where u is a reference field (the running approximation). Partials up
    to order 2 via the chain rule through u; higher orders are an error.
    """

    max_order = 2

    def __init__(self, centers, shapes, reference: BasisFunction):
        self.centers = np.ascontiguousarray(centers, dtype=np.float64)
        self.shapes = np.ascontiguousarray(shapes, dtype=np.float64)
        if self.centers.shape != self.shapes.shape or self.centers.ndim != 2:
            raise ValueError("centers and shapes must be matching (N, d) arrays")
        if reference.max_order < 2:
            raise ValueError("reference field must supply partials up to order 2")
        self.reference = reference
        self.dim = self.centers.shape[1]
        self.center_values = np.asarray(reference.value(self.centers), dtype=np.float64)

    @property
    def size(self) -> int:
        return self.centers.shape[0]

    def neuron(self, i: int) -> "LocalizedNeuron":
        return LocalizedNeuron(self, int(i))

    def neurons(self) -> list["LocalizedNeuron"]:
        return [self.neuron(i) for i in range(self.size)]

    def __getitem__(self, i: int) -> "LocalizedNeuron":
        return self.neuron(i)

    def _reference_fields(self, pts: np.ndarray, need_order: int) -> dict:
        d = self.dim
        fields = {"u": np.asarray(self.reference.value(pts))}
        if need_order >= 1:
            e = lambda k: tuple(1 if j == k else 0 for j in range(d))
            fields["du"] = [np.asarray(self.reference.partial(e(k), pts)) for k in range(d)]
        if need_order >= 2:
            def a2(k, l):
                v = [0] * d
                v[k] += 1
                v[l] += 1
                return tuple(v)
            fields["d2u"] = [
                [np.asarray(self.reference.partial(a2(k, l), pts)) for l in range(d)]
                for k in range(d)
            ]
        return fields

    def _chunks(self, m: int):
        n = max(1, _CHUNK_ENTRIES // max(m, 1))
        for lo in range(0, self.size, n):
            yield slice(lo, min(lo + n, self.size))

    def operator_block(self, terms: Sequence[Term], points) -> np.ndarray:
        pts = as_points(points, self.dim)
        m = pts.shape[0]
        need = max((sum(alpha) for alpha, _ in terms), default=0)
        if need > self.max_order:
            raise ValueError("localized neurons support derivatives up to order 2")
        ref = self._reference_fields(pts, need)
        out = np.zeros((m, self.size))
        u = ref["u"]
        for sl in self._chunks(m):
            cols = self._columns(terms, pts, ref, sl)
            out[:, sl] = cols.T
        return out

    def apply_terms(self, terms: Sequence[Term], points, coef: np.ndarray) -> np.ndarray:
        pts = as_points(points, self.dim)
        need = max((sum(alpha) for alpha, _ in terms), default=0)
        if need > self.max_order:
            raise ValueError("localized neurons support derivatives up to order 2")
        ref = self._reference_fields(pts, need)
        coef = np.asarray(coef, dtype=np.float64)
        out = np.zeros(pts.shape[0])
        for sl in self._chunks(pts.shape[0]):
            cols = self._columns(terms, pts, ref, sl)  # (n_chunk, M)
            out += coef[sl] @ cols
        return out

    def _columns(self, terms, pts, ref, sl: slice) -> np.ndarray:
        """(n_chunk, M) operator values for the neurons in ``sl``."""
        d = self.dim
        u = ref["u"][None, :]
        centers = self.centers[sl]
        shapes = self.shapes[sl]
        ksq = shapes**2                      # (n, d)
        ktot = ksq.sum(axis=1)[:, None]      # (n, 1)
        dev = u - self.center_values[sl][:, None]
        diff = [pts[None, :, k] - centers[:, k, None] for k in range(d)]
        g = sum(-ksq[:, k, None] * diff[k] ** 2 for k in range(d))
        phi = np.exp(g - 0.5 * ktot * dev**2)

        e_first = None
        if any(sum(a) >= 1 for a, _ in terms):
            du = ref["du"]
            e_first = [
                -2.0 * ksq[:, k, None] * diff[k] - ktot * dev * du[k][None, :]
                for k in range(d)
            ]

        acc = np.zeros_like(phi)
        for alpha, coeff in terms:
            m_ord = sum(alpha)
            if m_ord == 0:
                col = phi
            elif m_ord == 1:
                k = alpha.index(1)
                col = phi * e_first[k]
            else:
                du, d2u = ref["du"], ref["d2u"]
                if 2 in alpha:
                    k = l = alpha.index(2)
                else:
                    k = alpha.index(1)
                    l = d - 1 - alpha[::-1].index(1)
                second = -ktot * (du[k][None, :] * du[l][None, :] + dev * d2u[k][l][None, :])
                if k == l:
                    second = second - 2.0 * ksq[:, k, None]
                col = phi * (e_first[k] * e_first[l] + second)
            acc += np.asarray(coeff) * col
        return acc


class LocalizedNeuron(BasisFunction):
    """Single-column view into a LocalizedDictionary."""

    def __init__(self, family: LocalizedDictionary, index: int):
        self.family = family
        self.index = index
        self.dim = family.dim
        self.max_order = family.max_order

    @property
    def center(self) -> np.ndarray:
        return self.family.centers[self.index]

    @property
    def shape(self) -> np.ndarray:
        return self.family.shapes[self.index]

    def apply_terms(self, terms: Sequence[Term], points) -> np.ndarray:
        self._check_order(terms)
        return self.family.operator_block(terms, points)[:, self.index]


class BasisSet(BasisFunction):
    """Ordered basis members with the current combination coefficients.

    Represents u(x) = sum_n coefficients[n] * members[n](x). An empty set
    is the zero function (the usual zero initial guess).
    """

    def __init__(self, members: Sequence[BasisFunction] = (), coefficients=()):
        self.members = list(members)
        self.coefficients = np.asarray(coefficients, dtype=np.float64)
        if self.coefficients.shape != (len(self.members),):
            raise ValueError("coefficients must align with members")
        self.dim = self.members[0].dim if self.members else 0
        self.max_order = min((f.max_order for f in self.members), default=5)

    def __len__(self) -> int:
        return len(self.members)

    def subset(self, k: int, coefficients=None) -> "BasisSet":
        coef = self.coefficients[:k] if coefficients is None else coefficients
        return BasisSet(self.members[:k], coef)

    def with_coefficients(self, coefficients) -> "BasisSet":
        return BasisSet(self.members, coefficients)

    def apply_terms(self, terms: Sequence[Term], points) -> np.ndarray:
        pts = as_points(points)
        if not self.members:
            return np.zeros(pts.shape[0])
        self._check_order(terms)
        return MemberDictionary(self.members).apply_terms(terms, pts, self.coefficients)

    def value(self, points) -> np.ndarray:
        pts = as_points(points)
        if not self.members:
            return np.zeros(pts.shape[0])
        return self.apply_terms([(zero_alpha(self.dim), 1.0)], pts)


def eval_partial(fn: BasisFunction, alpha: Alpha, points) -> np.ndarray:
    """Analytic d^alpha of a basis function at each point."""
    return fn.partial(tuple(alpha), points)


def eval_combination(basis_set: BasisSet, alpha: Alpha, points) -> np.ndarray:
    """d^alpha of the combination sum_n beta_n psi_n at each point."""
    pts = as_points(points)
    if not basis_set.members:
        return np.zeros(pts.shape[0])
    return basis_set.apply_terms([(tuple(alpha), 1.0)], pts)


@dataclass(frozen=True)
class AdaptiveInit:
    weights: np.ndarray
    biases: np.ndarray
    base_points: np.ndarray
    uniform_fallback: bool


def adaptive_init(
    residual_density,
    n_neurons: int,
    weight_scale: float,
    domain: Domain,
    rng: np.random.Generator,
    candidate_grid: np.ndarray | None = None,
) -> AdaptiveInit:
    """Residual-guided hidden-parameter initialization.

    Weights are i.i.d. uniform on (-weight_scale, weight_scale); base
    points are drawn by rejection sampling with density |residual|; each
    bias is set so the neuron's partition hyperplane
    {x : w.x + b = 0} passes exactly through its base point.
    """
    if n_neurons < 1:
        raise ValueError("network width must be >= 1")
    if weight_scale <= 0:
        raise ValueError("weight scale must be positive")
    if candidate_grid is None:
        candidate_grid = domain.candidate_grid()
    weights = rng.uniform(-weight_scale, weight_scale, size=(n_neurons, domain.dim))
    draw: RejectionResult = rejection_sample(
        residual_density, domain, n_neurons, candidate_grid, rng
    )
    biases = -np.sum(weights * draw.points, axis=1)
    return AdaptiveInit(weights, biases, draw.points, draw.uniform_fallback)


def hyperplane_density(points, weights, biases, tau: float) -> np.ndarray:
    """Fraction of neurons whose partition hyperplane passes within tau of x.

    Neurons with a zero weight vector have no hyperplane and never count.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    pts = as_points(points)
    w = np.asarray(weights, dtype=np.float64)
    b = np.asarray(biases, dtype=np.float64)
    if w.shape[0] == 0:
        raise ValueError("need at least one neuron")
    norms = np.linalg.norm(w, axis=1)
    dist = np.abs(pts @ w.T + b)
    with np.errstate(divide="ignore", invalid="ignore"):
        dist = np.where(norms > 0.0, dist / norms, np.inf)
    return (dist <= tau).mean(axis=1)


def make_localized_basis(
    reference: BasisFunction,
    centers,
    shape_scale: float,
    rng: np.random.Generator,
) -> LocalizedDictionary | list:
    """Localized neurons at the given centers with random shape parameters.

    Shape parameters are drawn componentwise uniform on
    (-shape_scale, shape_scale). Returns the (sequence-like) family;
    empty centers yield an empty list.
    """
    centers = np.asarray(centers, dtype=np.float64)
    if centers.size == 0:
        return []
    if shape_scale <= 0:
        raise ValueError("shape scale must be positive")
    shapes = rng.uniform(-shape_scale, shape_scale, size=centers.shape)
    return LocalizedDictionary(centers, shapes, reference)
