"""Reference-element polynomials, quadrature and Piola transforms."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.signal import convolve2d
from scipy.special import roots_jacobi

from .mesh import AffineMap, lattice_indices

MAX_QUAD_DEGREE = 60


# --------------------------------------------------------------------------
# bivariate polynomials
# --------------------------------------------------------------------------
class Polynomial:
    """Bivariate polynomial ``sum C[a, b] x^a y^b`` with exact coefficient calculus."""

    __slots__ = ("coef",)

    def __init__(self, coef):
        c = np.atleast_2d(np.asarray(coef, dtype=float))
        self.coef = c

    @classmethod
    def monomial(cls, a: int, b: int, scale: float = 1.0) -> "Polynomial":
        c = np.zeros((a + 1, b + 1))
        c[a, b] = scale
        return cls(c)

    @classmethod
    def constant(cls, value: float) -> "Polynomial":
        return cls([[value]])

    @property
    def degree(self) -> int:
        nz = np.argwhere(np.abs(self.coef) > 0)
        return int(nz.sum(axis=1).max()) if len(nz) else 0

    def __call__(self, x, y):
        return npoly.polyval2d(x, y, self.coef)

    def _padded(self, other):
        s = (max(self.coef.shape[0], other.coef.shape[0]),
             max(self.coef.shape[1], other.coef.shape[1]))
        a = np.zeros(s)
        b = np.zeros(s)
        a[:self.coef.shape[0], :self.coef.shape[1]] = self.coef
        b[:other.coef.shape[0], :other.coef.shape[1]] = other.coef
        return a, b

    def __add__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(other)
        a, b = self._padded(other)
        return Polynomial(a + b)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(-self.coef)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Polynomial) else -float(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            return Polynomial(convolve2d(self.coef, other.coef))
        return Polynomial(self.coef * other)

    __rmul__ = __mul__

    def diff(self, axis: int) -> "Polynomial":
        if self.coef.shape[axis] == 1:
            return Polynomial(np.zeros((1, 1)))
        return Polynomial(npoly.polyder(self.coef, axis=axis))

    def is_zero(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.coef) <= tol))


def curl_scalar(w: Polynomial) -> tuple[Polynomial, Polynomial]:
    """``Curl w = (d2 w, -d1 w)``."""
    return w.diff(1), -w.diff(0)


def rot_vector(v) -> Polynomial:
    """``Rot v = -d2 v1 + d1 v2``."""
    v1, v2 = v
    return v2.diff(0) - v1.diff(1)


def div_vector(v) -> Polynomial:
    v1, v2 = v
    return v1.diff(0) + v2.diff(1)


def grad_scalar(q: Polynomial) -> tuple[Polynomial, Polynomial]:
    return q.diff(0), q.diff(1)


def monomial_exponents(p: int) -> list[tuple[int, int]]:
    """Exponents of ``x^a y^b`` with ``a + b <= p``, graded order."""
    return [(d - b, b) for d in range(p + 1) for b in range(d + 1)]


def _vandermonde(points, exps):
    x, y = points[:, 0], points[:, 1]
    return np.stack([x ** a * y ** b for a, b in exps], axis=1)


def _vandermonde_grad(points, exps):
    x, y = points[:, 0], points[:, 1]
    dx = np.stack([a * x ** max(a - 1, 0) * y ** b for a, b in exps], axis=1)
    dy = np.stack([b * x ** a * y ** max(b - 1, 0) for a, b in exps], axis=1)
    return np.stack([dx, dy], axis=2)


# --------------------------------------------------------------------------
# Lagrange bases
# --------------------------------------------------------------------------
def lagrange_nodes(p: int) -> np.ndarray:
    if p == 0:
        return np.array([[1.0 / 3.0, 1.0 / 3.0]])
    lat = lattice_indices(p)
    return lat[:, 1:].astype(float) / p


class TriangleBasis:
    """Nodal Lagrange basis of ``P_p`` on the reference triangle."""

    def __init__(self, degree: int):
        if degree < 0:
            raise ValueError("degree must be >= 0")
        self.degree = degree
        self.nodes = lagrange_nodes(degree)
        self.exponents = monomial_exponents(degree)
        V = _vandermonde(self.nodes, self.exponents)
        self.coefficients = np.linalg.inv(V)   # column i: monomial coefficients of phi_i

    def __len__(self):
        return len(self.nodes)

    def values(self, points) -> np.ndarray:
        """(n_points, n_basis)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return _vandermonde(points, self.exponents) @ self.coefficients

    def gradients(self, points) -> np.ndarray:
        """(n_points, n_basis, 2)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        G = _vandermonde_grad(points, self.exponents)
        return np.einsum("pmd,mi->pid", G, self.coefficients)

    def polynomial(self, i: int) -> Polynomial:
        c = np.zeros((self.degree + 1, self.degree + 1))
        for m, (a, b) in enumerate(self.exponents):
            c[a, b] = self.coefficients[m, i]
        return Polynomial(c)


class EdgeBasis:
    """Nodal Lagrange basis of ``P_m`` on ``[0, 1]`` (node 0.5 for ``m = 0``)."""

    def __init__(self, degree: int):
        if degree < 0:
            raise ValueError("degree must be >= 0")
        self.degree = degree
        self.nodes = np.array([0.5]) if degree == 0 else np.linspace(0.0, 1.0, degree + 1)
        V = np.vander(self.nodes, degree + 1, increasing=True)
        self.coefficients = np.linalg.inv(V)

    def __len__(self):
        return len(self.nodes)

    def values(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.vander(t, self.degree + 1, increasing=True) @ self.coefficients


@lru_cache(maxsize=None)
def triangle_basis(degree: int) -> TriangleBasis:
    return TriangleBasis(degree)


@lru_cache(maxsize=None)
def edge_basis(degree: int) -> EdgeBasis:
    return EdgeBasis(degree)


# --------------------------------------------------------------------------
# quadrature
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray
    weights: np.ndarray
    exactness: int

    def __len__(self):
        return len(self.weights)


@lru_cache(maxsize=None)
def quad_edge(degree: int) -> QuadRule:
    """Gauss-Legendre rule on ``[0, 1]``."""
    if degree < 0:
        raise ValueError("degree must be >= 0")
    if degree > MAX_QUAD_DEGREE:
        raise ValueError(f"edge quadrature available up to degree {MAX_QUAD_DEGREE}")
    n = max(1, math.ceil((degree + 1) / 2))
    x, w = np.polynomial.legendre.leggauss(n)
    return QuadRule(0.5 * (x + 1.0), 0.5 * w, 2 * n - 1)


@lru_cache(maxsize=None)
def quad_triangle(degree: int) -> QuadRule:
    """Positive-weight rule on the reference triangle, exact up to ``degree``.

    Degrees 1 and 2 use the centroid and the three-point symmetric rule;
    higher degrees use the collapsed (Gauss-Jacobi x Gauss-Legendre) product.
    """
    if degree < 0:
        raise ValueError("degree must be >= 0")
    if degree > MAX_QUAD_DEGREE:
        raise ValueError(f"triangle quadrature available up to degree {MAX_QUAD_DEGREE}")
    if degree <= 1:
        return QuadRule(np.array([[1 / 3, 1 / 3]]), np.array([0.5]), 1)
    if degree == 2:
        pts = np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]])
        return QuadRule(pts, np.full(3, 1 / 6), 2)
    n = math.ceil((degree + 1) / 2)
    s, ws = np.polynomial.legendre.leggauss(n)
    s, ws = 0.5 * (s + 1.0), 0.5 * ws
    t, wt = roots_jacobi(n, 1.0, 0.0)
    y, wy = 0.5 * (t + 1.0), 0.25 * wt
    S, Y = np.meshgrid(s, y, indexing="ij")
    W = np.outer(ws, wy)
    pts = np.column_stack([(S * (1.0 - Y)).ravel(), Y.ravel()])
    return QuadRule(pts, W.ravel(), 2 * n - 1)


def triangle_monomial_integral(a: int, b: int) -> float:
    """Exact ``int_{K_ref} x^a y^b = a! b! / (a + b + 2)!``."""
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


# --------------------------------------------------------------------------
# decomposition P_k^2 = grad P_{k+1} + x_perp P_{k-1}
# --------------------------------------------------------------------------
def xperp(r: Polynomial) -> tuple[Polynomial, Polynomial]:
    x = Polynomial.monomial(1, 0)
    y = Polynomial.monomial(0, 1)
    return -(y * r), x * r


@dataclass(frozen=True)
class PolyDecompBasis:
    degree: int
    gradient_part: tuple
    rotational_part: tuple

    @property
    def combined(self) -> tuple:
        return self.gradient_part + self.rotational_part


@lru_cache(maxsize=None)
def poly_decomp_basis(k: int) -> PolyDecompBasis:
    grads = tuple(grad_scalar(Polynomial.monomial(a, b))
                  for a, b in monomial_exponents(k + 1) if a + b > 0)
    rots = tuple(xperp(Polynomial.monomial(a, b))
                 for a, b in monomial_exponents(k - 1)) if k >= 1 else ()
    return PolyDecompBasis(k, grads, rots)


def vector_gram(fields, rule: QuadRule | None = None) -> np.ndarray:
    """L2(K_ref) Gram matrix of vector polynomials."""
    if rule is None:
        deg = max(max(c.degree for c in f) for f in fields) if fields else 0
        rule = quad_triangle(2 * deg)
    x, y = rule.points[:, 0], rule.points[:, 1]
    vals = np.array([[c(x, y) for c in f] for f in fields])   # (n, 2, q)
    return np.einsum("icq,jcq,q->ij", vals, vals, rule.weights)


# --------------------------------------------------------------------------
# Piola transforms
# --------------------------------------------------------------------------
def _check(amap: AffineMap):
    if amap.jacobian_abs <= 0.0 or abs(np.linalg.det(amap.matrix)) <= 1e-300:
        raise ValueError("singular affine map")


def piola_con(amap: AffineMap, v_ref):
    """Contravariant Piola: ``x -> J^-1 DF v_ref(F^-1 x)``."""
    _check(amap)
    M = amap.matrix / amap.jacobian_abs
    return lambda x: v_ref(amap.inverse(x)) @ M.T


def piola_cov(amap: AffineMap, w_ref):
    """Covariant Piola: ``x -> DF^-T w_ref(F^-1 x)``."""
    _check(amap)
    M = np.linalg.inv(amap.matrix).T
    return lambda x: w_ref(amap.inverse(x)) @ M.T


def piola_con_inverse(amap: AffineMap, v):
    """Inverse contravariant Piola: ``xi -> J DF^-1 v(F xi)``."""
    _check(amap)
    M = amap.jacobian_abs * np.linalg.inv(amap.matrix)
    return lambda xi: v(amap(xi)) @ M.T


def piola_cov_inverse(amap: AffineMap, w):
    _check(amap)
    M = amap.matrix.T
    return lambda xi: w(amap(xi)) @ M.T
