import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import dblquad

from dgstokes.mesh import AffineMap
from dgstokes.polyref import (
    Polynomial, curl_scalar, edge_basis, grad_scalar, monomial_exponents, piola_con,
    piola_con_inverse, piola_cov, piola_cov_inverse, poly_decomp_basis, quad_edge,
    quad_triangle, rot_vector, triangle_basis, triangle_monomial_integral, vector_gram, xperp,
)


def exact_monomial(a, b):
    # Beta-function closed form, written independently of the package helper
    return 1.0 / ((a + b + 2) * (a + b + 1) * math.comb(a + b, a))


def test_centroid_and_three_point_rules():
    r1 = quad_triangle(1)
    assert len(r1) == 1 and r1.weights[0] == pytest.approx(0.5)
    r2 = quad_triangle(2)
    x, y = r2.points.T
    assert r2.weights @ (x * y) == pytest.approx(1 / 24, abs=1e-15)


def test_degree_14_rule():
    r = quad_triangle(14)
    x, y = r.points.T
    assert r.weights @ (x ** 7 * y ** 7) == pytest.approx(exact_monomial(7, 7), rel=1e-12)
    assert exact_monomial(7, 7) == pytest.approx(
        math.factorial(7) ** 2 / math.factorial(16), rel=1e-15)


def test_monomial_oracle_matches_adaptive_quadrature():
    for a, b in [(0, 0), (2, 1), (3, 4)]:
        val, _ = dblquad(lambda y, x: x ** a * y ** b, 0, 1, 0, lambda x: 1 - x)
        assert triangle_monomial_integral(a, b) == pytest.approx(val, rel=1e-10)


@given(st.integers(0, 20), st.data())
def test_triangle_rule_exactness(degree, data):
    a = data.draw(st.integers(0, degree))
    b = degree - a
    r = quad_triangle(max(degree, 1))
    assert np.all(r.weights > 0) and np.all(r.points >= 0) and np.all(r.points.sum(1) <= 1)
    x, y = r.points.T
    assert r.weights @ (x ** a * y ** b) == pytest.approx(exact_monomial(a, b), rel=1e-12)


def test_edge_rules():
    assert len(quad_edge(1)) == 1 and quad_edge(1).weights[0] == 1.0
    r = quad_edge(2)
    assert len(r) == 2 and r.weights @ r.points ** 2 == pytest.approx(1 / 3, abs=1e-15)
    r5 = quad_edge(9)
    assert len(r5) == 5 and abs(r5.weights @ r5.points ** 9 - 0.1) < 1e-14


def test_quadrature_degree_limits():
    with pytest.raises(ValueError):
        quad_triangle(61)
    with pytest.raises(ValueError):
        quad_edge(-1)


@pytest.mark.parametrize("p", [0, 1, 2, 3, 4, 5])
def test_lagrange_bases(p):
    basis = triangle_basis(p)
    assert len(basis) == (p + 1) * (p + 2) // 2
    assert np.allclose(basis.values(basis.nodes), np.eye(len(basis)), atol=1e-12)
    pts = np.random.default_rng(p).dirichlet(np.ones(3), 20)[:, 1:]
    assert np.allclose(basis.values(pts).sum(1), 1.0, atol=1e-12)
    assert np.allclose(basis.gradients(pts).sum(1), 0.0, atol=1e-10)
    eb = edge_basis(p)
    assert np.allclose(eb.values(eb.nodes), np.eye(p + 1), atol=1e-12)
    assert np.allclose(eb.values(np.linspace(0, 1, 7)).sum(1), 1.0, atol=1e-12)


def test_basis_gradients_match_finite_differences():
    basis = triangle_basis(3)
    x = np.array([[0.21, 0.33]])
    eps = 1e-6
    fd = np.stack([(basis.values(x + [eps, 0]) - basis.values(x - [eps, 0])) / (2 * eps),
                   (basis.values(x + [0, eps]) - basis.values(x - [0, eps])) / (2 * eps)], -1)
    assert np.allclose(basis.gradients(x), fd, atol=1e-7)


def test_curl_and_rot_examples():
    x, y = Polynomial.monomial(1, 0), Polynomial.monomial(0, 1)
    c1, c2 = curl_scalar(x * y)
    pts = np.random.default_rng(0).random((5, 2))
    assert np.allclose(c1(*pts.T), pts[:, 0]) and np.allclose(c2(*pts.T), -pts[:, 1])
    assert np.allclose(rot_vector(xperp(Polynomial.constant(1.0)))(*pts.T), 2.0)


@given(st.lists(st.floats(-3, 3), min_size=15, max_size=15))
def test_rot_of_gradient_vanishes(coefs):
    q = sum((c * Polynomial.monomial(a, b) for c, (a, b) in zip(coefs, monomial_exponents(4))),
            Polynomial.constant(0.0))
    assert rot_vector(grad_scalar(q)).is_zero(1e-12)


@pytest.mark.parametrize("k", [0, 1, 2, 3, 4])
def test_decomposition_dimensions(k):
    dec = poly_decomp_basis(k)
    assert len(dec.combined) == (k + 1) * (k + 2)
    G = vector_gram(list(dec.combined))
    assert np.linalg.matrix_rank(G) == len(dec.combined)
    if k >= 1:
        # Rot is injective on x_perp P_{k-1}: coefficient images are independent
        rots = [rot_vector(v).coef for v in dec.rotational_part]
        size = max(r.shape[0] for r in rots), max(r.shape[1] for r in rots)
        mat = np.zeros((len(rots), size[0] * size[1]))
        for i, r in enumerate(rots):
            pad = np.zeros(size)
            pad[:r.shape[0], :r.shape[1]] = r
            mat[i] = pad.ravel()
        assert np.linalg.matrix_rank(mat) == len(rots)


def _random_map(rng):
    while True:
        M = rng.standard_normal((2, 2))
        if abs(np.linalg.det(M)) > 0.2:
            if np.linalg.det(M) < 0:
                M[:, [0, 1]] = M[:, [1, 0]]
            return AffineMap(M, rng.standard_normal(2), abs(float(np.linalg.det(M))))


def _random_p2_field(rng):
    cx, cy = rng.standard_normal((2, 6))
    exps = monomial_exponents(2)

    def f(x):
        V = np.stack([x[:, 0] ** a * x[:, 1] ** b for a, b in exps], 1)
        return np.column_stack([V @ cx, V @ cy])
    return f


def test_piola_identity_and_scaling_examples():
    ident = AffineMap(np.eye(2), np.zeros(2), 1.0)
    v = lambda x: np.column_stack([x[:, 1], x[:, 0] ** 2])
    pts = np.random.default_rng(1).random((4, 2))
    assert np.allclose(piola_con(ident, v)(pts), v(pts))
    assert np.allclose(piola_cov(ident, v)(pts), v(pts))
    h = 0.5
    scaled = AffineMap(h * np.eye(2), np.zeros(2), h * h)
    assert np.allclose(piola_con(scaled, v)(pts), v(pts / h) / h)


@given(st.integers(0, 10_000))
def test_piola_duality(seed):
    rng = np.random.default_rng(seed)
    amap = _random_map(rng)
    v, w = _random_p2_field(rng), _random_p2_field(rng)
    r = quad_triangle(4)
    ref = np.einsum("q,qc,qc->", r.weights, v(r.points), w(r.points))
    x = amap(r.points)
    phys = amap.jacobian_abs * np.einsum(
        "q,qc,qc->", r.weights, piola_con(amap, v)(x), piola_cov(amap, w)(x))
    assert phys == pytest.approx(ref, rel=1e-12, abs=1e-12)
    assert np.allclose(piola_con_inverse(amap, piola_con(amap, v))(r.points), v(r.points))
    assert np.allclose(piola_cov_inverse(amap, piola_cov(amap, w))(r.points), w(r.points))


@given(st.integers(0, 10_000))
def test_piola_divergence_and_scaling(seed):
    rng = np.random.default_rng(seed)
    amap = _random_map(rng)
    v = _random_p2_field(rng)
    # divergence identity by central differences
    xi = rng.dirichlet(np.ones(3), 3)[:, 1:]
    x = amap(xi)
    pv = piola_con(amap, v)
    eps = 1e-5
    div_phys = sum((pv(x + eps * e)[:, i] - pv(x - eps * e)[:, i]) / (2 * eps)
                   for i, e in enumerate(np.eye(2)))
    xr = amap.inverse(x)
    div_ref = sum((v(xr + eps * e)[:, i] - v(xr - eps * e)[:, i]) / (2 * eps)
                  for i, e in enumerate(np.eye(2)))
    assert np.allclose(div_phys, div_ref / amap.jacobian_abs, rtol=1e-6, atol=1e-6)
    # L2 scaling bound
    r = quad_triangle(4)
    ref_norm = np.sqrt(r.weights @ (v(r.points) ** 2).sum(1))
    phys_norm = np.sqrt(amap.jacobian_abs * r.weights @ (pv(amap(r.points)) ** 2).sum(1))
    corners = amap(np.array([[0, 0], [1, 0], [0, 1.0]]))
    hK = max(np.linalg.norm(corners[i] - corners[j]) for i in range(3) for j in range(i))
    sharp = np.linalg.norm(amap.matrix, 2) / np.sqrt(amap.jacobian_abs) * ref_norm
    assert phys_norm <= sharp * (1 + 1e-12)
    # |DF| <= h_K / rho_ref with rho_ref the inscribed diameter of K_ref
    rho_ref = 2.0 - np.sqrt(2.0)
    assert phys_norm <= hK / rho_ref / np.sqrt(amap.jacobian_abs) * ref_norm * (1 + 1e-12)


def test_singular_map_rejected():
    bad = AffineMap(np.zeros((2, 2)), np.zeros(2), 0.0)
    with pytest.raises(ValueError):
        piola_con(bad, lambda x: x)
