"""Independent checks of the smoother invariants and small exact-solution oracles.

Everything here evaluates fields through the mesh affine maps and fresh
quadrature, independent of the reference tables inside ``smoother``. The
check functions return the largest absolute violation; callers pick
tolerances.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .dgcore import DGSpace
from .mesh import TriangleMesh, lagrange_numbering
from .polyref import monomial_exponents, quad_edge, quad_triangle, triangle_basis
from .smoother import SmoothedField


def _to_reference(mesh: TriangleMesh, cells, points):
    Jinv = np.linalg.inv(mesh.jacobians[cells])
    return np.einsum("nde,ne->nd", Jinv, points - mesh.offsets[cells])


def _broken_values(mesh, degree, coeffs, cells, points, grad=False):
    """Values (n, 2), or gradients (n, 2, 2), of broken coefficients in given cells."""
    basis = triangle_basis(degree)
    ref = _to_reference(mesh, cells, points)
    c = np.asarray(coeffs).reshape(mesh.n_triangles, len(basis), 2)[cells]
    if not grad:
        return np.einsum("ni,nic->nc", basis.values(ref), c)
    Jinv = np.linalg.inv(mesh.jacobians[cells])
    g = np.einsum("nie,ned->nid", basis.gradients(ref), Jinv)
    return np.einsum("nid,nic->ncd", g, c)


def _child_samples(sf: SmoothedField, degree: int):
    """Quadrature on every child: points, weights, parent cells, E values and gradients."""
    comp = sf.companion
    rule = quad_triangle(degree)
    nq = len(rule)
    pts = comp.offsets[:, None, :] + np.einsum("kde,qe->kqd", comp.jacobians, rule.points)
    wts = np.outer(2.0 * comp.areas, rule.weights)
    cells = np.repeat(np.arange(comp.n_triangles), nq)
    flat = pts.reshape(-1, 2)
    coeffs = sf.field.coeffs
    val = _broken_values(comp, sf.degree, coeffs, cells, flat)
    grd = _broken_values(comp, sf.degree, coeffs, cells, flat, grad=True)
    parent = np.repeat(sf.parent, nq)
    return flat, wts.ravel(), parent, val, grd


def conformity_defect(sf: SmoothedField, degree: int | None = None) -> float:
    """Largest jump across companion faces and largest trace on the boundary."""
    comp = sf.companion
    rule = quad_edge(degree or 2 * sf.degree)
    fv = comp.face_vertices
    a, b = comp.vertices[fv[:, 0]], comp.vertices[fv[:, 1]]
    pts = a[:, None, :] + rule.points[None, :, None] * (b - a)[:, None, :]
    nq = len(rule)
    coeffs = sf.field.coeffs
    side = []
    for s in (0, 1):
        K = np.repeat(comp.face_elements[:, s], nq)
        ok = K >= 0
        val = np.zeros((len(K), 2))
        val[ok] = _broken_values(comp, sf.degree, coeffs, K[ok], pts.reshape(-1, 2)[ok])
        side.append(val)
    return float(np.abs(side[0] - side[1]).max())


def _face_points(mesh: TriangleMesh, faces, rule):
    fv = mesh.face_vertices[faces]
    a, b = mesh.vertices[fv[:, 0]], mesh.vertices[fv[:, 1]]
    return a[:, None, :] + rule.points[None, :, None] * (b - a)[:, None, :]


def face_moment_defect(v, sf: SmoothedField) -> float:
    """``max |int_F (E v - {v}) t^a|`` over interior faces and ``a <= ell - 1``."""
    mesh, ell = sf.base_mesh, sf.base_degree
    faces = mesh.interior_faces
    if len(faces) == 0:
        return 0.0
    rule = quad_edge(2 * ell + 4)
    nq = len(rule)
    pts = _face_points(mesh, faces, rule).reshape(-1, 2)
    K1 = np.repeat(mesh.face_elements[faces, 0], nq)
    K2 = np.repeat(mesh.face_elements[faces, 1], nq)
    avg = 0.5 * (_broken_values(mesh, ell, v, K1, pts) + _broken_values(mesh, ell, v, K2, pts))
    # trace of E taken from the children of K1
    comp = sf.companion
    kids = 3 * K1[:, None] + np.arange(3)[None, :]
    lam = []
    for j in range(3):
        ref = _to_reference(comp, kids[:, j], pts)
        lam.append(np.column_stack([1 - ref.sum(1), ref]).min(1))
    child = kids[np.arange(len(pts)), np.argmax(np.column_stack(lam), axis=1)]
    ev = _broken_values(comp, sf.degree, sf.field.coeffs, child, pts)
    diff = (ev - avg).reshape(len(faces), nq, 2)
    hF = mesh.face_diameters[faces]
    powers = rule.points[:, None] ** np.arange(ell)[None, :]
    mom = np.einsum("q,fqc,qa,f->fac", rule.weights, diff, powers, hF)
    return float(np.abs(mom).max())


def _parent_monomials(mesh, parent, pts, degree):
    ref = _to_reference(mesh, parent, pts)
    exps = monomial_exponents(degree)
    return np.column_stack([ref[:, 0] ** i * ref[:, 1] ** j for i, j in exps])


def element_moment_defect(v, sf: SmoothedField) -> float:
    """``max |int_K (E v - v) m|`` over ``m`` in ``P_{ell-2}(K)``, per component."""
    mesh, ell = sf.base_mesh, sf.base_degree
    if ell < 2:
        return 0.0
    pts, w, parent, ev, _ = _child_samples(sf, 2 * ell + 4)
    diff = ev - _broken_values(mesh, ell, v, parent, pts)
    m = _parent_monomials(mesh, parent, pts, ell - 2)
    mom = np.zeros((mesh.n_triangles, m.shape[1], 2))
    np.add.at(mom, parent, np.einsum("n,na,nc->nac", w, m, diff))
    return float(np.abs(mom).max())


def gradient_moment_defect(v, sf: SmoothedField) -> float:
    """``max |int_K (E v - v) . grad q|`` over ``q`` in ``P_{ell-1}(K)``."""
    mesh, ell = sf.base_mesh, sf.base_degree
    pts, w, parent, ev, _ = _child_samples(sf, 2 * ell + 4)
    diff = ev - _broken_values(mesh, ell, v, parent, pts)
    ref = _to_reference(mesh, parent, pts)
    Jinv = np.linalg.inv(mesh.jacobians[parent])
    out = 0.0
    for i, j in monomial_exponents(ell - 1):
        if i + j == 0:
            continue
        dx = i * ref[:, 0] ** max(i - 1, 0) * ref[:, 1] ** j
        dy = j * ref[:, 0] ** i * ref[:, 1] ** max(j - 1, 0)
        g = np.einsum("ne,ned->nd", np.column_stack([dx, dy]), Jinv)
        mom = np.zeros(mesh.n_triangles)
        np.add.at(mom, parent, w * np.einsum("nd,nd->n", g, diff))
        out = max(out, float(np.abs(mom).max()))
    return out


def divergence_defect(v, sf: SmoothedField) -> float:
    """Largest ``|div E v - Div_dG v|`` over child quadrature points."""
    mesh, ell = sf.base_mesh, sf.base_degree
    space = DGSpace(mesh, ell)
    q = (space.divergence_matrix @ np.asarray(v).ravel()).reshape(mesh.n_triangles, -1)
    pts, _, parent, _, eg = _child_samples(sf, 2 * ell + 2)
    ref = _to_reference(mesh, parent, pts)
    dq = np.einsum("ni,ni->n", space.pressure_basis.values(ref), q[parent])
    return float(np.abs(eg[:, 0, 0] + eg[:, 1, 1] - dq).max())


def fixed_point_defect(v, sf: SmoothedField) -> float:
    """Largest ``|E v - v|`` at child quadrature points."""
    pts, _, parent, ev, _ = _child_samples(sf, 2 * sf.degree)
    return float(np.abs(ev - _broken_values(sf.base_mesh, sf.base_degree, v, parent, pts)).max())


def random_conforming(mesh: TriangleMesh, ell: int, rng) -> np.ndarray:
    """Random continuous ``P_ell`` field with zero trace, as broken coefficients."""
    num = lagrange_numbering(mesh, ell)
    g = rng.standard_normal((num.n_nodes, 2))
    g[num.on_boundary] = 0.0
    return g[num.element_nodes]


def l2_distance(v, sf: SmoothedField) -> float:
    """``||v - E v||_{L2}`` over the whole domain."""
    pts, w, parent, ev, _ = _child_samples(sf, 2 * sf.degree)
    diff = ev - _broken_values(sf.base_mesh, sf.base_degree, v, parent, pts)
    return float(np.sqrt(w @ (diff ** 2).sum(1)))


def conforming_kernel(mesh: TriangleMesh, ell: int = 1) -> np.ndarray:
    """Orthonormal basis of divergence-free continuous ``P_ell`` fields with zero trace.

    Brute force: the dense ``Div_dG`` matrix restricted to the conforming
    subspace and a dense null space. Returns shape ``(k, nT, nb, 2)``.
    """
    num = lagrange_numbering(mesh, ell)
    nG, nT = num.n_nodes, mesh.n_triangles
    nb = num.element_nodes.shape[1]
    embed = np.zeros((nT * nb * 2, 2 * nG))
    rows = np.arange(nT * nb * 2).reshape(nT, nb, 2)
    for c in range(2):
        embed[rows[..., c].ravel(), 2 * num.element_nodes.ravel() + c] = 1.0
    free = np.flatnonzero(~np.repeat(num.on_boundary, 2))
    D = DGSpace(mesh, ell).divergence_matrix.toarray() @ embed
    Z = sla.null_space(D[:, free])
    full = np.zeros((2 * nG, Z.shape[1]))
    full[free] = Z
    return (embed @ full).T.reshape(-1, nT, nb, 2)


def broken_evaluator(mesh: TriangleMesh, degree: int, coeffs):
    """Callables ``u(x)`` and ``grad_u(x)`` for a broken field at physical points.

    Points are located by brute force, which suits the small meshes of the
    exact-reproduction checks.
    """
    coeffs = np.asarray(coeffs).reshape(mesh.n_triangles, -1, 2)
    Jinv = np.linalg.inv(mesh.jacobians)

    def locate(x):
        ref = np.einsum("kde,nke->nkd", Jinv, x[:, None, :] - mesh.offsets[None])
        lam = np.concatenate([1 - ref.sum(-1, keepdims=True), ref], axis=-1).min(-1)
        return np.argmax(lam, axis=1)

    def u(x):
        x = np.atleast_2d(x)
        return _broken_values(mesh, degree, coeffs, locate(x), x)

    def grad_u(x):
        x = np.atleast_2d(x)
        return _broken_values(mesh, degree, coeffs, locate(x), x, grad=True)

    return u, grad_u
