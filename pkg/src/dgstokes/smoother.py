"""Smoothing operators mapping broken dG test functions into H^1_0.

Every smoothed field lives on the Alfeld split of the base mesh and is stored
as degree ``ell + 2`` Lagrange values per child triangle, array shape
``(nT, 3, nS, 2)`` with child ``3K + j`` spanned by ``(v_j, v_{j+1}, b_K)``.

The operators are never assembled. :class:`Smoother` exposes ``apply`` and
``apply_transpose``; the latter turns a load vector tested against the
companion basis into ``<f, E Phi_i>`` for all broken basis functions at once.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .dgcore import BrokenField, DGSpace, edge_reference_points
from .mesh import REFERENCE_VERTICES, TriangleMesh, alfeld_split, lagrange_numbering, reference_mesh
from .polyref import (
    Polynomial,
    curl_scalar,
    edge_basis,
    lagrange_nodes,
    monomial_exponents,
    quad_edge,
    quad_triangle,
    rot_vector,
    triangle_basis,
    xperp,
)

MEAN_TOL = 1e-9


class SmootherVariant(enum.Enum):
    IDENTITY = "stnd"
    QUASI_OPTIMAL = "qopt"
    PRESSURE_ROBUST = "prob"


# ---------------------------------------------------------------------------
# reference Alfeld split
# ---------------------------------------------------------------------------
BARYCENTER = REFERENCE_VERTICES.mean(axis=0)


def child_maps() -> tuple[np.ndarray, np.ndarray]:
    """Affine maps ``G_j`` of the reference children, ``xi = A_j eta + o_j``."""
    A = np.empty((3, 2, 2))
    o = np.empty((3, 2))
    for j in range(3):
        a, b = REFERENCE_VERTICES[j], REFERENCE_VERTICES[(j + 1) % 3]
        A[j] = np.column_stack([b - a, BARYCENTER - a])
        o[j] = a
    return A, o


def child_points(ref_points) -> np.ndarray:
    """Images of child-reference points in every child, shape (3, n, 2)."""
    A, o = child_maps()
    return np.einsum("jde,ne->jnd", A, np.asarray(ref_points, float)) + o[:, None, :]


def barycentric(points) -> np.ndarray:
    p = np.asarray(points, float)
    return np.stack([1.0 - p[..., 0] - p[..., 1], p[..., 0], p[..., 1]], axis=-1)


def bubble_polynomial() -> Polynomial:
    """Cubic bubble ``lambda_0 lambda_1 lambda_2`` of the reference triangle."""
    x = Polynomial.monomial(1, 0)
    y = Polynomial.monomial(0, 1)
    return (1.0 - x - y) * x * y


def _child_rule(degree: int):
    """Children-wise quadrature on K_ref: points (3, q, 2) and weights (3, q)."""
    rule = quad_triangle(degree)
    A, _ = child_maps()
    det = np.abs(np.linalg.det(A))
    return rule, child_points(rule.points), det[:, None] * rule.weights[None, :]


# ---------------------------------------------------------------------------
# smoothed fields
# ---------------------------------------------------------------------------
@dataclass
class SmoothedField:
    """Piecewise ``P_{ell+2}`` field on the Alfeld-split companion mesh."""

    base_mesh: TriangleMesh
    companion: TriangleMesh
    parent: np.ndarray
    base_degree: int
    coeffs: np.ndarray            # (nT, 3, nS, 2)
    conforming: bool = True

    @property
    def degree(self) -> int:
        return self.base_degree + 2

    @property
    def field(self) -> BrokenField:
        nS = self.coeffs.shape[2]
        return BrokenField(self.companion, self.degree, self.coeffs.reshape(-1, nS, 2))

    def __add__(self, other: "SmoothedField") -> "SmoothedField":
        return SmoothedField(self.base_mesh, self.companion, self.parent, self.base_degree,
                             self.coeffs + other.coeffs, self.conforming and other.conforming)

    def evaluate(self, points) -> np.ndarray:
        """Values at physical points (searches the containing child triangle)."""
        pts = np.atleast_2d(np.asarray(points, float))
        mesh = self.companion
        out = np.empty((len(pts), 2))
        Jinv = np.linalg.inv(mesh.jacobians)
        basis = triangle_basis(self.degree)
        flat = self.coeffs.reshape(-1, self.coeffs.shape[2], 2)
        for n, x in enumerate(pts):
            ref = np.einsum("kde,ke->kd", Jinv, x[None, :] - mesh.offsets)
            lam = barycentric(ref)
            k = int(np.argmax(lam.min(axis=1)))
            out[n] = basis.values(ref[k][None])[0] @ flat[k]
        return out


# ---------------------------------------------------------------------------
# reference operators
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class E3RefOperator:
    """Minimal-gradient lift of ``P_ell(M_ref)`` pressures into ``L_{ell+1}(M_ref)^2``.

    ``matrix`` maps nodal values of ``q_ref`` at the child ``P_ell`` nodes
    (shape ``3 * n_ell``) to conforming velocity dofs on the split; ``to_children``
    re-expands velocity dofs as child-wise ``P_{ell+2}`` nodal values.
    """

    degree: int
    numbering: object
    interior: np.ndarray             # velocity dofs (node * 2 + comp) free in the solve
    stiffness: np.ndarray            # full vector stiffness on all dofs
    divergence: np.ndarray           # (3 n_ell, 2 nG) nodal divergence
    weights: np.ndarray              # integrals of the child P_ell nodal basis
    matrix: np.ndarray               # (2 nG, 3 n_ell)
    to_children: np.ndarray          # (3, nS, 2, 3 n_ell)

    def __call__(self, q) -> np.ndarray:
        return self.matrix @ np.asarray(q, float)


@lru_cache(maxsize=None)
def build_e3_ref(ell: int) -> E3RefOperator:
    if ell < 1:
        raise ValueError("ell must be >= 1")
    split, _ = alfeld_split(reference_mesh())
    p = ell + 1
    num = lagrange_numbering(split, p)
    nG = num.n_nodes
    space = DGSpace(split, p)
    Kloc = space.stiffness_blocks                         # (3, n1, n1)
    en = num.element_nodes
    S = np.zeros((nG, nG))
    for j in range(3):
        S[np.ix_(en[j], en[j])] += Kloc[j]
    A = np.kron(S, np.eye(2))                             # dof = node * 2 + comp

    # div at child P_ell nodes is exact (degree ell)
    nodes_q = lagrange_nodes(ell)
    nq = len(nodes_q)
    grads = triangle_basis(p).gradients(nodes_q)           # (nq, n1, 2) child-reference
    Jinv = np.linalg.inv(split.jacobians)
    D = np.zeros((3 * nq, 2 * nG))
    for j in range(3):
        g = np.einsum("qie,ed->qid", grads, Jinv[j])
        for c in range(2):
            np.add.at(D, (np.arange(nq)[:, None] + j * nq, 2 * en[j][None, :] + c), g[:, :, c])
    qrule = quad_triangle(max(ell, 1))
    wloc = triangle_basis(ell).values(qrule.points).T @ qrule.weights
    weights = np.concatenate([2.0 * split.areas[j] * wloc for j in range(3)])

    free = np.flatnonzero(~np.repeat(num.on_boundary, 2))
    Q = sla.null_space(weights[None, :])                  # orthonormal basis of 1-perp
    Di = Q.T @ D[:, free]
    Ai = A[np.ix_(free, free)]
    m = Q.shape[1]
    K = np.block([[Ai, Di.T], [Di, np.zeros((m, m))]])
    if np.linalg.matrix_rank(K) < K.shape[0]:
        raise RuntimeError("E3 reference saddle-point system is rank deficient")
    rhs = np.vstack([np.zeros((len(free), 3 * nq)), Q.T])
    sol = np.linalg.solve(K, rhs)[: len(free)]
    X = np.zeros((2 * nG, 3 * nq))
    X[free] = sol

    nodes_s = lagrange_nodes(ell + 2)
    interp = triangle_basis(p).values(nodes_s)            # (nS, n1)
    Xn = X.reshape(nG, 2, 3 * nq)
    to_children = np.einsum("si,jicm->jscm", interp, Xn[en])
    return E3RefOperator(ell, num, free, A, D, weights, X, to_children)


@dataclass(frozen=True)
class E4RefOperator:
    """Moment solve over ``x_perp P_{ell-3}(K_ref)`` with weight ``b_ref^2``."""

    degree: int
    basis: tuple                     # vector polynomials m_i
    gram: np.ndarray                 # int Rot m_i Rot m_k b^2 (SPD)
    curl_fields: tuple               # Curl(b^2 Rot m_i)

    def solve(self, moments) -> np.ndarray:
        return np.linalg.solve(self.gram, moments)


@lru_cache(maxsize=None)
def build_e4_ref(ell: int) -> E4RefOperator:
    if ell < 3:
        return E4RefOperator(ell, (), np.zeros((0, 0)), ())
    basis = tuple(xperp(Polynomial.monomial(a, b)) for a, b in monomial_exponents(ell - 3))
    b2 = bubble_polynomial() * bubble_polynomial()
    rots = [rot_vector(m) for m in basis]
    rule = quad_triangle(2 * (ell - 3) + 6)
    x, y = rule.points.T
    R = np.array([r(x, y) for r in rots])
    gram = np.einsum("iq,kq,q->ik", R, R, rule.weights * b2(x, y))
    curls = tuple(curl_scalar(b2 * r) for r in rots)
    return E4RefOperator(ell, basis, gram, curls)


# ---------------------------------------------------------------------------
# the operator
# ---------------------------------------------------------------------------
class Smoother:
    """Linear map ``v -> E v`` from broken ``P_ell`` fields to smoothed fields.

    Parameters
    ----------
    mesh : TriangleMesh
    ell : int
        Velocity degree, at least 1.
    variant : SmootherVariant or str
    """

    def __init__(self, mesh: TriangleMesh, ell: int, variant=SmootherVariant.PRESSURE_ROBUST):
        if ell < 1:
            raise ValueError("ell must be >= 1")
        self.mesh = mesh
        self.ell = ell
        self.variant = SmootherVariant(variant)
        self.companion, self.parent = alfeld_split(mesh)
        self.nT = mesh.n_triangles
        self.nb = len(triangle_basis(ell))
        self.nS = len(triangle_basis(ell + 2))
        self.space = DGSpace(mesh, ell)
        self.child_jac = self.companion.jacobians.reshape(self.nT, 3, 2, 2)
        self.child_jac_inv = np.linalg.inv(self.child_jac)
        # P_ell on K evaluated at child P_{ell+2} nodes
        self.interp_table = triangle_basis(ell).values(
            child_points(lagrange_nodes(ell + 2)).reshape(-1, 2)).reshape(3, self.nS, self.nb)

    # ------------------------------------------------------------ containers
    def wrap(self, coeffs, conforming=True) -> SmoothedField:
        return SmoothedField(self.mesh, self.companion, self.parent, self.ell,
                             np.asarray(coeffs).reshape(self.nT, 3, self.nS, 2), conforming)

    def zeros(self) -> np.ndarray:
        return np.zeros((self.nT, 3, self.nS, 2))

    @staticmethod
    def _coeffs(v) -> np.ndarray:
        return v.coeffs if isinstance(v, BrokenField) else np.asarray(v, float)

    # ------------------------------------------------------------ interpolation
    def interp(self, v):
        return np.einsum("jsi,kic->kjsc", self.interp_table, v)

    def interp_t(self, s):
        return np.einsum("jsi,kjsc->kic", self.interp_table, s)

    # ------------------------------------------------------------ E1
    @cached_property
    def averaging(self) -> sp.csr_matrix:
        """Sparse broken -> broken nodal averaging with zero boundary values."""
        num = lagrange_numbering(self.mesh, self.ell)
        cols = np.arange(self.nT * self.nb)
        rows = num.element_nodes.ravel()
        nG = num.n_nodes
        gather = sp.csr_matrix((np.ones(len(cols)), (cols, rows)), shape=(len(cols), nG))
        scale = np.where(num.on_boundary, 0.0, 1.0 / num.multiplicity)
        avg = sp.diags(scale) @ gather.T
        return (gather @ avg).tocsr()

    def e1_local(self, v):
        return (self.averaging @ v.reshape(-1, 2)).reshape(self.nT, self.nb, 2)

    def e1_local_t(self, w):
        return (self.averaging.T @ w.reshape(-1, 2)).reshape(self.nT, self.nb, 2)

    # ------------------------------------------------------------ E2
    @cached_property
    def _e2_data(self):
        ell, mesh = self.ell, self.mesh
        faces = mesh.interior_faces
        rule = quad_edge(2 * ell + 4)
        eb = edge_basis(ell - 1)
        psi = eb.values(rule.points)                                  # (q, m)
        Mb = np.einsum("qa,qb,q->ab", psi, psi, rule.weights * rule.points * (1 - rule.points))
        Mbinv = np.linalg.inv(Mb)
        proj = np.einsum("ab,qb,q->aq", Mbinv, psi, rule.weights)       # (m, q)

        orient = mesh.face_orientations()
        K = mesh.face_elements[faces]
        e = mesh.face_local_edges[faces]
        o = (orient[faces] < 0).astype(int)
        tau = np.stack([rule.points, 1.0 - rule.points])              # by orientation
        phi = triangle_basis(ell)
        vtr = np.empty((3, 2, len(rule), self.nb))
        for ee in range(3):
            for oo in range(2):
                vtr[ee, oo] = phi.values(edge_reference_points(ee, tau[oo]))
        str_ = np.stack([triangle_basis(ell + 2).values(np.column_stack([t, 0 * t])) for t in tau])

        R1 = 0.5 * np.einsum("aq,fqi->fai", proj, vtr[e[:, 0], o[:, 0]])
        R2 = 0.5 * np.einsum("aq,fqi->fai", proj, vtr[e[:, 1], o[:, 1]])
        Rs = np.einsum("aq,fqn->fan", proj, str_[o[:, 0]])

        # extension Phi^z_{ell-1} b_F evaluated at child nodes, per (edge, orientation)
        X = child_points(lagrange_nodes(ell + 2))                     # (3, nS, 2)
        lam = barycentric(X)
        ext = np.empty((3, 2, 3, self.nS, len(eb)))
        pb = triangle_basis(ell - 1)
        for ee in range(3):
            bub = lam[..., (ee + 1) % 3] * lam[..., (ee + 2) % 3]
            for oo in range(2):
                t_nodes = eb.nodes if oo == 0 else 1.0 - eb.nodes
                pts = edge_reference_points(ee, t_nodes)
                if ell == 1:
                    vals = np.ones((3, self.nS, 1))
                else:
                    idx = [int(np.argmin(np.linalg.norm(pb.nodes - p, axis=1))) for p in pts]
                    vals = pb.values(X.reshape(-1, 2)).reshape(3, self.nS, -1)[..., idx]
                ext[ee, oo] = vals * bub[..., None]
        T1 = ext[e[:, 0], o[:, 0]]                                    # (nFi, 3, nS, m)
        T2 = ext[e[:, 1], o[:, 1]]
        child1 = (e[:, 0] + 1) % 3
        return dict(K=K, R1=R1, R2=R2, Rs=Rs, T1=T1, T2=T2, child1=child1)

    def e2(self, v, s):
        """Face-bubble increment from the residual ``{v} - s`` on interior faces."""
        d = self._e2_data
        K1, K2 = d["K"][:, 0], d["K"][:, 1]
        c = (np.einsum("fai,fic->fac", d["R1"], v[K1]) + np.einsum("fai,fic->fac", d["R2"], v[K2])
             - np.einsum("fan,fnc->fac", d["Rs"], s[K1, d["child1"]]))
        out = self.zeros()
        np.add.at(out, K1, np.einsum("fjsa,fac->fjsc", d["T1"], c))
        np.add.at(out, K2, np.einsum("fjsa,fac->fjsc", d["T2"], c))
        return out

    def e2_t(self, g):
        """Adjoint of :meth:`e2`; returns ``(v_bar, s_bar)``."""
        d = self._e2_data
        K1, K2 = d["K"][:, 0], d["K"][:, 1]
        cb = np.einsum("fjsa,fjsc->fac", d["T1"], g[K1]) + np.einsum("fjsa,fjsc->fac", d["T2"], g[K2])
        vb = np.zeros((self.nT, self.nb, 2))
        np.add.at(vb, K1, np.einsum("fai,fac->fic", d["R1"], cb))
        np.add.at(vb, K2, np.einsum("fai,fac->fic", d["R2"], cb))
        sb = self.zeros()
        np.add.at(sb, (K1, d["child1"]), -np.einsum("fan,fac->fnc", d["Rs"], cb))
        return vb, sb

    # ------------------------------------------------------------ E3
    @cached_property
    def _e3_data(self):
        ell = self.ell
        nodes = lagrange_nodes(ell)
        Xq = child_points(nodes)                                       # (3, nq, 2)
        pq = triangle_basis(ell - 1).values(Xq.reshape(-1, 2)).reshape(3, len(nodes), -1)
        gs = triangle_basis(ell + 2).gradients(nodes)                  # (nq, nS, 2)
        return dict(pq=pq, gs=gs, ref=build_e3_ref(ell))

    def defect(self, v, s):
        """``Div_dG v - div s`` at the child ``P_ell`` nodes, shape (nT, 3, nq)."""
        a, b = self._defect_parts(v, s)
        return a - b

    def _defect_parts(self, v, s):
        d = self._e3_data
        dv = (self.space.divergence_matrix @ v.reshape(-1)).reshape(self.nT, -1)
        a = np.einsum("jna,ka->kjn", d["pq"], dv)
        b = np.einsum("kjmc,nme,kjec->kjn", s, d["gs"], self.child_jac_inv)
        return a, b

    def defect_t(self, h):
        d = self._e3_data
        pb = np.einsum("jna,kjn->ka", d["pq"], h)
        vb = (self.space.divergence_matrix.T @ pb.reshape(-1)).reshape(self.nT, self.nb, 2)
        sb = -np.einsum("kjn,nme,kjec->kjmc", h, d["gs"], self.child_jac_inv)
        return vb, sb

    def check_defect_mean(self, v, s):
        """Raise unless ``int_K (Div_dG v - div s) = 0`` on every element."""
        a, b = self._defect_parts(v, s)
        w = self._e3_data["ref"].weights
        mean = (a - b).reshape(self.nT, -1) @ w
        scale = np.maximum(np.abs(a).reshape(self.nT, -1).max(axis=1),
                           np.abs(b).reshape(self.nT, -1).max(axis=1))
        # cells where both parts are pure round-off are judged against the global size
        scale = np.maximum(scale, 1e-3 * scale.max(initial=0.0))
        if np.any(np.abs(mean) > MEAN_TOL * scale + 1e-300):
            raise RuntimeError("face-moment preservation violated upstream: divergence defect has nonzero mean")

    def e3(self, h):
        W = self._e3_data["ref"].to_children                           # (3, nS, 2, M)
        return np.einsum("kcd,jsdm,km->kjsc", self.mesh.jacobians, W, h.reshape(self.nT, -1))

    def e3_t(self, g):
        W = self._e3_data["ref"].to_children
        return np.einsum("kcd,jsdm,kjsc->km", self.mesh.jacobians, W, g).reshape(self.nT, 3, -1)

    # ------------------------------------------------------------ E4
    @cached_property
    def _e4_data(self):
        ell = self.ell
        op = build_e4_ref(ell)
        rule, pts, w = _child_rule(2 * ell + 2)
        vq = triangle_basis(ell).values(pts.reshape(-1, 2)).reshape(3, len(rule), self.nb)
        sq = np.broadcast_to(triangle_basis(ell + 2).values(rule.points), (3, len(rule), self.nS))
        x, y = pts[..., 0], pts[..., 1]
        mq = np.stack([np.stack([m[0](x, y), m[1](x, y)], axis=-1) for m in op.basis], axis=2)
        X = child_points(lagrange_nodes(ell + 2))
        cn = np.stack([np.stack([c[0](X[..., 0], X[..., 1]), c[1](X[..., 0], X[..., 1])], axis=-1)
                       for c in op.curl_fields], axis=-1)              # (3, nS, 2, nm)
        Ginv = np.linalg.inv(op.gram)
        # moments of the pulled-back residual: J DF^-1 cancels J^-1 DF of the push-forward
        return dict(w=w, vq=vq, sq=sq, mq=mq, cn=cn, Ginv=Ginv)

    def e4(self, v, s):
        d = self._e4_data
        z = np.einsum("jqb,kbc->kjqc", d["vq"], v) - np.einsum("jqn,kjnc->kjqc", d["sq"], s)
        zr = np.einsum("ked,kjqd->kjqe", self.space.jac_inv, z)
        mu = np.einsum("jq,jqie,kjqe->ki", d["w"], d["mq"], zr)
        alpha = mu @ d["Ginv"].T
        return np.einsum("kcd,jsdi,ki->kjsc", self.mesh.jacobians, d["cn"], alpha)

    def e4_t(self, g):
        d = self._e4_data
        ab = np.einsum("kcd,jsdi,kjsc->ki", self.mesh.jacobians, d["cn"], g)
        mub = ab @ d["Ginv"]
        zrb = np.einsum("jq,jqie,ki->kjqe", d["w"], d["mq"], mub)
        zb = np.einsum("ked,kjqe->kjqd", self.space.jac_inv, zrb)
        vb = np.einsum("jqb,kjqc->kbc", d["vq"], zb)
        sb = -np.einsum("jqn,kjqc->kjnc", d["sq"], zb)
        return vb, sb

    # ------------------------------------------------------------ element bubble (qopt, ell >= 2)
    @cached_property
    def _bubble_data(self):
        ell = self.ell
        mb = triangle_basis(ell - 2)
        rule, pts, w = _child_rule(2 * ell + 2)
        vq = triangle_basis(ell).values(pts.reshape(-1, 2)).reshape(3, len(rule), self.nb)
        sq = np.broadcast_to(triangle_basis(ell + 2).values(rule.points), (3, len(rule), self.nS))
        mq = mb.values(pts.reshape(-1, 2)).reshape(3, len(rule), -1)
        b = bubble_polynomial()
        fine = quad_triangle(2 * ell + 1)
        mf = mb.values(fine.points)
        M = np.einsum("qa,qb,q->ab", mf, mf, fine.weights * b(*fine.points.T))
        X = child_points(lagrange_nodes(ell + 2))
        bn = mb.values(X.reshape(-1, 2)).reshape(3, self.nS, -1) * b(X[..., 0], X[..., 1])[..., None]
        return dict(w=w, vq=vq, sq=sq, mq=mq, Minv=np.linalg.inv(M), bn=bn)

    def bubble(self, v, s):
        d = self._bubble_data
        z = np.einsum("jqb,kbc->kjqc", d["vq"], v) - np.einsum("jqn,kjnc->kjqc", d["sq"], s)
        mu = np.einsum("jq,jqa,kjqc->kac", d["w"], d["mq"], z)
        c = np.einsum("ab,kbc->kac", d["Minv"], mu)
        return np.einsum("jsa,kac->kjsc", d["bn"], c)

    def bubble_t(self, g):
        d = self._bubble_data
        cb = np.einsum("jsa,kjsc->kac", d["bn"], g)
        mub = np.einsum("ab,kac->kbc", d["Minv"], cb)
        zb = np.einsum("jq,jqa,kac->kjqc", d["w"], d["mq"], mub)
        return np.einsum("jqb,kjqc->kbc", d["vq"], zb), -np.einsum("jqn,kjqc->kjnc", d["sq"], zb)

    # ------------------------------------------------------------ composites
    def stages(self, v, check=True) -> dict:
        """All partial sums of the variant, keyed ``s1``, ``s2``, ...; ``E`` is the result."""
        v = self._coeffs(v).reshape(self.nT, self.nb, 2)
        if self.variant is SmootherVariant.IDENTITY:
            return {"E": self.interp(v)}
        out = {}
        s = self.interp(self.e1_local(v))
        out["s1"] = s
        s = s + self.e2(v, s)
        out["s2"] = s
        if self.variant is SmootherVariant.QUASI_OPTIMAL:
            if self.ell >= 2:
                s = s + self.bubble(v, s)
                out["s3"] = s
            out["E"] = s
            return out
        if check:
            self.check_defect_mean(v, s)
        h = self.defect(v, s)
        s = s + self.e3(h)
        out["s3"] = s
        if self.ell >= 3:
            s = s + self.e4(v, s)
            out["s4"] = s
        out["E"] = s
        return out

    def apply(self, v, check=True) -> SmoothedField:
        coeffs = self.stages(v, check)["E"]
        return self.wrap(coeffs, conforming=self.variant is not SmootherVariant.IDENTITY)

    def apply_transpose(self, g) -> np.ndarray:
        """Adjoint: ``(nT, 3, nS, 2)`` companion coefficients -> ``(nT, nb, 2)``."""
        g = np.asarray(g, float).reshape(self.nT, 3, self.nS, 2)
        if self.variant is SmootherVariant.IDENTITY:
            return self.interp_t(g)
        vb = np.zeros((self.nT, self.nb, 2))
        sb = g
        if self.variant is SmootherVariant.QUASI_OPTIMAL:
            if self.ell >= 2:
                dv, ds = self.bubble_t(sb)
                vb += dv
                sb = sb + ds
        else:
            if self.ell >= 3:
                dv, ds = self.e4_t(sb)
                vb += dv
                sb = sb + ds
            hb = self.e3_t(sb)
            dv, ds = self.defect_t(hb)
            vb += dv
            sb = sb + ds
        dv, ds = self.e2_t(sb)
        vb += dv
        sb = sb + ds
        vb += self.e1_local_t(self.interp_t(sb))
        return vb


# ---------------------------------------------------------------------------
# functional interface
# ---------------------------------------------------------------------------
@lru_cache(maxsize=8)
def _smoother(mesh: TriangleMesh, ell: int, variant: SmootherVariant) -> Smoother:
    return Smoother(mesh, ell, variant)


def get_smoother(mesh: TriangleMesh, ell: int, variant) -> Smoother:
    return _smoother(mesh, ell, SmootherVariant(variant))


def _prob(v: BrokenField) -> Smoother:
    return get_smoother(v.mesh, v.degree, SmootherVariant.PRESSURE_ROBUST)


def e1_apply(v: BrokenField) -> SmoothedField:
    S = _prob(v)
    return S.wrap(S.interp(S.e1_local(v.coeffs)))


def e2_apply(v: BrokenField, e1v: SmoothedField) -> SmoothedField:
    S = _prob(v)
    return S.wrap(S.e2(v.coeffs, e1v.coeffs))


def e3_apply(v: BrokenField, partial: SmoothedField) -> SmoothedField:
    S = _prob(v)
    S.check_defect_mean(v.coeffs, partial.coeffs)
    return S.wrap(S.e3(S.defect(v.coeffs, partial.coeffs)))


def e4_apply(v: BrokenField, partial: SmoothedField) -> SmoothedField:
    S = _prob(v)
    if v.degree < 3:
        return S.wrap(S.zeros())
    return S.wrap(S.e4(v.coeffs, partial.coeffs))


def smooth(v: BrokenField, variant=SmootherVariant.PRESSURE_ROBUST) -> SmoothedField:
    return get_smoother(v.mesh, v.degree, variant).apply(v)
