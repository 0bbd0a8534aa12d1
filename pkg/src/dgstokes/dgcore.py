"""Symmetric interior-penalty dG forms for the Stokes velocity/pressure pair.

Velocity dofs are element-major, then local Lagrange node, then component:
``(K * nb + i) * 2 + c``. Pressure dofs (degree ``ell - 1``) are
``K * npb + k``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .mesh import REFERENCE_VERTICES, TriangleMesh
from .polyref import edge_basis, quad_edge, quad_triangle, triangle_basis


class PenaltyVariant(enum.Enum):
    FULL = "full"
    WEAK = "weak"


@dataclass
class BrokenField:
    """Broken ``P_degree`` vector field, ``coeffs`` of shape ``(nT, nb, 2)``."""

    mesh: TriangleMesh
    degree: int
    coeffs: np.ndarray

    def __post_init__(self):
        nb = len(triangle_basis(self.degree))
        self.coeffs = np.asarray(self.coeffs, dtype=float).reshape(self.mesh.n_triangles, nb, 2)

    @classmethod
    def from_vector(cls, mesh, degree, vec):
        return cls(mesh, degree, np.asarray(vec).reshape(mesh.n_triangles, -1, 2))

    @property
    def vector(self) -> np.ndarray:
        return self.coeffs.reshape(-1)

    def values_at(self, ref_points) -> np.ndarray:
        """(nT, nq, 2) values at reference points of every element."""
        phi = triangle_basis(self.degree).values(ref_points)
        return np.einsum("qi,kic->kqc", phi, self.coeffs)

    def gradients_at(self, ref_points) -> np.ndarray:
        """(nT, nq, 2, 2) with ``[..., c, d] = d v_c / d x_d``."""
        g = triangle_basis(self.degree).gradients(ref_points)
        ginv = np.linalg.inv(self.mesh.jacobians)
        gref = np.einsum("qie,kic->kqce", g, self.coeffs)
        return np.einsum("kqce,ked->kqcd", gref, ginv)

    def __sub__(self, other: "BrokenField") -> "BrokenField":
        if other.mesh is not self.mesh or other.degree != self.degree:
            raise ValueError("fields live on different spaces")
        return BrokenField(self.mesh, self.degree, self.coeffs - other.coeffs)


@dataclass
class BrokenPressure:
    mesh: TriangleMesh
    degree: int
    coeffs: np.ndarray
    zero_mean: bool = False

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float).reshape(self.mesh.n_triangles, -1)

    @property
    def vector(self) -> np.ndarray:
        return self.coeffs.reshape(-1)

    def values_at(self, ref_points) -> np.ndarray:
        return triangle_basis(self.degree).values(ref_points) @ self.coeffs.T   # (nq, nT)

    def integral(self) -> float:
        q = triangle_basis(self.degree)
        rule = quad_triangle(max(self.degree, 1))
        w = q.values(rule.points).T @ rule.weights
        return float(2.0 * self.mesh.areas @ (self.coeffs @ w))


def edge_reference_points(e: int, tau) -> np.ndarray:
    """Points on local edge ``e`` of the reference triangle at parameters ``tau``."""
    a = REFERENCE_VERTICES[(e + 1) % 3]
    b = REFERENCE_VERTICES[(e + 2) % 3]
    tau = np.asarray(tau, dtype=float)
    return a + tau[:, None] * (b - a)


class DGSpace:
    """Geometry and reference data for broken ``P_degree`` fields on a mesh."""

    def __init__(self, mesh: TriangleMesh, degree: int, face_degree: int | None = None):
        self.mesh = mesh
        self.degree = degree
        self.basis = triangle_basis(degree)
        self.nb = len(self.basis)
        self.nT = mesh.n_triangles
        self.n_dofs = self.nT * self.nb * 2
        self.jac = mesh.jacobians
        self.jac_inv = np.linalg.inv(mesh.jacobians)
        self.J = 2.0 * mesh.areas
        self.face_rule = quad_edge(face_degree if face_degree is not None else 2 * degree + 2)
        self.orient = mesh.face_orientations()

    # --------------------------------------------------------------- faces
    def face_trace_tables(self, basis, rule=None):
        """Values and reference gradients of ``basis`` at face quadrature points.

        Returns arrays indexed ``[e, o]`` with ``o = 0`` for an edge running
        along the face direction and ``o = 1`` for the reversed case.
        """
        rule = rule or self.face_rule
        vals = np.empty((3, 2, len(rule), len(basis)))
        grads = np.empty((3, 2, len(rule), len(basis), 2))
        for e in range(3):
            for o, tau in enumerate((rule.points, 1.0 - rule.points)):
                pts = edge_reference_points(e, tau)
                vals[e, o] = basis.values(pts)
                grads[e, o] = basis.gradients(pts)
        return vals, grads

    def face_side_data(self, faces, side, basis=None, rule=None, with_grad=True):
        """Per-face traces of ``basis`` from the given side.

        Returns ``(K, phi, dphi)`` with ``phi`` of shape (nF, nq, nb) and the
        physical gradients ``dphi`` of shape (nF, nq, nb, 2).
        """
        basis = basis or self.basis
        vals, grads = self.face_trace_tables(basis, rule)
        mesh = self.mesh
        K = mesh.face_elements[faces, side]
        e = mesh.face_local_edges[faces, side]
        o = (self.orient[faces, side] < 0).astype(int)
        phi = vals[e, o]
        if not with_grad:
            return K, phi, None
        dphi = np.einsum("fqie,fed->fqid", grads[e, o], self.jac_inv[K])
        return K, phi, dphi

    # --------------------------------------------------------------- helpers
    def _vector_coo(self, rows_scalar, cols_scalar, vals, shape):
        r = np.concatenate([2 * rows_scalar, 2 * rows_scalar + 1])
        c = np.concatenate([2 * cols_scalar, 2 * cols_scalar + 1])
        v = np.concatenate([vals, vals])
        return sp.csr_matrix((v, (r, c)), shape=shape)

    @cached_property
    def stiffness_blocks(self) -> np.ndarray:
        rule = quad_triangle(max(2 * self.degree - 2, 0))
        g = self.basis.gradients(rule.points)                     # (q, nb, 2)
        gp = np.einsum("qie,ked->kqid", g, self.jac_inv)
        return np.einsum("kqid,kqjd,q,k->kij", gp, gp, rule.weights, self.J)

    @cached_property
    def mass_blocks(self) -> np.ndarray:
        rule = quad_triangle(2 * self.degree)
        phi = self.basis.values(rule.points)
        M = np.einsum("qi,qj,q->ij", phi, phi, rule.weights)
        return self.J[:, None, None] * M[None]

    # --------------------------------------------------------------- forms
    def assemble_a(self, eta: float, variant: PenaltyVariant = PenaltyVariant.FULL) -> sp.csr_matrix:
        if eta <= 0:
            raise ValueError("penalty parameter must be positive")
        variant = PenaltyVariant(variant)
        nb = self.nb
        rows, cols, vals = [], [], []

        Kloc = self.stiffness_blocks
        I, Jx = np.meshgrid(np.arange(nb), np.arange(nb), indexing="ij")
        base = (np.arange(self.nT) * nb)[:, None, None]
        rows.append((base + I).ravel())
        cols.append((base + Jx).ravel())
        vals.append(Kloc.ravel())

        mesh = self.mesh
        w = self.face_rule.weights
        proj = None
        if variant is PenaltyVariant.WEAK:
            eb = edge_basis(self.degree - 1) if self.degree >= 1 else None
            psi = eb.values(self.face_rule.points)               # (q, m)
            Me = np.einsum("qa,qb,q->ab", psi, psi, w)
            proj = (psi, np.linalg.inv(Me))

        for faces, sides, sig, om in (
            (mesh.interior_faces, (0, 1), (1.0, -1.0), (0.5, 0.5)),
            (mesh.boundary_faces, (0,), (1.0,), (1.0,)),
        ):
            if len(faces) == 0:
                continue
            hF = mesh.face_diameters[faces]
            n = mesh.face_normals[faces]
            W = w[None, :] * hF[:, None]                         # physical weights
            data = []
            for s in sides:
                K, phi, dphi = self.face_side_data(faces, s)
                dn = np.einsum("fqid,fd->fqi", dphi, n)
                data.append((K, phi, dn))
            for ti, t in enumerate(sides):
                Kt, phit, dnt = data[ti]
                for si, s in enumerate(sides):
                    Ks, phis, dns = data[si]
                    blk = -om[si] * sig[ti] * np.einsum("fq,fqi,fqj->fji", W, dns, phit)
                    blk -= sig[si] * om[ti] * np.einsum("fq,fqi,fqj->fji", W, phis, dnt)
                    pen = eta / hF * sig[si] * sig[ti]
                    if proj is None:
                        blk += pen[:, None, None] * np.einsum("fq,fqi,fqj->fji", W, phis, phit)
                    else:
                        psi, Meinv = proj
                        # physical edge mass is hF * Me, moments carry hF as well
                        ms = np.einsum("fq,fqi,qa->fia", W, phis, psi)
                        mt = np.einsum("fq,fqj,qb->fjb", W, phit, psi)
                        blk += (pen / hF)[:, None, None] * np.einsum("fjb,ba,fia->fji", mt, Meinv, ms)
                    rows.append(((Kt * nb)[:, None, None] + np.arange(nb)[None, :, None]
                                 + 0 * np.arange(nb)[None, None, :]).ravel())
                    cols.append(((Ks * nb)[:, None, None] + 0 * np.arange(nb)[None, :, None]
                                 + np.arange(nb)[None, None, :]).ravel())
                    vals.append(blk.ravel())

        r = np.concatenate(rows)
        c = np.concatenate(cols)
        v = np.concatenate(vals)
        return self._vector_coo(r, c, v, (self.n_dofs, self.n_dofs))

    @cached_property
    def pressure_basis(self):
        return triangle_basis(self.degree - 1)

    @property
    def n_pressure(self) -> int:
        return self.nT * len(self.pressure_basis)

    def assemble_b(self) -> sp.csr_matrix:
        """``B[q, w] = b_dG(w, q)`` over the unconstrained broken ``P_{ell-1}`` basis."""
        qb = self.pressure_basis
        npb, nb = len(qb), self.nb
        mesh = self.mesh
        rows, cols, vals = [], [], []

        rule = quad_triangle(2 * self.degree)
        q = qb.values(rule.points)                                # (nq, npb)
        g = self.basis.gradients(rule.points)
        gp = np.einsum("qie,ked->kqid", g, self.jac_inv)
        blk = -np.einsum("q,qa,kqid,k->kaid", rule.weights, q, gp, self.J)   # (nT, npb, nb, 2)
        Kk = np.arange(self.nT)
        rows.append(np.broadcast_to((Kk * npb)[:, None, None, None] + np.arange(npb)[None, :, None, None], blk.shape).ravel())
        cols.append(np.broadcast_to(((Kk * nb)[:, None, None, None] + np.arange(nb)[None, None, :, None]) * 2
                                    + np.arange(2)[None, None, None, :], blk.shape).ravel())
        vals.append(blk.ravel())

        w = self.face_rule.weights
        for faces, sides, sig, om in (
            (mesh.interior_faces, (0, 1), (1.0, -1.0), (0.5, 0.5)),
            (mesh.boundary_faces, (0,), (1.0,), (1.0,)),
        ):
            if len(faces) == 0:
                continue
            W = w[None, :] * mesh.face_diameters[faces][:, None]
            n = mesh.face_normals[faces]
            vel = [self.face_side_data(faces, s, with_grad=False)[:2] for s in sides]
            prs = [self.face_side_data(faces, s, basis=qb, with_grad=False)[1] for s in sides]
            for ti in range(len(sides)):
                Kt = vel[ti][0]
                for si in range(len(sides)):
                    Ks, phis = vel[si]
                    b = sig[si] * om[ti] * np.einsum("fq,fqi,fqa,fc->faic", W, phis, prs[ti], n)
                    rows.append(np.broadcast_to((Kt * npb)[:, None, None, None] + np.arange(npb)[None, :, None, None], b.shape).ravel())
                    cols.append(np.broadcast_to(((Ks * nb)[:, None, None, None] + np.arange(nb)[None, None, :, None]) * 2
                                                + np.arange(2)[None, None, None, :], b.shape).ravel())
                    vals.append(b.ravel())
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(self.n_pressure, self.n_dofs))

    @cached_property
    def pressure_mass_blocks(self) -> np.ndarray:
        qb = self.pressure_basis
        rule = quad_triangle(2 * max(self.degree - 1, 0))
        q = qb.values(rule.points)
        M = np.einsum("qa,qb,q->ab", q, q, rule.weights)
        return self.J[:, None, None] * M[None]

    def pressure_mass(self) -> sp.csr_matrix:
        return sp.block_diag(list(self.pressure_mass_blocks), format="csr")

    @cached_property
    def pressure_mean_vector(self) -> np.ndarray:
        """``c[K, k] = int_K q_k``."""
        qb = self.pressure_basis
        rule = quad_triangle(max(self.degree - 1, 1))
        m = qb.values(rule.points).T @ rule.weights
        return (self.J[:, None] * m[None]).ravel()

    @cached_property
    def divergence_matrix(self) -> sp.csr_matrix:
        """Sparse ``Div_dG`` from velocity dofs to pressure dofs."""
        B = self.assemble_b()
        Minv = np.linalg.inv(self.pressure_mass_blocks)
        return -(sp.block_diag(list(Minv), format="csr") @ B).tocsr()

    # --------------------------------------------------------------- norms
    def gradient_norm_sq(self, coeffs) -> float:
        c = np.asarray(coeffs).reshape(self.nT, self.nb, 2)
        return float(np.einsum("kic,kij,kjc->", c, self.stiffness_blocks, c))

    def jump_sq(self, coeffs, weight="inv_h") -> float:
        """``int_Sigma w |[v]|^2`` with ``w`` one of ``1/h`` ("inv_h", default), 1 ("one") or ``h`` ("h")."""
        if weight not in ("inv_h", "one", "h"):
            raise ValueError(f"unknown jump weight {weight!r}")
        c = np.asarray(coeffs).reshape(self.nT, self.nb, 2)
        mesh = self.mesh
        total = 0.0
        for faces, sides, sig in ((mesh.interior_faces, (0, 1), (1.0, -1.0)),
                                  (mesh.boundary_faces, (0,), (1.0,))):
            if len(faces) == 0:
                continue
            jump = 0.0
            for s, sg in zip(sides, sig):
                K, phi, _ = self.face_side_data(faces, s, with_grad=False)
                jump = jump + sg * np.einsum("fqi,fic->fqc", phi, c[K])
            hF = mesh.face_diameters[faces]
            # face_rule lives on [0, 1]: int_F g = h_F * sum_q w_q g(q)
            wgt = {"inv_h": np.ones_like(hF), "one": hF, "h": hF * hF}[weight]
            total += float(np.einsum("q,fqc,fqc,f->", self.face_rule.weights, jump, jump, wgt))
        return total

    def norm_dg(self, coeffs, eta: float) -> float:
        return float(np.sqrt(self.gradient_norm_sq(coeffs) + eta * self.jump_sq(coeffs)))


# ---------------------------------------------------------------------------
# module-level conveniences
# ---------------------------------------------------------------------------
def assemble_a(mesh: TriangleMesh, ell: int, eta: float,
               variant: PenaltyVariant = PenaltyVariant.FULL) -> sp.csr_matrix:
    return DGSpace(mesh, ell).assemble_a(eta, variant)


def assemble_b(mesh: TriangleMesh, ell: int) -> sp.csr_matrix:
    return DGSpace(mesh, ell).assemble_b()


def discrete_divergence(w: BrokenField) -> BrokenPressure:
    space = DGSpace(w.mesh, w.degree)
    d = space.divergence_matrix @ w.vector
    return BrokenPressure(w.mesh, w.degree - 1, d, zero_mean=True)


def norm_dg(v: BrokenField, eta: float) -> float:
    return DGSpace(v.mesh, v.degree).norm_dg(v.vector, eta)


def norm_dg1(v: BrokenField) -> float:
    return norm_dg(v, 1.0)


def estimate_eta_threshold(mesh: TriangleMesh, ell: int) -> float:
    """Valid constant of the inverse trace inequality for broken ``P_ell`` fields.

    Per element, the largest generalised eigenvalue of
    ``sum_F c_F h_F int_F |v|^2`` against ``int_K |v|^2`` with ``c_F = 1/2``
    on interior faces (the average splits between two sides) and 1 on
    boundary faces.
    """
    basis = triangle_basis(ell)
    rule = quad_edge(2 * ell)
    Me = np.empty((3, len(basis), len(basis)))
    for e in range(3):
        phi = basis.values(edge_reference_points(e, rule.points))
        Me[e] = np.einsum("qi,qj,q->ij", phi, phi, rule.weights)
    vrule = quad_triangle(2 * ell)
    phi = basis.values(vrule.points)
    M = np.einsum("qi,qj,q->ij", phi, phi, vrule.weights)
    L = np.linalg.cholesky(M)
    Linv = np.linalg.inv(L)

    faces = mesh.element_faces                               # (nT, 3), local edge order
    hF = mesh.face_diameters[faces]
    c = np.where(mesh.face_elements[faces, 1] >= 0, 0.5, 1.0)
    # int_F phi_i phi_j = |F| * Me; weight h_F -> h_F^2
    weights = c * hF ** 2
    Mb = np.einsum("ke,eij->kij", weights, Me)
    S = np.einsum("ab,kbc,dc->kad", Linv, Mb, Linv)
    lam = np.linalg.eigvalsh(S)[:, -1] / (2.0 * mesh.areas)
    return float(lam.max())
