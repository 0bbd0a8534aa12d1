"""Smoothed right-hand sides, the dG Stokes saddle-point solve and error norms."""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .dgcore import BrokenField, BrokenPressure, DGSpace, PenaltyVariant, estimate_eta_threshold
from .mesh import TriangleMesh
from .polyref import quad_edge, quad_triangle, triangle_basis
from .smoother import SmootherVariant, get_smoother

RESIDUAL_TOL = 1e-10
CHUNK = 4096


# ---------------------------------------------------------------------------
# loads
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class StrongLoad:
    """Pointwise load ``f(x) -> (n, 2)`` tested as ``int f . w``."""

    f: Callable
    distributional: bool = False


@dataclass(frozen=True)
class WeakManufacturedLoad:
    """Load ``-mu Delta u + grad p`` of a manufactured pair with a possibly jumping ``p``.

    ``mode="elementwise"`` tests broken ``w`` with
    ``mu int grad u : grad_M w - int p Div_M w``. ``mode="consistent"``
    (default) uses ``-mu int Delta u . w + int grad_M p . w`` plus the line term
    ``int_{x_1 = a} [p] w_1``, which integrates the distributional gradient
    exactly for broken ``w``. Both agree on H^1_0 test functions.
    """

    u: Callable
    grad_u: Callable
    p: Callable
    discontinuity: float | None = None
    laplace_u: Callable | None = None
    grad_p: Callable | None = None
    pressure_jump: Callable | None = None
    mode: str = "consistent"
    validate: bool = True

    def __post_init__(self):
        if self.mode not in ("consistent", "elementwise"):
            raise ValueError(f"unknown load mode {self.mode!r}")
        if self.mode == "consistent" and (self.laplace_u is None or self.grad_p is None
                                          or (self.discontinuity is not None and self.pressure_jump is None)):
            raise ValueError("consistent mode needs laplace_u, grad_p and pressure_jump")
        if self.validate:
            check_manufactured(self.u, self.grad_u)


def check_manufactured(u, grad_u, n: int = 64, tol: float = 1e-10, seed: int = 0) -> None:
    rng = np.random.default_rng(seed)
    t = rng.random(n)
    z, o = np.zeros(n), np.ones(n)
    edges = np.vstack([np.column_stack(c) for c in ((t, z), (t, o), (z, t), (o, t))])
    if np.abs(u(edges)).max() > tol:
        raise ValueError("manufactured velocity must vanish on the boundary")
    g = grad_u(rng.random((n, 2)))
    if np.abs(g[:, 0, 0] + g[:, 1, 1]).max() > tol:
        raise ValueError("manufactured velocity must be divergence free")


def strong_load(solution, mu: float = 1.0) -> StrongLoad:
    return StrongLoad(solution.load(mu))


def weak_load(solution, mode: str = "consistent") -> WeakManufacturedLoad:
    return WeakManufacturedLoad(solution.u, solution.grad_u, solution.p, solution.discontinuity,
                                solution.laplace_u, solution.grad_p, solution.pressure_jump, mode)


# ---------------------------------------------------------------------------
# quadrature with clipping along x_1 = a
# ---------------------------------------------------------------------------
def _clip(poly: np.ndarray, a: float, keep_right: bool) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex polygon against ``x_1 >= a`` or ``<= a``."""
    sgn = 1.0 if keep_right else -1.0
    out = []
    n = len(poly)
    for i in range(n):
        P, Q = poly[i], poly[(i + 1) % n]
        dp, dq = sgn * (P[0] - a), sgn * (Q[0] - a)
        if dp >= 0:
            out.append(P)
        if dp * dq < 0:
            s = dp / (dp - dq)
            out.append(P + s * (Q - P))
    return np.array(out)


def crossed_cells(mesh: TriangleMesh, a: float) -> np.ndarray:
    x = mesh.vertices[mesh.triangles][:, :, 0]
    return np.flatnonzero((x.min(axis=1) < a) & (x.max(axis=1) > a))


def clipped_rule(mesh: TriangleMesh, cells, degree: int, a: float):
    """Ragged rule on ``cells`` resolving the line ``x_1 = a``.

    Returns ``(cell, ref_points, ref_weights)``; weights sum to 1/2 per cell,
    so physical weights are ``ref_weights * 2 |K|``.
    """
    rule = quad_triangle(degree)
    cid, pts, wts = [], [], []
    Jinv = np.linalg.inv(mesh.jacobians[cells])
    for n, K in enumerate(cells):
        P = mesh.vertices[mesh.triangles[K]]
        for right in (False, True):
            poly = _clip(P, a, right)
            if len(poly) < 3:
                continue
            ref = (poly - mesh.offsets[K]) @ Jinv[n].T
            for i in range(1, len(ref) - 1):
                A0, A1, A2 = ref[0], ref[i], ref[i + 1]
                M = np.column_stack([A1 - A0, A2 - A0])
                det = abs(np.linalg.det(M))
                if det < 1e-15:
                    continue
                cid.append(np.full(len(rule), K))
                pts.append(rule.points @ M.T + A0)
                wts.append(rule.weights * det)
    return np.concatenate(cid), np.vstack(pts), np.concatenate(wts)


def _cell_blocks(mesh: TriangleMesh, degree: int, line: float | None):
    """Yield ``(cells, ref_points, ref_weights, ragged)`` covering every cell once.

    Regular blocks share reference points (``ragged=False``); crossed cells
    come in one ragged block with per-point cell indices.
    """
    rule = quad_triangle(degree)
    skip = np.zeros(mesh.n_triangles, bool)
    if line is not None:
        crossed = crossed_cells(mesh, line)
        skip[crossed] = True
    regular = np.flatnonzero(~skip)
    for start in range(0, len(regular), CHUNK):
        yield regular[start:start + CHUNK], rule.points, rule.weights, False
    if line is not None and skip.any():
        yield clipped_rule(mesh, np.flatnonzero(skip), degree, line) + (True,)


# ---------------------------------------------------------------------------
# right-hand side
# ---------------------------------------------------------------------------
def _line_segments(mesh: TriangleMesh, cells, a: float, degree: int):
    """Gauss points on ``{x_1 = a} \\cap K`` for crossed cells: (cell, ref_points, phys_weights, y)."""
    rule = quad_edge(degree)
    cid, pts, wts, ys = [], [], [], []
    Jinv = np.linalg.inv(mesh.jacobians[cells])
    for n, K in enumerate(cells):
        P = mesh.vertices[mesh.triangles[K]]
        hits = []
        for i in range(3):
            A, B = P[i], P[(i + 1) % 3]
            if (A[0] - a) * (B[0] - a) < 0:
                s_ = (a - A[0]) / (B[0] - A[0])
                hits.append(A[1] + s_ * (B[1] - A[1]))
            elif A[0] == a:
                hits.append(A[1])
        if len(hits) < 2:
            continue
        y0, y1 = min(hits), max(hits)
        y = y0 + rule.points * (y1 - y0)
        x = np.column_stack([np.full_like(y, a), y])
        cid.append(np.full(len(y), K))
        pts.append((x - mesh.offsets[K]) @ Jinv[n].T)
        wts.append(rule.weights * (y1 - y0))
        ys.append(y)
    return np.concatenate(cid), np.vstack(pts), np.concatenate(wts), np.concatenate(ys)


def _volume_integrand(load, x, mu):
    """Either ``('value', f)`` tested with ``w`` or ``('grad', G, p)`` tested with ``grad w``."""
    if isinstance(load, StrongLoad):
        return "value", load.f(x)
    if load.mode == "consistent":
        return "value", -mu * load.laplace_u(x) + load.grad_p(x)
    return "grad", mu * load.grad_u(x), load.p(x)


def companion_load(mesh: TriangleMesh, degree: int, load, mu: float = 1.0,
                   quad_degree: int = 14) -> np.ndarray:
    """``<f, psi>`` for every broken ``P_degree`` basis function ``psi`` of ``mesh``.

    Returns shape ``(nT, nb, 2)``.
    """
    basis = triangle_basis(degree)
    nb = len(basis)
    out = np.zeros((mesh.n_triangles, nb, 2))
    J = 2.0 * mesh.areas
    Jinv = np.linalg.inv(mesh.jacobians)
    line = getattr(load, "discontinuity", None)
    for cells, ref, w, ragged in _cell_blocks(mesh, quad_degree, line):
        if ragged:
            x = np.einsum("pde,pe->pd", mesh.jacobians[cells], ref) + mesh.offsets[cells]
            wp = w * J[cells]
            kind, *data = _volume_integrand(load, x, mu)
            if kind == "value":
                contrib = np.einsum("p,pi,pc->pic", wp, basis.values(ref), data[0])
            else:
                gp = np.einsum("pie,ped->pid", basis.gradients(ref), Jinv[cells])
                contrib = np.einsum("p,pcd,pid->pic", wp, data[0], gp)
                contrib -= np.einsum("p,p,pic->pic", wp, data[1], gp)
            np.add.at(out, cells, contrib)
            continue
        x = np.einsum("kde,qe->kqd", mesh.jacobians[cells], ref) + mesh.offsets[cells][:, None]
        xf = x.reshape(-1, 2)
        nk, nq = len(cells), len(w)
        wk = J[cells][:, None] * w[None, :]
        kind, *data = _volume_integrand(load, xf, mu)
        if kind == "value":
            f = data[0].reshape(nk, nq, 2)
            out[cells] += np.einsum("kq,qi,kqc->kic", wk, basis.values(ref), f)
        else:
            gp = np.einsum("qie,ked->kqid", basis.gradients(ref), Jinv[cells])
            out[cells] += np.einsum("kq,kqcd,kqid->kic", wk, data[0].reshape(nk, nq, 2, 2), gp)
            out[cells] -= np.einsum("kq,kq,kqic->kic", wk, data[1].reshape(nk, nq), gp)
    if (line is not None and isinstance(load, WeakManufacturedLoad)
            and load.mode == "consistent"):
        cells = crossed_cells(mesh, line)
        if len(cells):
            cid, ref, wl, y = _line_segments(mesh, cells, line, quad_degree)
            jump = load.pressure_jump(y)
            np.add.at(out[:, :, 0], cid, (wl * jump)[:, None] * basis.values(ref))
    return out


def assemble_rhs(mesh: TriangleMesh, ell: int, variant, load, mu: float = 1.0,
                 quad_degree: int | None = None) -> np.ndarray:
    """Vector of ``<f, E Phi_i>`` over the broken velocity basis."""
    variant = SmootherVariant(variant)
    if isinstance(load, StrongLoad) and load.distributional:
        raise ValueError(
            "a distributional load has no pointwise representation; its duality with "
            "broken test functions is undefined. Pass a WeakManufacturedLoad instead.")
    qd = quad_degree if quad_degree is not None else 2 * ell + 12
    S = get_smoother(mesh, ell, variant)
    g = companion_load(S.companion, ell + 2, load, mu, qd)
    return S.apply_transpose(g).reshape(-1)


# ---------------------------------------------------------------------------
# saddle-point system
# ---------------------------------------------------------------------------
@dataclass
class SaddleSystem:
    A: sp.csr_matrix          # mu-scaled velocity block
    B: sp.csr_matrix
    c: np.ndarray             # pressure mean row
    rhs: np.ndarray

    @property
    def n_velocity(self) -> int:
        return self.A.shape[0]

    @property
    def n_pressure(self) -> int:
        return self.B.shape[0]

    def matrix(self) -> sp.csr_matrix:
        c = sp.csr_matrix(self.c[None, :])
        return sp.bmat([[self.A, self.B.T, None],
                        [self.B, None, c.T],
                        [None, c, None]], format="csr")

    def full_rhs(self) -> np.ndarray:
        return np.concatenate([self.rhs, np.zeros(self.n_pressure + 1)])


@dataclass
class StokesSolution:
    velocity: BrokenField
    pressure: BrokenPressure
    diagnostics: dict = field(default_factory=dict)


def build_system(mesh, ell, eta, mu, variant, penalty, load, quad_degree=None):
    space = DGSpace(mesh, ell)
    A = mu * space.assemble_a(eta, PenaltyVariant(penalty))
    B = space.assemble_b()
    rhs = assemble_rhs(mesh, ell, variant, load, mu, quad_degree)
    return space, SaddleSystem(A, B, space.pressure_mean_vector, rhs)


def _solve_direct(system: SaddleSystem):
    K = system.matrix().tocsc()
    b = system.full_rhs()
    lu = spla.splu(K, permc_spec="COLAMD")
    x = lu.solve(b)
    r = b - K @ x
    if np.linalg.norm(r) > RESIDUAL_TOL * max(np.linalg.norm(b), 1e-300):
        x += lu.solve(r)
    return x, K, b, {"method": "direct", "nnz_L": int(lu.L.nnz), "nnz_U": int(lu.U.nnz)}


def _solve_minres(system: SaddleSystem, space: DGSpace, mu: float, max_sweeps: int = 20):
    """MINRES on the singular ``[A B^T; B 0]`` with a block-diagonal preconditioner.

    The velocity block is preconditioned by one smoothed-aggregation V-cycle,
    the pressure block by ``mu`` times the inverse pressure mass. Restarted
    sweeps refine until the unpreconditioned residual meets the tolerance; the
    pressure mean is fixed afterwards.
    """
    import pyamg

    nu, npr = system.n_velocity, system.n_pressure
    K = sp.bmat([[system.A, system.B.T], [system.B, None]], format="csr")
    b = np.concatenate([system.rhs, np.zeros(npr)])
    near_null = np.kron(np.ones((nu // 2, 1)), np.eye(2))
    ml = pyamg.smoothed_aggregation_solver(system.A.tocsr(), B=near_null, symmetry="symmetric")
    Mpinv = np.linalg.inv(space.pressure_mass_blocks)

    def prec(r):
        out = np.empty_like(r)
        out[:nu] = ml.solve(r[:nu], tol=1e-30, maxiter=1, cycle="V")
        out[nu:] = mu * np.einsum("kab,kb->ka", Mpinv, r[nu:].reshape(space.nT, -1)).ravel()
        return out

    M = spla.LinearOperator(K.shape, prec)
    iters = [0]

    def cb(_):
        iters[0] += 1

    y = np.zeros(K.shape[0])
    bnorm = max(np.linalg.norm(b), 1e-300)
    for _ in range(max_sweeps):
        r = b - K @ y
        if np.linalg.norm(r) <= 0.1 * RESIDUAL_TOL * bnorm:
            break
        dy, info = spla.minres(K, r, M=M, rtol=1e-12, maxiter=5000, callback=cb)
        y += dy
    c = system.c
    p = y[nu:] - (c @ y[nu:]) / c.sum()
    x = np.concatenate([y[:nu], p, [0.0]])
    return x, system.matrix(), system.full_rhs(), {"method": "minres", "iterations": iters[0]}


DIRECT_LIMIT = 150_000


def solve_stokes(mesh: TriangleMesh, ell: int, eta: float, mu: float = 1.0,
                 variant=SmootherVariant.PRESSURE_ROBUST, penalty=PenaltyVariant.FULL,
                 load=None, method: str = "direct", quad_degree: int | None = None,
                 warn: bool = True) -> StokesSolution:
    """Solve ``mu a_dG(u, v) + b_dG(v, p) = <f, E v>``, ``b_dG(u, q) = 0``, ``int p = 0``."""
    if load is None:
        raise ValueError("a load is required")
    if warn:
        eta_bar = estimate_eta_threshold(mesh, ell)
        if eta <= eta_bar:
            warnings.warn(f"eta={eta} does not exceed the estimated threshold {eta_bar:.4g}; "
                          "coercivity is not guaranteed", RuntimeWarning, stacklevel=2)
    t0 = time.perf_counter()
    space, system = build_system(mesh, ell, eta, mu, variant, penalty, load, quad_degree)
    t1 = time.perf_counter()
    if method == "auto":
        method = "direct" if system.n_velocity <= DIRECT_LIMIT else "minres"
    if method == "direct":
        x, K, b, diag = _solve_direct(system)
    elif method == "minres":
        x, K, b, diag = _solve_minres(system, space, mu)
    else:
        raise ValueError(f"unknown solver method {method!r}")
    res = float(np.linalg.norm(b - K @ x) / max(np.linalg.norm(b), 1e-300))
    if not np.isfinite(res) or (res > RESIDUAL_TOL and np.linalg.norm(b) > 0):
        raise RuntimeError(f"linear solve failed: relative residual {res:.3e}")
    nu, npr = system.n_velocity, system.n_pressure
    diag.update(residual=res, n_velocity=nu, n_pressure=npr,
                assembly_seconds=t1 - t0, solve_seconds=time.perf_counter() - t1)
    u = BrokenField.from_vector(mesh, ell, x[:nu])
    p = BrokenPressure(mesh, ell - 1, x[nu:nu + npr], zero_mean=True)
    return StokesSolution(u, p, diag)


# ---------------------------------------------------------------------------
# errors
# ---------------------------------------------------------------------------
def compute_errors(sol: StokesSolution, solution, eta: float, quad_degree: int = 14) -> dict:
    """``||u - u_h||_dG``, ``||u - u_h||_{dG,1}`` and ``||p - p_h||_{L2}``.

    ``solution`` provides ``grad_u``, ``p`` and an optional ``discontinuity``.
    """
    u_h, p_h = sol.velocity, sol.pressure
    mesh = u_h.mesh
    space = DGSpace(mesh, u_h.degree)
    vb = triangle_basis(u_h.degree)
    pb = triangle_basis(p_h.degree)
    J = 2.0 * mesh.areas
    Jinv = np.linalg.inv(mesh.jacobians)
    grad_sq = 0.0
    for cells, ref, w, _ in _cell_blocks(mesh, quad_degree, None):
        x = np.einsum("kde,qe->kqd", mesh.jacobians[cells], ref) + mesh.offsets[cells][:, None]
        gu = solution.grad_u(x.reshape(-1, 2)).reshape(len(cells), len(w), 2, 2)
        gp = np.einsum("qie,ked->kqid", vb.gradients(ref), Jinv[cells])
        gh = np.einsum("kqid,kic->kqcd", gp, u_h.coeffs[cells])
        grad_sq += float(np.einsum("k,q,kqcd->", J[cells], w, (gu - gh) ** 2))
    jump = space.jump_sq(u_h.coeffs)

    p_sq = 0.0
    line = getattr(solution, "discontinuity", None)
    for cells, ref, w, ragged in _cell_blocks(mesh, quad_degree, line):
        if ragged:
            x = np.einsum("pde,pe->pd", mesh.jacobians[cells], ref) + mesh.offsets[cells]
            ph = np.einsum("pa,pa->p", pb.values(ref), p_h.coeffs[cells])
            p_sq += float(np.sum(w * J[cells] * (solution.p(x) - ph) ** 2))
            continue
        x = np.einsum("kde,qe->kqd", mesh.jacobians[cells], ref) + mesh.offsets[cells][:, None]
        pe = solution.p(x.reshape(-1, 2)).reshape(len(cells), len(w))
        ph = p_h.coeffs[cells] @ pb.values(ref).T
        p_sq += float(np.einsum("k,q,kq->", J[cells], w, (pe - ph) ** 2))
    return {
        "velocity_dg": float(np.sqrt(grad_sq + eta * jump)),
        "velocity_dg1": float(np.sqrt(grad_sq + jump)),
        "pressure_l2": float(np.sqrt(p_sq)),
    }
