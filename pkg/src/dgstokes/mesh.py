"""Conforming triangle meshes of the unit square and their Alfeld splits.

A :class:`TriangleMesh` stores vertices, positively oriented triangles and
the face (edge) connectivity that the dG forms need: for every face the
owning triangle ``K1`` (smaller index), the optional neighbour ``K2``, the
unit normal pointing out of ``K1`` and the face diameter.

Local conventions used throughout the package:

* the reference triangle is ``(0,0), (1,0), (0,1)``;
* local edge ``e`` of a triangle ``(v0, v1, v2)`` is opposite vertex ``e``,
  i.e. it runs from ``v[(e+1) % 3]`` to ``v[(e+2) % 3]``;
* a face is parametrised from ``endpoints[0]`` to ``endpoints[1]``, which is
  the counter-clockwise direction of ``K1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

REFERENCE_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


@dataclass(frozen=True)
class Face:
    endpoints: tuple[int, int]
    normal: np.ndarray
    first_element: int
    second_element: int | None
    diameter: float

    @property
    def is_boundary(self) -> bool:
        return self.second_element is None


@dataclass(frozen=True)
class AffineMap:
    """``x = matrix @ xi + offset`` from the reference triangle onto ``K``."""

    matrix: np.ndarray
    offset: np.ndarray
    jacobian_abs: float

    def __call__(self, ref_points):
        ref_points = np.asarray(ref_points, dtype=float)
        return ref_points @ self.matrix.T + self.offset

    def inverse(self, points):
        points = np.asarray(points, dtype=float)
        return np.linalg.solve(self.matrix, (points - self.offset).T).T


class TriangleMesh:
    """Immutable face-to-face triangle mesh.

    Parameters
    ----------
    vertices : (nV, 2) array_like
    triangles : (nT, 3) array_like of int
        Counter-clockwise vertex triples.
    """

    def __init__(self, vertices, triangles):
        vertices = np.array(vertices, dtype=float)
        triangles = np.array(triangles, dtype=np.int64).reshape(-1, 3)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise ValueError("vertices must have shape (n, 2)")
        if triangles.size and (triangles.min() < 0 or triangles.max() >= len(vertices)):
            raise ValueError("triangle index out of range")

        p0, p1, p2 = (vertices[triangles[:, i]] for i in range(3))
        e1, e2 = p1 - p0, p2 - p0
        signed = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        if np.any(signed <= 0.0):
            bad = int(np.argmax(signed <= 0.0))
            raise ValueError(f"triangle {bad} is degenerate or clockwise")

        self.vertices = vertices
        self.triangles = triangles
        self.areas = signed
        # per-element affine maps x = B xi + p0
        self.jacobians = np.stack([e1, e2], axis=2)
        self.offsets = p0
        self._build_faces()

        lengths = np.linalg.norm(
            np.stack([p2 - p1, p0 - p2, p1 - p0], axis=1), axis=2
        )
        self.element_diameters = lengths.max(axis=1)
        inradius = 2.0 * self.areas / lengths.sum(axis=1)
        self.shape_constant = float(np.max(self.element_diameters / (2.0 * inradius)))

        for name in ("vertices", "triangles", "areas", "jacobians", "offsets",
                     "face_vertices", "face_elements", "face_local_edges",
                     "face_normals", "face_diameters", "element_faces",
                     "element_diameters"):
            getattr(self, name).setflags(write=False)

    def _build_faces(self):
        tri = self.triangles
        nT = len(tri)
        local = np.array([[1, 2], [2, 0], [0, 1]])
        edges = tri[:, local].reshape(-1, 2)          # (3 nT, 2), CCW direction
        keys = np.sort(edges, axis=1)
        uniq, first_pos, inverse = np.unique(
            keys, axis=0, return_index=True, return_inverse=True
        )
        inverse = inverse.ravel()
        nF = len(uniq)
        counts = np.bincount(inverse, minlength=nF)
        if np.any(counts > 2):
            raise ValueError("non-manifold mesh: an edge is shared by more than two triangles")

        # unique() keeps the first occurrence, which belongs to the smaller element index
        order = np.argsort(inverse, kind="stable")
        start = np.concatenate([[0], np.cumsum(counts)[:-1]])
        pos1 = order[start]
        pos2 = np.where(counts == 2, order[np.minimum(start + 1, len(order) - 1)], -1)

        elements = np.full((nF, 2), -1, dtype=np.int64)
        local_edges = np.full((nF, 2), -1, dtype=np.int64)
        elements[:, 0] = pos1 // 3
        local_edges[:, 0] = pos1 % 3
        two = counts == 2
        elements[two, 1] = pos2[two] // 3
        local_edges[two, 1] = pos2[two] % 3

        # order faces deterministically by (K1, local edge)
        perm = np.lexsort((local_edges[:, 0], elements[:, 0]))
        elements = elements[perm]
        local_edges = local_edges[perm]
        face_of_pos = np.empty(nF, dtype=np.int64)
        face_of_pos[perm] = np.arange(nF)

        fverts = edges[3 * elements[:, 0] + local_edges[:, 0]]
        d = self.vertices[fverts[:, 1]] - self.vertices[fverts[:, 0]]
        length = np.linalg.norm(d, axis=1)
        normals = np.stack([d[:, 1], -d[:, 0]], axis=1) / length[:, None]

        self.face_vertices = fverts
        self.face_elements = elements
        self.face_local_edges = local_edges
        self.face_normals = normals
        self.face_diameters = length
        self.element_faces = face_of_pos[inverse].reshape(nT, 3)

    # ------------------------------------------------------------------ queries
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_faces(self) -> int:
        return len(self.face_vertices)

    @property
    def boundary_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_elements[:, 1] < 0)

    @property
    def interior_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_elements[:, 1] >= 0)

    @property
    def faces(self) -> list[Face]:
        out = []
        for f in range(self.n_faces):
            k2 = int(self.face_elements[f, 1])
            out.append(Face(
                endpoints=(int(self.face_vertices[f, 0]), int(self.face_vertices[f, 1])),
                normal=self.face_normals[f].copy(),
                first_element=int(self.face_elements[f, 0]),
                second_element=None if k2 < 0 else k2,
                diameter=float(self.face_diameters[f]),
            ))
        return out

    def face_orientation(self, f: int, side: int) -> int:
        """+1 if the local edge of the given side runs along the face direction."""
        K = self.face_elements[f, side]
        e = self.face_local_edges[f, side]
        return 1 if self.triangles[K, (e + 1) % 3] == self.face_vertices[f, 0] else -1

    def face_orientations(self) -> np.ndarray:
        """(nF, 2) array of :meth:`face_orientation`, 0 for missing neighbours."""
        out = np.zeros((self.n_faces, 2), dtype=np.int64)
        for side in (0, 1):
            has = self.face_elements[:, side] >= 0
            K = self.face_elements[has, side]
            e = self.face_local_edges[has, side]
            start = self.triangles[K, (e + 1) % 3]
            out[has, side] = np.where(start == self.face_vertices[has, 0], 1, -1)
        return out

    def same_as(self, other: "TriangleMesh") -> bool:
        return (np.array_equal(self.vertices, other.vertices)
                and np.array_equal(self.triangles, other.triangles))


def affine_map(mesh: TriangleMesh, K: int) -> AffineMap:
    B = mesh.jacobians[K]
    det = float(np.linalg.det(B))
    if abs(det) <= 1e-300:
        raise ValueError(f"triangle {K} is degenerate")
    return AffineMap(matrix=B.copy(), offset=mesh.offsets[K].copy(), jacobian_abs=abs(det))


def _grid_vertices(n: int) -> np.ndarray:
    t = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(t, t)          # x varies fastest
    return np.column_stack([X.ravel(), Y.ravel()])


def build_diagonal(N: int) -> TriangleMesh:
    """``2^N x 2^N`` squares, each cut by its positive-slope diagonal."""
    if N < 0:
        raise ValueError("N must be non-negative")
    n = 2 ** N
    verts = _grid_vertices(n)
    i, j = np.meshgrid(np.arange(n), np.arange(n))
    i, j = i.ravel(), j.ravel()
    p00 = j * (n + 1) + i
    p10, p01, p11 = p00 + 1, p00 + n + 1, p00 + n + 2
    tris = np.stack([
        np.column_stack([p00, p10, p11]),
        np.column_stack([p00, p11, p01]),
    ], axis=1).reshape(-1, 3)
    return TriangleMesh(verts, tris)


def build_crisscross(N: int) -> TriangleMesh:
    """``2^N x 2^N`` squares, each cut by both diagonals."""
    if N < 0:
        raise ValueError("N must be non-negative")
    n = 2 ** N
    grid = _grid_vertices(n)
    i, j = np.meshgrid(np.arange(n), np.arange(n))
    i, j = i.ravel(), j.ravel()
    centers = np.column_stack([(i + 0.5) / n, (j + 0.5) / n])
    verts = np.vstack([grid, centers])
    p00 = j * (n + 1) + i
    p10, p01, p11 = p00 + 1, p00 + n + 1, p00 + n + 2
    c = (n + 1) ** 2 + j * n + i
    tris = np.stack([
        np.column_stack([p00, p10, c]),
        np.column_stack([p10, p11, c]),
        np.column_stack([p11, p01, c]),
        np.column_stack([p01, p00, c]),
    ], axis=1).reshape(-1, 3)
    return TriangleMesh(verts, tris)


def alfeld_split(mesh: TriangleMesh) -> tuple[TriangleMesh, np.ndarray]:
    """Split every triangle at its barycenter.

    Child ``3K + j`` is ``(v_j, v_{j+1}, b_K)``, so its reference map equals
    the parent map composed with the fixed reference split. Returns the split
    mesh and the child -> parent index map.
    """
    nV, nT = mesh.n_vertices, mesh.n_triangles
    tri = mesh.triangles
    bary = mesh.vertices[tri].mean(axis=1)
    verts = np.vstack([mesh.vertices, bary])
    b = nV + np.arange(nT)
    children = np.stack([
        np.column_stack([tri[:, 0], tri[:, 1], b]),
        np.column_stack([tri[:, 1], tri[:, 2], b]),
        np.column_stack([tri[:, 2], tri[:, 0], b]),
    ], axis=1).reshape(-1, 3)
    parent = np.repeat(np.arange(nT), 3)
    return TriangleMesh(verts, children), parent


def reference_mesh() -> TriangleMesh:
    return TriangleMesh(REFERENCE_VERTICES, [[0, 1, 2]])


@dataclass(frozen=True)
class LagrangeNumbering:
    """Global numbering of the degree-``p`` Lagrange nodes of a mesh."""

    degree: int
    element_nodes: np.ndarray     # (nT, n_local) global node ids
    coordinates: np.ndarray       # (nG, 2)
    on_boundary: np.ndarray       # (nG,) bool
    multiplicity: np.ndarray      # (nG,) number of triangles containing the node

    @property
    def n_nodes(self) -> int:
        return len(self.coordinates)


def lattice_indices(p: int) -> np.ndarray:
    """Barycentric integer indices ``(k0, k1, k2)`` of the reference nodes.

    Node ordering is ``j`` outer, ``i`` inner for the point ``(i/p, j/p)``.
    """
    out = [(p - i - j, i, j) for j in range(p + 1) for i in range(p + 1 - j)]
    return np.array(out, dtype=np.int64)


def lagrange_numbering(mesh: TriangleMesh, p: int) -> LagrangeNumbering:
    if p < 1:
        raise ValueError("continuous Lagrange numbering needs degree >= 1")
    lat = lattice_indices(p)                       # (nl, 3)
    nT, nl = mesh.n_triangles, len(lat)
    G = np.broadcast_to(mesh.triangles[:, None, :], (nT, nl, 3))
    k = np.broadcast_to(lat[None], (nT, nl, 3))
    Gm = np.where(k > 0, G, -1)
    srt = np.argsort(Gm, axis=2, kind="stable")
    Gs = np.take_along_axis(Gm, srt, axis=2)
    ks = np.take_along_axis(k, srt, axis=2)
    keys = np.concatenate([Gs, ks], axis=2).reshape(-1, 6)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    element_nodes = inverse.reshape(nT, nl)

    verts_of = uniq[:, :3]
    ks_of = uniq[:, 3:]
    safe = np.maximum(verts_of, 0)
    coords = (ks_of[:, :, None] * mesh.vertices[safe]).sum(axis=1) / p

    bfaces = mesh.boundary_faces
    bverts = np.zeros(mesh.n_vertices, dtype=bool)
    bverts[mesh.face_vertices[bfaces].ravel()] = True
    nV = mesh.n_vertices
    bkeys = np.sort(mesh.face_vertices[bfaces], axis=1)
    bcode = np.sort(bkeys[:, 0] * nV + bkeys[:, 1])
    nsupport = (ks_of > 0).sum(axis=1)
    on_boundary = np.zeros(len(uniq), dtype=bool)
    one = nsupport == 1
    on_boundary[one] = bverts[verts_of[one, 2]]
    two = nsupport == 2
    code = verts_of[two, 1] * nV + verts_of[two, 2]
    idx = np.searchsorted(bcode, code)
    idx = np.minimum(idx, max(len(bcode) - 1, 0))
    on_boundary[two] = (len(bcode) > 0) & (bcode[idx] == code)

    multiplicity = np.bincount(inverse, minlength=len(uniq))
    return LagrangeNumbering(p, element_nodes, coords, on_boundary, multiplicity)


def write_mesh(mesh: TriangleMesh, path) -> None:
    """Plain-text dump: vertex count, ``x y`` lines, triangle count, ``i j k`` lines."""
    path = Path(path)
    with path.open("w") as fh:
        fh.write(f"{mesh.n_vertices}\n")
        for x, y in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        fh.write(f"{mesh.n_triangles}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"{a} {b} {c}\n")


def read_mesh(path) -> TriangleMesh:
    lines = Path(path).read_text().split("\n")
    nV = int(lines[0])
    verts = [tuple(map(float, ln.split())) for ln in lines[1:1 + nV]]
    nT = int(lines[1 + nV])
    tris = [tuple(map(int, ln.split())) for ln in lines[2 + nV:2 + nV + nT]]
    return TriangleMesh(verts, tris)
