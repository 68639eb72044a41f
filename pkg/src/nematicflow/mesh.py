"""Conforming simplicial meshes of axis-aligned boxes.

Two fixed constructions are provided:

* 2D: each grid square is split into four triangles about its center
  ("union jack").  Every triangle touches a square center, and centers are
  never on the boundary, so every cell has an interior vertex for any
  resolution n >= 1.
* 3D: each grid cube is split into six tetrahedra sharing a main diagonal
  (Kuhn subdivision).  The diagonal of cube (i,j,k) is reflected according
  to the parity of (i,j,k), which keeps the subdivision conforming across
  cube faces and, for even n, places one diagonal endpoint at an interior
  lattice vertex so that every tetrahedron has an interior vertex.  For odd
  n >= 3 no parity pattern achieves this near two opposite box corners, so
  such resolutions are rejected; n = 1 is allowed for geometric tests but
  flagged as violating the interior-vertex property.

Vertex numbering is deterministic: lattice vertices in lexicographic order
(x fastest), then (in 2D) square centers in the same order.  Cell-local
vertices are ordered so that the signed volume is positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations

import numpy as np


class InvalidDomainError(ValueError):
    """Raised for degenerate or malformed box bounds."""


class MeshAssumptionError(ValueError):
    """Raised when a requested mesh cannot satisfy the interior-vertex property."""


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable conforming simplicial mesh of a box."""

    dim: int
    vertices: np.ndarray            # (nv, dim)
    cells: np.ndarray               # (nc, dim+1), positively oriented
    boundary_vertices: np.ndarray   # sorted vertex indices on the box boundary
    interior_vertices: np.ndarray
    boundary_facets: np.ndarray     # (nbf, dim), outward oriented
    h: float                        # maximal cell diameter
    quasi_uniformity_ratio: float   # h / min inscribed-ball diameter
    bounds: tuple
    n: int
    interior_vertex_per_cell: bool = field(default=True)

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_cells(self) -> int:
        return self.cells.shape[0]


def _check_bounds(bounds, dim):
    bounds = tuple((float(a), float(b)) for a, b in bounds)
    if len(bounds) != dim:
        raise InvalidDomainError(f"need {dim} bound pairs, got {len(bounds)}")
    for a, b in bounds:
        if not np.isfinite(a) or not np.isfinite(b) or b <= a:
            raise InvalidDomainError(f"degenerate interval ({a}, {b})")
    return bounds


def build_box_mesh(bounds, n: int, dim: int) -> Mesh:
    """Mesh the box given by per-axis (lo, hi) pairs with n cells per axis."""
    if dim not in (2, 3):
        raise InvalidDomainError(f"dim must be 2 or 3, got {dim}")
    if n < 1:
        raise InvalidDomainError(f"resolution n must be >= 1, got {n}")
    bounds = _check_bounds(bounds, dim)
    if dim == 2:
        verts, cells, bverts = _unionjack_2d(bounds, n)
    else:
        verts, cells, bverts = _kuhn_3d(bounds, n)

    cells = _orient_positive(verts, cells)
    h, ratio = _quality(verts, cells)
    bset = np.zeros(len(verts), dtype=bool)
    bset[bverts] = True
    interior = np.flatnonzero(~bset)
    facets = _boundary_facets(verts, cells)

    cell_ok = np.any(~bset[cells], axis=1)
    all_ok = bool(np.all(cell_ok))
    if not all_ok:
        if dim == 3 and n == 1:
            pass  # single-cube mesh kept for geometric tests
        else:
            raise MeshAssumptionError(
                f"{np.count_nonzero(~cell_ok)} cells have all vertices on the "
                f"boundary (dim={dim}, n={n}); in 3D use an even resolution"
            )

    verts.setflags(write=False)
    cells.setflags(write=False)
    facets.setflags(write=False)
    return Mesh(
        dim=dim,
        vertices=verts,
        cells=cells,
        boundary_vertices=np.sort(bverts),
        interior_vertices=interior,
        boundary_facets=facets,
        h=h,
        quasi_uniformity_ratio=ratio,
        bounds=bounds,
        n=n,
        interior_vertex_per_cell=all_ok,
    )


def _lattice(bounds, n, dim):
    axes = [np.linspace(a, b, n + 1) for a, b in bounds]
    if dim == 2:
        X, Y = np.meshgrid(axes[0], axes[1], indexing="xy")
        pts = np.column_stack([X.ravel(), Y.ravel()])
    else:
        Z, Y, X = np.meshgrid(axes[2], axes[1], axes[0], indexing="ij")
        pts = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    return pts


def _unionjack_2d(bounds, n):
    nv_lat = (n + 1) ** 2
    verts_lat = _lattice(bounds, n, 2)
    (ax, bx), (ay, by) = bounds
    hx, hy = (bx - ax) / n, (by - ay) / n
    cx, cy = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    centers = np.column_stack(
        [ax + (cx.ravel() + 0.5) * hx, ay + (cy.ravel() + 0.5) * hy]
    )
    verts = np.vstack([verts_lat, centers])

    def lat(i, j):
        return j * (n + 1) + i

    cells = []
    for j in range(n):
        for i in range(n):
            c = nv_lat + j * n + i
            v00, v10 = lat(i, j), lat(i + 1, j)
            v11, v01 = lat(i + 1, j + 1), lat(i, j + 1)
            cells += [(v00, v10, c), (v10, v11, c), (v11, v01, c), (v01, v00, c)]

    bverts = [
        lat(i, j)
        for j in range(n + 1)
        for i in range(n + 1)
        if i in (0, n) or j in (0, n)
    ]
    return verts, np.array(cells, dtype=np.int64), np.array(bverts, dtype=np.int64)


_KUHN_PATHS = []
for _perm in permutations(range(3)):
    _b = np.zeros(3, dtype=np.int64)
    _path = [_b.copy()]
    for _axis in _perm:
        _b = _b.copy()
        _b[_axis] = 1
        _path.append(_b)
    _KUHN_PATHS.append(np.array(_path))


def _kuhn_3d(bounds, n):
    verts = _lattice(bounds, n, 3)

    def lat(i, j, k):
        return (k * (n + 1) + j) * (n + 1) + i

    cells = []
    for k in range(n):
        for j in range(n):
            for i in range(n):
                parity = np.array([i & 1, j & 1, k & 1], dtype=np.int64)
                base = np.array([i, j, k], dtype=np.int64)
                for path in _KUHN_PATHS:
                    corners = base + np.bitwise_xor(path, parity)
                    cells.append(tuple(lat(*c) for c in corners))

    idx = np.arange(n + 1)
    I, J, K = np.meshgrid(idx, idx, idx, indexing="ij")
    on_bd = (I % n == 0) | (J % n == 0) | (K % n == 0)
    bverts = np.array(
        sorted(lat(i, j, k) for i, j, k in zip(I[on_bd], J[on_bd], K[on_bd])),
        dtype=np.int64,
    )
    return verts, np.array(cells, dtype=np.int64), bverts


def _signed_volumes(verts, cells):
    coords = verts[cells]
    edges = coords[:, 1:, :] - coords[:, :1, :]
    dim = verts.shape[1]
    det = np.linalg.det(edges)
    return det / (2.0 if dim == 2 else 6.0)


def _orient_positive(verts, cells):
    vol = _signed_volumes(verts, cells)
    flip = vol < 0
    cells = cells.copy()
    cells[flip, -2], cells[flip, -1] = cells[flip, -1], cells[flip, -2].copy()
    if np.any(_signed_volumes(verts, cells) <= 0):
        raise InvalidDomainError("degenerate cell produced during meshing")
    return cells


def _quality(verts, cells):
    coords = verts[cells]
    nloc = coords.shape[1]
    diam = 0.0
    for a in range(nloc):
        for b in range(a + 1, nloc):
            d = np.linalg.norm(coords[:, a] - coords[:, b], axis=1)
            diam = max(diam, d.max())
    vols = _signed_volumes(verts, cells)
    dim = verts.shape[1]
    if dim == 2:
        per = np.zeros(len(cells))
        for a, b in ((0, 1), (1, 2), (2, 0)):
            per += np.linalg.norm(coords[:, a] - coords[:, b], axis=1)
        inradius = 2.0 * vols / per
    else:
        area = np.zeros(len(cells))
        for f in ((1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)):
            e1 = coords[:, f[1]] - coords[:, f[0]]
            e2 = coords[:, f[2]] - coords[:, f[0]]
            area += 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)
        inradius = 3.0 * vols / area
    return float(diam), float(diam / (2.0 * inradius.min()))


def _facet_incidence(cells):
    """Map sorted facet tuple -> list of (cell index, opposite local vertex)."""
    incidence = {}
    nloc = cells.shape[1]
    for ci, cell in enumerate(cells):
        for loc in range(nloc):
            facet = tuple(sorted(np.delete(cell, loc)))
            incidence.setdefault(facet, []).append((ci, loc))
    return incidence


def _boundary_facets(verts, cells):
    dim = verts.shape[1]
    facets = []
    for facet, hits in sorted(_facet_incidence(cells).items()):
        if len(hits) != 1:
            continue
        ci, loc = hits[0]
        cell = cells[ci]
        opp = verts[cell[loc]]
        fv = list(facet)
        pts = verts[fv]
        mid = pts.mean(axis=0)
        if dim == 2:
            t = pts[1] - pts[0]
            normal = np.array([t[1], -t[0]])
        else:
            normal = np.cross(pts[1] - pts[0], pts[2] - pts[0])
        if np.dot(normal, mid - opp) < 0:
            fv[-2], fv[-1] = fv[-1], fv[-2]
        facets.append(fv)
    return np.array(facets, dtype=np.int64)


def boundary_classification(mesh: Mesh):
    """Return (boundary vertices, interior vertices, outward boundary facets)."""
    return mesh.boundary_vertices, mesh.interior_vertices, mesh.boundary_facets


def cell_geometry(mesh: Mesh, cell_id: int):
    """Return (volume, vertex coords, Jacobian of the reference-to-cell map)."""
    if not 0 <= cell_id < mesh.num_cells:
        raise IndexError(f"cell id {cell_id} out of range")
    coords = mesh.vertices[mesh.cells[cell_id]]
    jac = (coords[1:] - coords[0]).T
    det = np.linalg.det(jac)
    vol = det / (2.0 if mesh.dim == 2 else 6.0)
    return vol, coords, jac


def cell_volumes(mesh: Mesh) -> np.ndarray:
    return _signed_volumes(mesh.vertices, mesh.cells)


def verify_conformity(mesh: Mesh) -> dict:
    """Exhaustive facet-matching check.

    Every facet must belong to exactly one cell (then it is a boundary facet)
    or exactly two.  Returns counters; raises on violation.
    """
    counts = {1: 0, 2: 0}
    for facet, hits in _facet_incidence(mesh.cells).items():
        if len(hits) not in (1, 2):
            raise AssertionError(f"facet {facet} shared by {len(hits)} cells")
        counts[len(hits)] += 1
    if counts[1] != len(mesh.boundary_facets):
        raise AssertionError("boundary facet count mismatch")
    return {"boundary_facets": counts[1], "interior_facets": counts[2]}
