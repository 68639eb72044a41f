"""Lagrange finite element spaces and the projection operators.

Spaces: continuous piecewise linears (scalar and vector, with or without a
boundary trace distinction), continuous piecewise quadratics (vector, for
the velocity), and the zero-mean piecewise-linear pressure space.

Degrees of freedom are interleaved component-major: all x-values first, then
all y-values, then z.  Scalar dof numbering follows the mesh vertex order;
quadratic spaces append one dof per edge midpoint, edges sorted
lexicographically by their vertex pair.

The module also houses the nodal interpolation operator, the lumped (nodal
quadrature) inner product with its norm-equivalence constants, the
consistent L2 projection, the lumped projection (the adjoint of nodal
interpolation with respect to the lumped product), and the divergence-free
velocity projection.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .mesh import Mesh, cell_volumes
from .quadrature import simplex_rule

P1_SCALAR = "P1-scalar"
P1_VECTOR = "P1-vector"
P2_VECTOR = "P2-vector"
P1_PRESSURE = "P1-pressure"

_KINDS = (P1_SCALAR, P1_VECTOR, P2_VECTOR, P1_PRESSURE)


@dataclass(frozen=True, eq=False)
class MeshGeometry:
    jac: np.ndarray        # (nc, dim, dim), columns are edge vectors
    inv_jac_t: np.ndarray  # (nc, dim, dim), maps reference to physical gradients
    volumes: np.ndarray    # (nc,)


@lru_cache(maxsize=None)
def geometry(mesh: Mesh) -> MeshGeometry:
    coords = mesh.vertices[mesh.cells]
    jac = np.transpose(coords[:, 1:, :] - coords[:, :1, :], (0, 2, 1))
    inv_jac_t = np.transpose(np.linalg.inv(jac), (0, 2, 1))
    vols = cell_volumes(mesh)
    return MeshGeometry(jac=jac, inv_jac_t=inv_jac_t, volumes=vols)


@lru_cache(maxsize=None)
def lumped_weights(mesh: Mesh) -> np.ndarray:
    """Integral of every vertex hat function (diagonal of the lumped mass)."""
    vols = cell_volumes(mesh)
    w = np.zeros(mesh.num_vertices)
    np.add.at(w, mesh.cells.ravel(), np.repeat(vols / (mesh.dim + 1), mesh.dim + 1))
    w.setflags(write=False)
    return w


def _mesh_edges(mesh: Mesh) -> np.ndarray:
    dim = mesh.dim
    local = [(a, b) for a in range(dim + 1) for b in range(a + 1, dim + 1)]
    pairs = np.vstack([np.sort(mesh.cells[:, pair], axis=1) for pair in local])
    return np.unique(pairs, axis=0)


def _on_box_boundary(points: np.ndarray, bounds, tol: float) -> np.ndarray:
    hit = np.zeros(points.shape[0], dtype=bool)
    for axis, (lo, hi) in enumerate(bounds):
        hit |= np.abs(points[:, axis] - lo) <= tol
        hit |= np.abs(points[:, axis] - hi) <= tol
    return hit


class FESpace:
    """A Lagrange space on a box mesh; immutable after construction."""

    def __init__(self, mesh: Mesh, kind: str):
        if kind not in _KINDS:
            raise ValueError(f"unknown space kind {kind!r}")
        self.mesh = mesh
        self.kind = kind
        self.degree = 2 if kind == P2_VECTOR else 1
        self.components = mesh.dim if kind in (P1_VECTOR, P2_VECTOR) else 1
        if kind == P1_VECTOR:
            # director fields carry 3 components only through their in-plane
            # part in 2D; the dimension-agnostic cross-product forms cover this
            self.components = mesh.dim

        if self.degree == 1:
            self.dof_coords = mesh.vertices
            self.cell_dofs = mesh.cells
            self.edges = None
        else:
            edges = _mesh_edges(mesh)
            nv = mesh.num_vertices
            key = {(a, b): nv + i for i, (a, b) in enumerate(map(tuple, edges))}
            mid = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
            self.dof_coords = np.vstack([mesh.vertices, mid])
            dim = mesh.dim
            local = [(a, b) for a in range(dim + 1) for b in range(a + 1, dim + 1)]
            edge_cols = [
                [key[tuple(sorted((cell[a], cell[b])))] for (a, b) in local]
                for cell in mesh.cells
            ]
            self.cell_dofs = np.hstack(
                [mesh.cells, np.asarray(edge_cols, dtype=np.int64)]
            )
            self.edges = edges

        self.num_scalar_dofs = self.dof_coords.shape[0]
        scale = max(hi - lo for lo, hi in mesh.bounds)
        on_bd = _on_box_boundary(self.dof_coords, mesh.bounds, 1e-12 * scale)
        self.boundary_scalar_dofs = np.flatnonzero(on_bd)
        self.dof_coords.setflags(write=False)
        self.cell_dofs.setflags(write=False)

    @property
    def num_dofs(self) -> int:
        return self.components * self.num_scalar_dofs

    @property
    def boundary_dofs(self) -> np.ndarray:
        """Boundary dofs across all components (component-major layout)."""
        n = self.num_scalar_dofs
        return np.concatenate(
            [c * n + self.boundary_scalar_dofs for c in range(self.components)]
        )

    def global_dof(self, component: int, scalar_dof) -> np.ndarray:
        return component * self.num_scalar_dofs + np.asarray(scalar_dof)

    def zero_function(self) -> "FEFunction":
        return FEFunction(self, np.zeros(self.num_dofs))

    def basis(self, bary: np.ndarray):
        """Reference basis values and gradients at barycentric points.

        Returns (values (nq, nloc), ref_grads (nq, nloc, dim)).
        """
        dim = self.mesh.dim
        lam = np.asarray(bary)
        nq = lam.shape[0]
        grad_lam = np.vstack([-np.ones((1, dim)), np.eye(dim)])  # (dim+1, dim)
        if self.degree == 1:
            vals = lam.copy()
            grads = np.broadcast_to(grad_lam, (nq, dim + 1, dim)).copy()
            return vals, grads
        local = [(a, b) for a in range(dim + 1) for b in range(a + 1, dim + 1)]
        nloc = dim + 1 + len(local)
        vals = np.empty((nq, nloc))
        grads = np.empty((nq, nloc, dim))
        for i in range(dim + 1):
            vals[:, i] = lam[:, i] * (2 * lam[:, i] - 1)
            grads[:, i, :] = (4 * lam[:, i] - 1)[:, None] * grad_lam[i]
        for e, (a, b) in enumerate(local):
            j = dim + 1 + e
            vals[:, j] = 4 * lam[:, a] * lam[:, b]
            grads[:, j, :] = 4 * (
                lam[:, b][:, None] * grad_lam[a] + lam[:, a][:, None] * grad_lam[b]
            )
        return vals, grads


@dataclass(eq=False)
class FEFunction:
    """Coefficients of a finite element function (component-major)."""

    space: FESpace
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.space.num_dofs,):
            raise ValueError(
                f"expected {self.space.num_dofs} dof values, got {self.values.shape}"
            )

    @classmethod
    def from_nodal(cls, space: FESpace, nodal: np.ndarray) -> "FEFunction":
        """Build from an (num_scalar_dofs, components) array."""
        nodal = np.asarray(nodal, dtype=np.float64)
        nodal = nodal.reshape(space.num_scalar_dofs, space.components)
        return cls(space, nodal.T.reshape(-1).copy())

    def as_nodal(self) -> np.ndarray:
        """(num_scalar_dofs, components) view of the coefficients."""
        n = self.space.num_scalar_dofs
        return self.values.reshape(self.space.components, n).T

    def vertex_values(self) -> np.ndarray:
        """(num_vertices, components); quadratic spaces restrict to vertices."""
        return self.as_nodal()[: self.space.mesh.num_vertices]

    def copy(self) -> "FEFunction":
        return FEFunction(self.space, self.values.copy())

    def eval_cells(self, bary: np.ndarray) -> np.ndarray:
        """Values at barycentric points of every cell: (nc, nq, components)."""
        vals, _ = self.space.basis(bary)
        coeff = self.as_nodal()[self.space.cell_dofs]  # (nc, nloc, comps)
        return np.einsum("qi,cik->cqk", vals, coeff)

    def eval_grad_cells(self, bary: np.ndarray) -> np.ndarray:
        """Physical gradients per cell: (nc, nq, components, dim)."""
        _, ref_grads = self.space.basis(bary)
        geo = geometry(self.space.mesh)
        phys = np.einsum("cde,qie->cqid", geo.inv_jac_t, ref_grads)
        coeff = self.as_nodal()[self.space.cell_dofs]
        return np.einsum("cqid,cik->cqkd", phys, coeff)


def _eval_field(f, points: np.ndarray, components: int) -> np.ndarray:
    """Evaluate a callable field at a stack of points, tolerant of both
    vectorized (accepting (N, dim)) and pointwise signatures."""
    points = np.asarray(points, dtype=np.float64)
    try:
        out = np.asarray(f(points), dtype=np.float64)
        if components == 1 and out.shape == (points.shape[0],):
            return out[:, None]
        if out.shape == (points.shape[0], components):
            return out
    except Exception:
        pass
    rows = [np.atleast_1d(np.asarray(f(p), dtype=np.float64)) for p in points]
    out = np.vstack(rows)
    if out.shape != (points.shape[0], components):
        raise ValueError(
            f"field returned shape {out.shape}, expected ({points.shape[0]}, {components})"
        )
    return out


def interpolate_nodal(space: FESpace, f) -> FEFunction:
    """Interpolation at the space's nodes: result(z) = f(z) for every node z."""
    vals = _eval_field(f, space.dof_coords, space.components)
    return FEFunction.from_nodal(space, vals)


def _nodal_arrays(y1, y2):
    if isinstance(y1, FEFunction) and isinstance(y2, FEFunction):
        if y1.space.mesh is not y2.space.mesh:
            raise ValueError("lumped product requires functions on the same mesh")
        if y1.space.degree != 1 or y2.space.degree != 1:
            raise ValueError("lumped product is defined on piecewise-linear data")
        return y1.as_nodal(), y2.as_nodal(), y1.space.mesh
    raise TypeError("expected FEFunction arguments")


def lumped_inner_product(y1, y2, mesh: Mesh | None = None) -> float:
    """Nodal-quadrature inner product  sum_z y1(z).y2(z) * w_z.

    Accepts piecewise-linear FEFunctions, or raw (num_vertices, components)
    arrays together with their mesh.
    """
    if isinstance(y1, FEFunction) or isinstance(y2, FEFunction):
        a, b, mesh = _nodal_arrays(y1, y2)
    else:
        if mesh is None:
            raise ValueError("mesh required for raw nodal arrays")
        a = np.atleast_2d(np.asarray(y1, dtype=np.float64).T).T
        b = np.atleast_2d(np.asarray(y2, dtype=np.float64).T).T
        if a.shape != b.shape or a.shape[0] != mesh.num_vertices:
            raise ValueError("nodal arrays must share shape (num_vertices, comps)")
    w = lumped_weights(mesh)
    return float(np.einsum("zk,zk,z->", a, b, w))


def lumped_norm(y, mesh: Mesh | None = None) -> float:
    return float(np.sqrt(max(lumped_inner_product(y, y, mesh), 0.0)))


def norm_equivalence_constants(dim: int) -> tuple[float, float]:
    """(lower, upper) constants between the L2 norm and the lumped norm.

    ||y||_L2 <= ||y||_lumped <= c * ||y||_L2 with c = sqrt(dim + 2); both
    bounds follow from the eigenvalues of the element mass matrix.
    """
    return 1.0, float(np.sqrt(dim + 2))


def moment_vector(space: FESpace, f, degree: int = 5) -> np.ndarray:
    """Integrals of f against every basis function, (num_dofs,) array."""
    mesh = space.mesh
    bary, wq = simplex_rule(mesh.dim, degree)
    geo = geometry(mesh)
    pts = np.einsum("qv,cvd->cqd", bary, mesh.vertices[mesh.cells])
    fv = _eval_field(f, pts.reshape(-1, mesh.dim), space.components)
    fv = fv.reshape(len(mesh.cells), len(wq), space.components)
    vals, _ = space.basis(bary)
    local = np.einsum("q,qi,cqk,c->cik", wq, vals, fv, geo.volumes)
    out = np.zeros((space.num_scalar_dofs, space.components))
    np.add.at(out, space.cell_dofs.ravel(), local.reshape(-1, space.components))
    return out.T.reshape(-1)


def l2_projection(space: FESpace, f, degree: int = 5) -> FEFunction:
    """Consistent-mass L2 projection onto the space."""
    from . import operators
    from .sparsela import DirectFactorization

    mass = operators.mass_matrix(space, scalar=True)
    rhs = moment_vector(space, f, degree=degree)
    fact = DirectFactorization(mass)
    n = space.num_scalar_dofs
    out = np.concatenate(
        [fact.solve(rhs[c * n : (c + 1) * n]) for c in range(space.components)]
    )
    return FEFunction(space, out)


def lumped_projection(space: FESpace, f, degree: int = 5) -> FEFunction:
    """Projection adjoint to nodal interpolation under the lumped product.

    Nodal values are the hat-function moments of f divided by the hat
    integrals; it satisfies (proj f, b)_lumped = (f, b) for piecewise-linear b
    and is nonexpansive from L2 into the lumped norm.
    """
    if space.degree != 1:
        raise ValueError("lumped projection targets piecewise-linear spaces")
    rhs = moment_vector(space, f, degree=degree)
    w = lumped_weights(space.mesh)
    nodal = rhs.reshape(space.components, -1).T / w[:, None]
    return FEFunction.from_nodal(space, nodal)


def divfree_projection(
    vspace: FESpace,
    pspace: FESpace,
    f,
    boundary_values: np.ndarray | None = None,
    degree: int = 5,
) -> FEFunction:
    """L2-closest velocity with discretely vanishing divergence.

    Minimizes ||v - f||_L2 over the quadratic vector space subject to
    (div v, q) = 0 for all pressure basis functions, via a saddle-point
    solve; boundary dofs are pinned to the nodal interpolant of f unless
    explicit values are supplied.
    """
    from . import operators
    from .sparsela import BlockSaddleSystem, solve_saddle

    if vspace.kind != P2_VECTOR or pspace.kind != P1_PRESSURE:
        raise ValueError("divergence-free projection expects the mixed pair")
    mass = operators.mass_matrix(vspace)
    div = operators.divergence_matrix(vspace, pspace)
    mean = operators.pressure_mean_vector(pspace)
    rhs = moment_vector(vspace, f, degree=degree)

    if boundary_values is None:
        binterp = _eval_field(
            f, vspace.dof_coords[vspace.boundary_scalar_dofs], vspace.components
        )
        boundary_values = binterp.T.reshape(-1)
    system = BlockSaddleSystem(
        a=mass,
        b=div,
        rhs_primal=rhs,
        rhs_constraint=np.zeros(div.nrows),
        mean_weights=mean,
    )
    system = operators.constrain_saddle(system, vspace.boundary_dofs, boundary_values)
    v, _ = solve_saddle(system)
    return FEFunction(vspace, v)
