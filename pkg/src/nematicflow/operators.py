"""Assembly of every form used by the time stepper.

Conventions
-----------
* Nodal (lumped) products over piecewise-linear data are sums over mesh
  vertices weighted by hat-function integrals.  Where a quadratic velocity
  enters such a product through its gradient, the gradient is taken cellwise
  and accumulated with the per-cell share of the hat integral, which is the
  unique extension keeping the algebraic cancellations of the scheme exact.
* In 2D the director keeps two components and every cross product is read
  through the in-plane embedding: pair products (a x b).(c x d) become
  scalar products of the out-of-plane components, and d x (d x w) is the
  dimension-agnostic (d.w)d - |d|^2 w.
* Vector dofs are component-major; local element matrices are ordered the
  same way so scattering is uniform.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .fespace import FESpace, FEFunction, geometry, lumped_weights
from .quadrature import simplex_rule
from .sparsela import BlockSaddleSystem, SparseMatrix

FULL = "full"
SIMPLIFIED = "simplified"


@dataclass
class Params:
    """Model and discretization constants.

    mu1, mu4, mu5_plus_mu6, lam are the anisotropic viscosity coefficients;
    nu is the viscosity of the simplified model; A scales director
    elasticity and v_el the flow/director coupling strength.  k is the time
    step, theta the fixed-point stopping tolerance and T the final time.
    """

    mu1: float = 1.0
    mu4: float = 1.0
    mu5_plus_mu6: float = 2.0
    lam: float = 1.0
    nu: float = 1.0
    A: float = 1.0
    v_el: float = 1.0
    k: float = 2.5e-4
    theta: float = 1e-6
    T: float = 1.0
    model: str = FULL
    max_iterations: int = 200

    def __post_init__(self):
        if self.model not in (FULL, SIMPLIFIED):
            raise ValueError(f"model must be 'full' or 'simplified', got {self.model!r}")
        if self.k <= 0:
            raise ValueError("time step k must be positive")
        if self.theta <= 0:
            raise ValueError("fixed-point tolerance theta must be positive")
        if self.mu4 <= 0:
            raise ValueError("mu4 must be positive")
        if self.mu5_plus_mu6 - self.lam**2 < 0:
            raise ValueError("mu5 + mu6 - lam^2 must be nonnegative")
        if self.mu1 + self.lam**2 < 0:
            raise ValueError("mu1 + lam^2 must be nonnegative")


@dataclass
class DirectorField:
    """Director with its fixed boundary trace (time-independent lift)."""

    function: FEFunction
    boundary_values: np.ndarray  # (n_boundary_vertices, dim)

    def nodal(self) -> np.ndarray:
        return self.function.as_nodal()


# ---------------------------------------------------------------------------
# dimension-agnostic cross product helpers
# ---------------------------------------------------------------------------

def cross_vec(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross product of stacked vectors; in 2D the out-of-plane scalar."""
    if a.shape[-1] == 3:
        return np.cross(a, b)
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def zcross(q, m: np.ndarray) -> np.ndarray:
    """q x m where q is a full vector (3D) or out-of-plane scalar (2D)."""
    if m.shape[-1] == 3:
        return np.cross(q, m)
    return np.asarray(q)[..., None] * np.stack([-m[..., 1], m[..., 0]], axis=-1)


def double_cross(d: np.ndarray, w: np.ndarray) -> np.ndarray:
    """d x (d x w) = (d.w) d - |d|^2 w, valid in both dimensions."""
    dw = np.sum(d * w, axis=-1, keepdims=True)
    dd = np.sum(d * d, axis=-1, keepdims=True)
    return dw * d - dd * w


def cross_matrices(x: np.ndarray, dim: int) -> np.ndarray:
    """Per-node matrices S with S m = x cross m (x scalar array in 2D)."""
    n = x.shape[0]
    out = np.zeros((n, dim, dim))
    if dim == 3:
        out[:, 0, 1] = -x[:, 2]
        out[:, 0, 2] = x[:, 1]
        out[:, 1, 0] = x[:, 2]
        out[:, 1, 2] = -x[:, 0]
        out[:, 2, 0] = -x[:, 1]
        out[:, 2, 1] = x[:, 0]
    else:
        out[:, 0, 1] = -x
        out[:, 1, 0] = x
    return out


# ---------------------------------------------------------------------------
# basic matrices
# ---------------------------------------------------------------------------

def _block_diag(mat: sp.spmatrix, comps: int) -> SparseMatrix:
    if comps == 1:
        return SparseMatrix(mat.tocsr())
    return SparseMatrix(sp.kron(sp.identity(comps), mat, format="csr"))


def _scatter_scalar(space: FESpace, local: np.ndarray) -> sp.csr_matrix:
    """Scatter (nc, nloc, nloc) local blocks into the scalar dof matrix."""
    dofs = space.cell_dofs
    nloc = dofs.shape[1]
    rows = np.repeat(dofs, nloc, axis=1).ravel()
    cols = np.tile(dofs, (1, nloc)).ravel()
    n = space.num_scalar_dofs
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _quad_data(space: FESpace, degree: int):
    bary, w = simplex_rule(space.mesh.dim, degree)
    vals, ref_grads = space.basis(bary)
    geo = geometry(space.mesh)
    grads = np.einsum("cde,qie->cqid", geo.inv_jac_t, ref_grads)
    return bary, w, vals, grads, geo


@lru_cache(maxsize=None)
def mass_matrix(space: FESpace, scalar: bool = False) -> SparseMatrix:
    """Consistent mass matrix; exact quadrature for the product degree."""
    degree = 2 * space.degree
    bary, w, vals, _, geo = _quad_data(space, degree)
    ref = np.einsum("q,qi,qj->ij", w, vals, vals)
    local = geo.volumes[:, None, None] * ref
    m = _scatter_scalar(space, local)
    return _block_diag(m, 1 if scalar else space.components)


@lru_cache(maxsize=None)
def stiffness_matrix(space: FESpace, scalar: bool = False) -> SparseMatrix:
    """Gradient-gradient matrix, per component for vector spaces."""
    degree = 2 * (space.degree - 1)
    _, w, _, grads, geo = _quad_data(space, degree)
    local = np.einsum("q,cqid,cqjd,c->cij", w, grads, grads, geo.volumes)
    k = _scatter_scalar(space, local)
    return _block_diag(k, 1 if scalar else space.components)


@lru_cache(maxsize=None)
def divergence_matrix(vspace: FESpace, pspace: FESpace) -> SparseMatrix:
    """B with rows over pressure dofs: B[q, v] = (div v, q)."""
    mesh = vspace.mesh
    if pspace.mesh is not mesh:
        raise ValueError("mixed pair must share the mesh")
    degree = vspace.degree  # div(P2) * P1 has degree 2
    bary, w = simplex_rule(mesh.dim, degree + pspace.degree - 1)
    pvals, _ = pspace.basis(bary)
    _, ref_grads = vspace.basis(bary)
    geo = geometry(mesh)
    grads = np.einsum("cde,qie->cqid", geo.inv_jac_t, ref_grads)
    local = np.einsum("q,qi,cqjd,c->cidj", w, pvals, grads, geo.volumes)

    nc, nlocp = pspace.cell_dofs.shape
    nlocv = vspace.cell_dofs.shape[1]
    dim = mesh.dim
    rows = np.broadcast_to(
        pspace.cell_dofs[:, :, None, None], (nc, nlocp, dim, nlocv)
    ).ravel()
    cols = (
        np.arange(dim)[None, None, :, None] * vspace.num_scalar_dofs
        + vspace.cell_dofs[:, None, None, :]
    )
    cols = np.broadcast_to(cols, (nc, nlocp, dim, nlocv)).ravel()
    mat = sp.coo_matrix(
        (local.ravel(), (rows, cols)),
        shape=(pspace.num_scalar_dofs, vspace.num_dofs),
    )
    return SparseMatrix(mat.tocsr())


@lru_cache(maxsize=None)
def pressure_mean_vector(pspace: FESpace) -> np.ndarray:
    """Integral of every pressure basis function (the zero-mean constraint)."""
    bary, w = simplex_rule(pspace.mesh.dim, pspace.degree)
    vals, _ = pspace.basis(bary)
    geo = geometry(pspace.mesh)
    local = np.einsum("q,qi,c->ci", w, vals, geo.volumes)
    out = np.zeros(pspace.num_scalar_dofs)
    np.add.at(out, pspace.cell_dofs.ravel(), local.ravel())
    return out


def convection_matrix(vspace: FESpace, v_prev: FEFunction, degree: int = 6) -> SparseMatrix:
    """Skew-symmetrized transport  ((w.grad)u, a) + 1/2 ((div w) u, a).

    The integrand has polynomial degree 5 for quadratic velocities, so the
    default rule integrates it exactly and the skew identity holds to
    machine precision for zero-trace fields.
    """
    bary, w, vals, grads, geo = _quad_data(vspace, degree)
    vq = v_prev.eval_cells(bary)
    gq = v_prev.eval_grad_cells(bary)
    divq = np.trace(gq, axis1=2, axis2=3)
    local = np.einsum("q,cqd,cqjd,qi,c->cij", w, vq, grads, vals, geo.volumes)
    local += 0.5 * np.einsum("q,cq,qj,qi,c->cij", w, divq, vals, vals, geo.volumes)
    c = _scatter_scalar(vspace, local)
    return _block_diag(c, vspace.components)


def _vector_scatter(space: FESpace, local: np.ndarray) -> SparseMatrix:
    """Scatter (nc, dim, nloc, dim, nloc) blocks (test-major) to the global matrix."""
    nc, dim, nloc = local.shape[0], local.shape[1], local.shape[2]
    n = space.num_scalar_dofs
    gdof = (
        np.arange(dim)[None, :, None] * n + space.cell_dofs[:, None, :]
    )  # (nc, dim, nloc)
    rows = np.broadcast_to(
        gdof[:, :, :, None, None], (nc, dim, nloc, dim, nloc)
    ).ravel()
    cols = np.broadcast_to(
        gdof[:, None, None, :, :], (nc, dim, nloc, dim, nloc)
    ).ravel()
    mat = sp.coo_matrix(
        (local.ravel(), (rows, cols)), shape=(space.num_dofs, space.num_dofs)
    )
    return SparseMatrix(mat.tocsr())


def dissipative_matrix(
    vspace: FESpace, director_nodal: np.ndarray, params: Params, degree: int = 6
) -> SparseMatrix:
    """Symmetric positive form of the anisotropic viscous stress.

    Full model:  v_el (mu1 + lam^2) (d.(grad v)_sym d, d.(grad a)_sym d)
               + mu4 ((grad v)_sym, (grad a)_sym)
               + v_el (mu5+mu6-lam^2) ((grad v)_sym d, (grad a)_sym d),
    with the director frozen at the supplied nodal field.  The simplified
    model replaces all of it with  nu (grad v, grad a).
    """
    if params.model == SIMPLIFIED:
        return stiffness_matrix(vspace).scaled(params.nu)

    mesh = vspace.mesh
    dim = mesh.dim
    bary, w = simplex_rule(dim, degree)
    _, _, _, grads, geo = _quad_data(vspace, degree)
    dq = np.einsum("qv,cvk->cqk", bary, director_nodal[mesh.cells])

    gd = np.einsum("cqjd,cqd->cqj", grads, dq)  # grad(phi_j) . d
    c1 = params.v_el * (params.mu1 + params.lam**2)
    c56 = params.v_el * (params.mu5_plus_mu6 - params.lam**2)

    # s[A, j] = d_A (grad phi_j . d): coefficient of d.(grad(phi_j e_A))_sym d
    s = dq[:, :, :, None] * gd[:, :, None, :]  # (nc, nq, dim, nloc)
    local = c1 * np.einsum("q,cqBi,cqAj,c->cBiAj", w, s, s, geo.volumes)

    # u[A, j, a] = ((grad(phi_j e_A))_sym d)_a
    delta = np.eye(dim)
    u = 0.5 * (
        delta[None, None, :, None, :] * gd[:, :, None, :, None]
        + grads[:, :, None, :, :] * dq[:, :, :, None, None]
    )
    local += c56 * np.einsum("q,cqBia,cqAja,c->cBiAj", w, u, u, geo.volumes)

    gg = np.einsum("q,cqid,cqjd,c->cij", w, grads, grads, geo.volumes)
    cross = np.einsum("q,cqiA,cqjB,c->cBiAj", w, grads, grads, geo.volumes)
    local += 0.5 * params.mu4 * (
        delta[None, :, None, :, None] * gg[:, None, :, None, :] + cross
    )
    return _vector_scatter(vspace, local)


# ---------------------------------------------------------------------------
# lumped couplings
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def nodal_gradient_operator(vspace: FESpace) -> SparseMatrix:
    """Sparse map from scalar quadratic dofs to averaged vertex gradients.

    Row (z*dim + d) accumulates the cellwise gradient at vertex z weighted
    by that cell's share of the hat integral; applying it per velocity
    component yields the nodal gradient used by every lumped coupling.
    """
    mesh = vspace.mesh
    dim = mesh.dim
    corners = np.eye(dim + 1)
    _, ref_grads = vspace.basis(corners)
    geo = geometry(mesh)
    grads = np.einsum("cde,qie->cqid", geo.inv_jac_t, ref_grads)  # q = local vertex
    w = lumped_weights(mesh)
    share = (geo.volumes / (dim + 1))[:, None] / w[mesh.cells]  # (nc, dim+1)

    nc, nloc = vspace.cell_dofs.shape
    rows = (
        mesh.cells[:, :, None, None] * dim + np.arange(dim)[None, None, None, :]
    )
    rows = np.broadcast_to(rows, (nc, dim + 1, nloc, dim)).ravel()
    cols = np.broadcast_to(
        vspace.cell_dofs[:, None, :, None], (nc, dim + 1, nloc, dim)
    ).ravel()
    vals = (share[:, :, None, None] * grads).ravel()
    mat = sp.coo_matrix(
        (vals, (rows, cols)), shape=(mesh.num_vertices * dim, vspace.num_scalar_dofs)
    )
    return SparseMatrix(mat.tocsr())


def nodal_velocity_gradient(vspace: FESpace, v: FEFunction) -> np.ndarray:
    """(nv, dim, dim) averaged gradient of a quadratic vector field; entry
    [z, r, a] is d v_r / d x_a at vertex z."""
    op = nodal_gradient_operator(vspace)
    mesh = vspace.mesh
    n = vspace.num_scalar_dofs
    out = np.empty((mesh.num_vertices, mesh.dim, mesh.dim))
    for r in range(mesh.dim):
        out[:, r, :] = (op @ v.values[r * n : (r + 1) * n]).reshape(-1, mesh.dim)
    return out


def lumped_gradient_projection(dspace: FESpace, d: FEFunction) -> np.ndarray:
    """Nodal field of hat-moment averages of the piecewise-constant gradient.

    Returns (nv, comps, dim); entry [z, r, a] approximates d d_r / d x_a.
    """
    mesh = dspace.mesh
    grads = d.eval_grad_cells(np.full((1, mesh.dim + 1), 1.0 / (mesh.dim + 1)))
    grads = grads[:, 0]  # (nc, comps, dim); constant per cell
    geo = geometry(mesh)
    w = lumped_weights(mesh)
    out = np.zeros((mesh.num_vertices, dspace.components, mesh.dim))
    contrib = grads * (geo.volumes / (mesh.dim + 1))[:, None, None]
    for v in range(mesh.dim + 1):
        np.add.at(out, mesh.cells[:, v], contrib)
    return out / w[:, None, None]


def discrete_laplacian(dspace: FESpace, d: FEFunction) -> FEFunction:
    """Mass-lumped discrete Laplacian, zero on the boundary.

    Defined against zero-trace piecewise-linear test functions by
    (-lap, b)_lumped = (grad d, grad b); nodal values are stiffness actions
    divided by hat integrals at interior vertices.
    """
    k = stiffness_matrix(dspace, scalar=True)
    w = lumped_weights(dspace.mesh)
    nodal = d.as_nodal()
    out = np.empty_like(nodal)
    for c in range(dspace.components):
        out[:, c] = -(k @ nodal[:, c]) / w
    out[dspace.mesh.boundary_vertices] = 0.0
    return FEFunction.from_nodal(dspace, out)


def ericksen_force(
    vspace: FESpace,
    grad_prev: np.ndarray,
    mid: np.ndarray,
    lap: np.ndarray,
) -> np.ndarray:
    """Lumped elastic force  ([grad d]^T [m x (m x lap)], a)_nodal.

    grad_prev is the projected nodal gradient (nv, dim, dim) of the previous
    director, mid/lap the midpoint director data.  Returns the functional as
    a vector over velocity dofs; only vertex dofs receive entries because
    the nodal product samples the test function at vertices.
    """
    mesh = vspace.mesh
    w = lumped_weights(mesh)
    u = double_cross(mid, lap)
    f = np.einsum("zra,zr->za", grad_prev, u) * w[:, None]
    rhs = np.zeros(vspace.num_dofs)
    nv = mesh.num_vertices
    for a in range(mesh.dim):
        rhs[a * vspace.num_scalar_dofs : a * vspace.num_scalar_dofs + nv] = f[:, a]
    return rhs


def leslie_elastic_rhs(
    vspace: FESpace,
    mid: np.ndarray,
    lap: np.ndarray,
    params: Params,
) -> np.ndarray:
    """Elastic stress couplings tested against velocity gradients.

    Returns the vector of  v_el*A*[ lam (m x [(grad a)_sym m], m x lap)_nodal
    + ((grad a)_skw lap, m)_nodal ]  over velocity dofs a.
    """
    mesh = vspace.mesh
    dim = mesh.dim
    w = lumped_weights(mesh)
    q = cross_vec(mid, lap)
    t = zcross(q, mid)
    s_stretch = 0.5 * (
        t[:, :, None] * mid[:, None, :] + mid[:, :, None] * t[:, None, :]
    )
    s_skew = 0.5 * (
        mid[:, :, None] * lap[:, None, :] - lap[:, :, None] * mid[:, None, :]
    )
    s = params.v_el * params.A * (params.lam * s_stretch + s_skew)
    s *= w[:, None, None]

    op = nodal_gradient_operator(vspace)
    n = vspace.num_scalar_dofs
    rhs = np.empty(vspace.num_dofs)
    for r in range(dim):
        rhs[r * n : (r + 1) * n] = op.rmatvec(s[:, r, :].ravel())
    return rhs


# ---------------------------------------------------------------------------
# the two linear systems of one fixed-point sweep
# ---------------------------------------------------------------------------

def director_nodal_blocks(
    dspace: FESpace,
    v_vertex: np.ndarray,
    v_grad: np.ndarray,
    d_prev: np.ndarray,
    mid_lag: np.ndarray,
    lap_lag: np.ndarray,
    grad_prev: np.ndarray,
    params: Params,
    boundary_values: np.ndarray,
):
    """Per-vertex linear systems for the director update.

    The unknown enters only through its midpoint with the previous step, and
    after nodal lumping each vertex decouples into a (dim x dim) system
    whose matrix is 1/k plus a skew part; the update is therefore a Cayley
    rotation of the previous director and preserves nodal lengths exactly.
    Returns (blocks (nv,dim,dim), rhs (nv,dim)) for the unknown end-of-step
    director.
    """
    mesh = dspace.mesh
    dim = mesh.dim
    nv = mesh.num_vertices
    k = params.k

    transport = np.einsum("zra,za->zr", grad_prev, v_vertex)
    x = params.v_el * cross_vec(mid_lag, transport)
    x = x - params.A * cross_vec(mid_lag, lap_lag)
    skew = np.zeros((nv, dim, dim))
    if params.model == FULL:
        gsym = 0.5 * (v_grad + np.transpose(v_grad, (0, 2, 1)))
        stretch = np.einsum("zab,zb->za", gsym, mid_lag)
        x = x + params.v_el * params.lam * cross_vec(mid_lag, stretch)
        skew = -params.v_el * 0.5 * (v_grad - np.transpose(v_grad, (0, 2, 1)))

    s = cross_matrices(x, dim) + skew
    eye = np.eye(dim)
    blocks = eye[None, :, :] / k + 0.5 * s
    rhs = d_prev / k - 0.5 * np.einsum("zab,zb->za", s, d_prev)

    bd = mesh.boundary_vertices
    blocks[bd] = eye
    rhs[bd] = boundary_values
    return blocks, rhs


def director_system(
    dspace: FESpace,
    v: FEFunction,
    d_prev: np.ndarray,
    mid_lag: np.ndarray,
    lap_lag: np.ndarray,
    grad_prev: np.ndarray,
    params: Params,
    boundary_values: np.ndarray,
):
    """Assembled sparse version of the nodal director systems.

    Arguments follow the lagged fixed-point data: v is the previous velocity
    iterate, mid_lag / lap_lag the previous midpoint director and its
    discrete Laplacian, grad_prev the projected gradient of the last
    completed step's director.  Returns (matrix, rhs) over director dofs.
    """
    vspace = v.space
    blocks, rhs_nodal = director_nodal_blocks(
        dspace,
        v.vertex_values(),
        nodal_velocity_gradient(vspace, v),
        d_prev,
        mid_lag,
        lap_lag,
        grad_prev,
        params,
        boundary_values,
    )
    mesh = dspace.mesh
    dim = mesh.dim
    nv = mesh.num_vertices
    z = np.arange(nv)
    rows = (np.arange(dim)[None, :, None] * nv + z[:, None, None]).repeat(dim, axis=2)
    cols = np.transpose(rows, (0, 2, 1))
    mat = sp.coo_matrix(
        (blocks.ravel(), (rows.ravel(), cols.ravel())),
        shape=(dspace.num_dofs, dspace.num_dofs),
    )
    return SparseMatrix(mat.tocsr()), rhs_nodal.T.ravel()


def solve_director_blocks(blocks: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Batched solve of the per-vertex systems; returns (nv, dim)."""
    return np.linalg.solve(blocks, rhs[..., None])[..., 0]


def momentum_system(
    vspace: FESpace,
    pspace: FESpace,
    v_prev: FEFunction,
    d_for_stress: np.ndarray,
    grad_prev: np.ndarray,
    mid_lag: np.ndarray,
    lap_lag: np.ndarray,
    params: Params,
    boundary_values: np.ndarray | None = None,
    convection: SparseMatrix | None = None,
) -> BlockSaddleSystem:
    """One linearized momentum solve of the fixed-point sweep.

    Velocity block: mass/k + skew-symmetrized transport by the previous
    step's velocity + the dissipative stress frozen at the lagged director.
    Right-hand side: mass/k acting on the previous velocity, the lumped
    elastic force, minus the elastic stress couplings.  The divergence
    constraint and the scalar pressure-mean row complete the saddle system;
    Dirichlet velocity rows are eliminated symmetrically.
    """
    mass = mass_matrix(vspace)
    if convection is None:
        convection = convection_matrix(vspace, v_prev)
    diss = dissipative_matrix(vspace, d_for_stress, params)
    a = SparseMatrix(mass.csr / params.k + convection.csr + diss.csr)

    rhs = mass.matvec(v_prev.values) / params.k
    rhs += params.v_el * params.A * ericksen_force(
        vspace, grad_prev, mid_lag, lap_lag
    )
    if params.model == FULL:
        rhs -= leslie_elastic_rhs(vspace, mid_lag, lap_lag, params)

    div = divergence_matrix(vspace, pspace)
    system = BlockSaddleSystem(
        a=a,
        b=div,
        rhs_primal=rhs,
        rhs_constraint=np.zeros(div.nrows),
        mean_weights=pressure_mean_vector(pspace),
    )
    if boundary_values is None:
        boundary_values = np.zeros(vspace.boundary_dofs.size)
    return constrain_saddle(system, vspace.boundary_dofs, boundary_values)


def constrain_saddle(
    system: BlockSaddleSystem, dofs: np.ndarray, values: np.ndarray
) -> BlockSaddleSystem:
    """Eliminate Dirichlet primal dofs, keeping the system symmetric."""
    n = system.a.nrows
    g = np.zeros(n)
    g[dofs] = values
    free = np.ones(n)
    free[dofs] = 0.0
    p = sp.diags(free)
    pinned = sp.diags(1.0 - free)

    a = system.a.csr
    a_c = p @ a @ p + pinned
    rhs_p = free * (system.rhs_primal - a @ g)
    rhs_p[dofs] = values

    b = system.b
    rhs_c = system.rhs_constraint
    if b is not None:
        rhs_c = (rhs_c if rhs_c is not None else 0.0) - b.csr @ g
        b = SparseMatrix((b.csr @ p).tocsr())
    return BlockSaddleSystem(
        a=SparseMatrix(a_c.tocsr()),
        b=b,
        rhs_primal=rhs_p,
        rhs_constraint=rhs_c,
        mean_weights=system.mean_weights,
    )
