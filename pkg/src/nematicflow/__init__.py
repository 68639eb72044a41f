"""Structure-preserving finite elements for nematic liquid-crystal flow.

A numpy/scipy library implementing a mixed Taylor-Hood / piecewise-linear
discretization of the coupled flow-director system with mass-lumped director
operators.  The time stepper conserves the unit length of the director at
every mesh node exactly and satisfies a discrete energy balance up to the
fixed-point solver tolerance.
"""

from .mesh import (
    Mesh,
    build_box_mesh,
    boundary_classification,
    cell_geometry,
    cell_volumes,
    verify_conformity,
    InvalidDomainError,
    MeshAssumptionError,
)
from .quadrature import simplex_rule
from .sparsela import (
    SparseMatrix,
    BlockSaddleSystem,
    from_triplets,
    solve_direct,
    solve_saddle,
)
from .fespace import (
    FESpace,
    FEFunction,
    interpolate_nodal,
    lumped_inner_product,
    lumped_norm,
    norm_equivalence_constants,
    l2_projection,
    lumped_projection,
    divfree_projection,
)
from .operators import Params, DirectorField
from .scheme import State, FixedPointReport, Simulator, initial_state, run_simulation
from .diagnostics import (
    EnergyBreakdown,
    EVITestFunction,
    energy,
    energy_equality_residual,
    unit_norm_deviation,
    evi_residual,
    euler_lagrange_identity_check,
)
from .io_cli import RunConfig, parse_config, write_fields, write_energy_csv

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
