"""Optimal Dirichlet control on metric graphs.

Discretizes elliptic control problems on metric graphs with linear finite
elements, assembles the symmetric KKT saddle-point system of the first-order
conditions, and solves it with Schur-complement-preconditioned Krylov methods.
"""

from .assembly import (
    FeOperators,
    ProblemData,
    SingularOperatorError,
    assemble_load,
    assemble_mass,
    assemble_stiffness,
    build_operators,
    partition_blocks,
)
from .graphs import (
    DIRICHLET,
    KIRCHHOFF,
    CombinatorialGraph,
    GraphFormatError,
    MetricGraph,
    graph_laplacian,
    incidence_matrix,
    load_graph_json,
    load_matrix_market,
    make_fdm_L_graph,
    make_path,
    make_star,
    metric_from_combinatorial,
    normalized_laplacian,
)
from .mesh import (
    ExtendedMesh,
    PiecewiseLinearFunction,
    build_mesh,
    extended_incidence,
    interior_incidence,
    nodal_values,
    prolong,
    vertex_incidence,
)
from .optcontrol import (
    KktSystem,
    OcpSolution,
    Preconditioner,
    build_kkt,
    build_preconditioner,
    gmres,
    minres,
    objective_value,
    reduced_oracle,
    solve_ocp,
)
from .pde import StateSolution, discrete_kirchhoff, harmonic_extension, solve_adjoint, solve_state

__version__ = "0.1.0"
