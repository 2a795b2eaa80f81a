"""Assembly of the FE operators on extended meshes and their block partition.

The stiffness matrix is built from the extended incidence matrix as
E W_E E^T with W_E = blkdiag{(1/h_e) I}, the mass matrix from its absolute
value as (|E| W |E|^T + its diagonal)/6 with W = blkdiag{h_e I}; a per-edge
coefficient in the interval weights yields the potential mass matrix.
"""

from __future__ import annotations

from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import linalg
from .mesh import ExtendedMesh, extended_incidence, nodal_values


class SingularOperatorError(ValueError):
    """The free-node system matrix is not invertible (no coercivity)."""


Blocks = namedtuple("Blocks", ["ff", "fd", "df", "dd"])


def _per_edge(mesh: ExtendedMesh, value, name: str) -> np.ndarray:
    if np.isscalar(value):
        return np.full(mesh.graph.n_edges, float(value))
    arr = np.asarray(value, dtype=float)
    if arr.shape != (mesh.graph.n_edges,):
        raise ValueError(f"{name} must be a scalar or one value per edge")
    return arr


def assemble_stiffness(mesh: ExtendedMesh) -> sp.csr_matrix:
    """Stiffness matrix of the refined graph in global DOF order."""
    et = extended_incidence(mesh, by_dof=True)
    w = np.repeat(1.0 / mesh.h_per_edge, mesh.n_intervals)
    return (et @ sp.diags(w) @ et.T).tocsr()


def assemble_mass(mesh: ExtendedMesh, coefficient=1.0) -> sp.csr_matrix:
    """Mass matrix, optionally weighted by a nonnegative per-edge coefficient."""
    c = _per_edge(mesh, coefficient, "coefficient")
    if np.any(c < 0):
        raise ValueError("mass coefficient must be nonnegative")
    et_abs = abs(extended_incidence(mesh, by_dof=True))
    w = np.repeat(c * mesh.h_per_edge, mesh.n_intervals)
    b = (et_abs @ sp.diags(w) @ et_abs.T).tocsr()
    return ((b + sp.diags(b.diagonal())) / 6.0).tocsr()


def assemble_load(mesh: ExtendedMesh, g, mass=None) -> np.ndarray:
    """Load vector of edgewise data g, via the mass matrix times its interpolant.

    Exact whenever g is piecewise linear on the mesh (in particular for the
    constant data of all bundled experiments); nodal samplers incur the usual
    O(h^2) interpolation consistency error.
    """
    if mass is None:
        mass = assemble_mass(mesh)
    return mass @ nodal_values(mesh, g)


def partition_blocks(matrix, mesh: ExtendedMesh) -> Blocks:
    """FF/FD/DF/DD views of a DOF-ordered operator (free = interior + Kirchhoff)."""
    nf = mesh.n_free
    csr = matrix.tocsr()
    top = csr[:nf].tocsc()
    bottom = csr[nf:].tocsc()
    return Blocks(
        ff=top[:, :nf].tocsr(),
        fd=top[:, nf:].tocsr(),
        df=bottom[:, :nf].tocsr(),
        dd=bottom[:, nf:].tocsr(),
    )


@dataclass(frozen=True)
class ProblemData:
    """Regularization weight and edgewise problem data.

    c0 is a nonnegative per-edge constant (or one scalar); f and ybar may be
    scalars, per-edge constants, or nodal samplers ``g(edge, x)``.
    """

    beta: float
    c0: object = 0.0
    f: object = 0.0
    ybar: object = 0.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"regularization weight must be positive, got {self.beta}")
        c0 = self.c0
        if np.isscalar(c0):
            if c0 < 0:
                raise ValueError("potential coefficient c0 must be nonnegative")
        elif np.any(np.asarray(c0, dtype=float) < 0):
            raise ValueError("potential coefficient c0 must be nonnegative")


@dataclass(eq=False)
class FeOperators:
    """Assembled operators, their free/Dirichlet blocks, and load vectors."""

    mesh: ExtendedMesh
    data: ProblemData
    A: sp.csr_matrix
    M: sp.csr_matrix
    M_c0: sp.csr_matrix
    K: sp.csr_matrix
    K_FF: sp.csr_matrix
    K_FD: sp.csr_matrix
    K_DF: sp.csr_matrix
    K_DD: sp.csr_matrix
    M_FF: sp.csr_matrix
    M_FD: sp.csr_matrix
    M_DF: sp.csr_matrix
    M_DD: sp.csr_matrix
    f_vec: np.ndarray
    ybar_vec: np.ndarray
    _kff: linalg.Factorization | None = field(default=None, repr=False)

    @property
    def n_free(self) -> int:
        return self.mesh.n_free

    @property
    def n_dirichlet(self) -> int:
        return self.mesh.dirichlet_vertices.size

    @property
    def f_F(self) -> np.ndarray:
        return self.f_vec[: self.n_free]

    @property
    def f_D(self) -> np.ndarray:
        return self.f_vec[self.n_free :]

    @property
    def ybar_F(self) -> np.ndarray:
        return self.ybar_vec[: self.n_free]

    @property
    def ybar_D(self) -> np.ndarray:
        return self.ybar_vec[self.n_free :]

    def kff_factor(self) -> linalg.Factorization:
        """Cached Cholesky-mode factorization of K_FF, shared by all solves."""
        if self._kff is None:
            c0 = np.asarray(self.data.c0, dtype=float)
            if self.n_dirichlet == 0 and not np.any(c0 > 0):
                raise SingularOperatorError(
                    "operator not coercive: no Dirichlet nodes and zero potential"
                )
            try:
                self._kff = linalg.factor(self.K_FF, "cholesky")
            except (linalg.NotPositiveDefiniteError, linalg.SingularMatrixError) as exc:
                raise SingularOperatorError(f"operator not coercive: {exc}") from exc
        return self._kff

    def l2_inner(self, a, b) -> float:
        return float(np.asarray(a) @ (self.M @ np.asarray(b)))

    def l2_norm(self, v) -> float:
        return float(np.sqrt(max(self.l2_inner(v, v), 0.0)))

    def h1_seminorm(self, v) -> float:
        v = np.asarray(v)
        return float(np.sqrt(max(v @ (self.A @ v), 0.0)))

    def h1_norm(self, v) -> float:
        return float(np.sqrt(self.l2_norm(v) ** 2 + self.h1_seminorm(v) ** 2))


def build_operators(mesh: ExtendedMesh, data: ProblemData) -> FeOperators:
    """Assemble A, M, M_c0, K = A + M_c0, their blocks, and the load vectors."""
    a = assemble_stiffness(mesh)
    m = assemble_mass(mesh)
    m_c0 = assemble_mass(mesh, data.c0)
    k = (a + m_c0).tocsr()
    kb = partition_blocks(k, mesh)
    mb = partition_blocks(m, mesh)
    return FeOperators(
        mesh=mesh,
        data=data,
        A=a,
        M=m,
        M_c0=m_c0,
        K=k,
        K_FF=kb.ff,
        K_FD=kb.fd,
        K_DF=kb.df,
        K_DD=kb.dd,
        M_FF=mb.ff,
        M_FD=mb.fd,
        M_DF=mb.df,
        M_DD=mb.dd,
        f_vec=m @ nodal_values(mesh, data.f),
        ybar_vec=m @ nodal_values(mesh, data.ybar),
    )
