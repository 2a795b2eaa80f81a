"""Extended FE meshes: per-edge grids, global DOF ordering, incidence matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graphs import MetricGraph, same_graph


class ExtendedMesh:
    """Equidistant per-edge grids with the interior/Kirchhoff/Dirichlet DOF order.

    DOF layout: interior nodes first (edge by edge, j = 1..n_e-1 within an
    edge), then Kirchhoff vertices, then Dirichlet vertices, both in ascending
    vertex order.  Interior node (e, j) sits at arc length j*h_e from the tail
    of edge e.  Instances are immutable after construction.
    """

    def __init__(self, graph: MetricGraph, n_intervals):
        n_intervals = np.atleast_1d(np.asarray(n_intervals, dtype=int))
        if n_intervals.shape != (graph.n_edges,):
            raise ValueError("n_intervals must hold one count per edge")
        if n_intervals.size and np.any(n_intervals < 1):
            raise ValueError("each edge needs at least one interval")
        self.graph = graph
        self.n_intervals = n_intervals
        self.h_per_edge = graph.lengths / n_intervals
        self.interval_offsets = np.concatenate(([0], np.cumsum(n_intervals)))
        self.interior_offsets = np.concatenate(([0], np.cumsum(n_intervals - 1)))
        self.n_interior = int(self.interior_offsets[-1])
        self.kirchhoff_vertices = np.array(graph.kirchhoff_nodes, dtype=int)
        self.dirichlet_vertices = np.array(graph.dirichlet_nodes, dtype=int)
        vertex_dof = np.empty(graph.n_vertices, dtype=int)
        vertex_dof[self.kirchhoff_vertices] = self.n_interior + np.arange(
            self.kirchhoff_vertices.size
        )
        vertex_dof[self.dirichlet_vertices] = (
            self.n_interior + self.kirchhoff_vertices.size + np.arange(self.dirichlet_vertices.size)
        )
        self.vertex_dof = vertex_dof
        self.n_dof = self.n_interior + graph.n_vertices

    @property
    def n_free(self) -> int:
        return self.n_dof - self.dirichlet_vertices.size

    @property
    def free_dofs(self) -> np.ndarray:
        return np.arange(self.n_free)

    @property
    def dirichlet_dofs(self) -> np.ndarray:
        return np.arange(self.n_free, self.n_dof)

    @property
    def h_max(self) -> float:
        return float(self.h_per_edge.max()) if self.h_per_edge.size else 0.0

    def interior_dof(self, e: int, j: int) -> int:
        """Global DOF of interior node j (1-based) of edge e."""
        ne = int(self.n_intervals[e])
        if not 1 <= j <= ne - 1:
            raise ValueError(f"edge {e} has interior nodes 1..{ne - 1}, got {j}")
        return int(self.interior_offsets[e]) + j - 1

    def edge_node_dofs(self, e: int) -> np.ndarray:
        """DOFs of all grid nodes along edge e, ordered from tail to head."""
        tail, head = self.graph.edges[e]
        ne = int(self.n_intervals[e])
        out = np.empty(ne + 1, dtype=int)
        out[0] = self.vertex_dof[tail]
        out[1:ne] = self.interior_offsets[e] + np.arange(ne - 1)
        out[ne] = self.vertex_dof[head]
        return out

    def edge_node_positions(self, e: int) -> np.ndarray:
        """Arc-length coordinates of the grid nodes of edge e, from the tail."""
        ne = int(self.n_intervals[e])
        return np.arange(ne + 1) * self.h_per_edge[e]

    def dof_label(self, k: int):
        """Inverse of the DOF ordering: ('interior', e, j) or ('<type>', vertex)."""
        if not 0 <= k < self.n_dof:
            raise ValueError(f"DOF {k} out of range")
        if k < self.n_interior:
            e = int(np.searchsorted(self.interior_offsets, k, side="right")) - 1
            return ("interior", e, k - int(self.interior_offsets[e]) + 1)
        if k < self.n_interior + self.kirchhoff_vertices.size:
            return ("kirchhoff", int(self.kirchhoff_vertices[k - self.n_interior]))
        return ("dirichlet", int(self.dirichlet_vertices[k - self.n_interior - self.kirchhoff_vertices.size]))

    def dof_of_label(self, label) -> int:
        """Forward DOF ordering, inverse of dof_label."""
        if label[0] == "interior":
            return self.interior_dof(label[1], label[2])
        return int(self.vertex_dof[label[1]])

    def stacked_row_of_dof(self) -> np.ndarray:
        """Row index of each DOF in the stacked [interior; vertex] incidence order.

        In the stacked order interior rows run head-to-tail within an edge
        (matching the bidiagonal interval blocks) while the DOF order counts
        from the tail, so the map reverses each edge's interior block.
        """
        out = np.empty(self.n_dof, dtype=int)
        for e in range(self.graph.n_edges):
            ne = int(self.n_intervals[e])
            base = int(self.interior_offsets[e])
            for j in range(1, ne):
                out[base + j - 1] = base + (ne - 1 - j)
        for v in range(self.graph.n_vertices):
            out[self.vertex_dof[v]] = self.n_interior + v
        return out


def build_mesh(graph: MetricGraph, n_e: int) -> ExtendedMesh:
    """Uniform mesh with n_e intervals on every edge."""
    if n_e < 1:
        raise ValueError("n_e must be at least 1")
    return ExtendedMesh(graph, np.full(graph.n_edges, n_e, dtype=int))


def interior_incidence(mesh: ExtendedMesh) -> sp.csr_matrix:
    """Block-diagonal interior incidence: one bidiagonal (n_e-1) x n_e block per edge."""
    rows, cols, data = [], [], []
    for e in range(mesh.graph.n_edges):
        ne = int(mesh.n_intervals[e])
        rbase = int(mesh.interior_offsets[e])
        cbase = int(mesh.interval_offsets[e])
        for r in range(ne - 1):
            rows.extend((rbase + r, rbase + r))
            cols.extend((cbase + r, cbase + r + 1))
            data.extend((-1.0, 1.0))
    shape = (mesh.n_interior, int(mesh.interval_offsets[-1]))
    return sp.coo_matrix((data, (rows, cols)), shape=shape).tocsr()


def vertex_incidence(mesh: ExtendedMesh) -> sp.csr_matrix:
    """Vertex part of the extended incidence matrix.

    For edge e the width-n_e column block carries the head (+1 in the
    incidence matrix) in its first column and the tail (-1) in its last,
    so that every column of the stacked extended matrix has exactly one
    +1 and one -1.
    """
    rows, cols, data = [], [], []
    for e, (tail, head) in enumerate(mesh.graph.edges):
        ne = int(mesh.n_intervals[e])
        cbase = int(mesh.interval_offsets[e])
        rows.extend((head, tail))
        cols.extend((cbase, cbase + ne - 1))
        data.extend((1.0, -1.0))
    shape = (mesh.graph.n_vertices, int(mesh.interval_offsets[-1]))
    return sp.coo_matrix((data, (rows, cols)), shape=shape).tocsr()


def extended_incidence(mesh: ExtendedMesh, by_dof: bool = False) -> sp.csr_matrix:
    """Extended incidence matrix of the refined graph.

    With ``by_dof=False`` returns the stacked [interior; vertex] form; with
    ``by_dof=True`` rows are permuted into the global DOF order (the form all
    operators are assembled in).  Column k of the by-dof form is the k-th
    interval counted from the edge tail.
    """
    if not by_dof:
        return sp.vstack([interior_incidence(mesh), vertex_incidence(mesh)]).tocsr()
    rows, cols, data = [], [], []
    for e in range(mesh.graph.n_edges):
        chain = mesh.edge_node_dofs(e)
        cbase = int(mesh.interval_offsets[e])
        for k in range(int(mesh.n_intervals[e])):
            rows.extend((chain[k], chain[k + 1]))
            cols.extend((cbase + k, cbase + k))
            data.extend((-1.0, 1.0))
    shape = (mesh.n_dof, int(mesh.interval_offsets[-1]))
    return sp.coo_matrix((data, (rows, cols)), shape=shape).tocsr()


@dataclass(frozen=True, eq=False)
class PiecewiseLinearFunction:
    """Continuous piecewise-linear function given by nodal values in DOF order."""

    mesh: ExtendedMesh
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.mesh.n_dof,):
            raise ValueError(f"expected {self.mesh.n_dof} nodal values, got {vals.shape}")
        object.__setattr__(self, "values", vals)


def nodal_values(mesh: ExtendedMesh, g) -> np.ndarray:
    """Nodal interpolant coefficients of edgewise data g.

    g may be a scalar, an array of per-edge constants, or a callable
    ``g(edge, x)`` evaluated at arc-length positions x from the edge tail.
    Vertex values average the incident-edge samples, which reproduces
    continuous data exactly.
    """
    if np.isscalar(g):
        return np.full(mesh.n_dof, float(g))
    out = np.zeros(mesh.n_dof)
    acc = np.zeros(mesh.graph.n_vertices)
    cnt = np.zeros(mesh.graph.n_vertices)
    if callable(g):
        for e, (tail, head) in enumerate(mesh.graph.edges):
            vals = np.asarray(g(e, mesh.edge_node_positions(e)), dtype=float)
            ne = int(mesh.n_intervals[e])
            if vals.shape != (ne + 1,):
                raise ValueError(f"sampler returned {vals.shape} values for edge {e}")
            out[mesh.interior_offsets[e] : mesh.interior_offsets[e] + ne - 1] = vals[1:ne]
            acc[tail] += vals[0]
            acc[head] += vals[ne]
            cnt[tail] += 1
            cnt[head] += 1
    else:
        per_edge = np.asarray(g, dtype=float)
        if per_edge.shape != (mesh.graph.n_edges,):
            raise ValueError("per-edge data must hold one value per edge")
        for e, (tail, head) in enumerate(mesh.graph.edges):
            ne = int(mesh.n_intervals[e])
            out[mesh.interior_offsets[e] : mesh.interior_offsets[e] + ne - 1] = per_edge[e]
            acc[tail] += per_edge[e]
            acc[head] += per_edge[e]
            cnt[tail] += 1
            cnt[head] += 1
    touched = cnt > 0
    out[mesh.vertex_dof[touched]] = acc[touched] / cnt[touched]
    return out


def prolong(coarse: PiecewiseLinearFunction, fine_mesh: ExtendedMesh) -> PiecewiseLinearFunction:
    """Exact nodal interpolation onto an edgewise-nested refinement.

    Piecewise-linear functions are unchanged as elements of H^1, so the
    interpolated values reproduce the function exactly; requires each coarse
    interval count to divide the fine one.
    """
    cmesh = coarse.mesh
    if not same_graph(cmesh.graph, fine_mesh.graph):
        raise ValueError("meshes live on different graphs")
    ratios = fine_mesh.n_intervals // np.maximum(cmesh.n_intervals, 1)
    if np.any(fine_mesh.n_intervals != ratios * cmesh.n_intervals):
        raise ValueError("fine mesh does not refine the coarse mesh edgewise")
    out = np.zeros(fine_mesh.n_dof)
    for e in range(cmesh.graph.n_edges):
        yc = coarse.values[cmesh.edge_node_dofs(e)]
        rho = int(ratios[e])
        fine_dofs = fine_mesh.edge_node_dofs(e)
        ne_c = int(cmesh.n_intervals[e])
        for k in range(ne_c):
            t = np.arange(rho + 1) / rho
            seg = yc[k] + (yc[k + 1] - yc[k]) * t
            out[fine_dofs[k * rho : (k + 1) * rho + 1]] = seg
    return PiecewiseLinearFunction(fine_mesh, out)
