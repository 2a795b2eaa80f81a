"""Shared test oracles: element-by-element assembly, tridiagonal solves, random graphs.

These deliberately avoid the incidence-matrix code paths they are used to
check.
"""

import numpy as np

from mgopt.graphs import CombinatorialGraph, MetricGraph


def element_stiffness(mesh):
    """Dense stiffness matrix assembled interval by interval."""
    a = np.zeros((mesh.n_dof, mesh.n_dof))
    for e in range(mesh.graph.n_edges):
        dofs = mesh.edge_node_dofs(e)
        w = 1.0 / mesh.h_per_edge[e]
        for k in range(int(mesh.n_intervals[e])):
            i, j = dofs[k], dofs[k + 1]
            a[i, i] += w
            a[j, j] += w
            a[i, j] -= w
            a[j, i] -= w
    return a


def element_mass(mesh, coefficient=1.0):
    """Dense mass matrix assembled interval by interval."""
    c = np.full(mesh.graph.n_edges, float(coefficient)) if np.isscalar(coefficient) else np.asarray(coefficient)
    m = np.zeros((mesh.n_dof, mesh.n_dof))
    for e in range(mesh.graph.n_edges):
        dofs = mesh.edge_node_dofs(e)
        w = c[e] * mesh.h_per_edge[e] / 6.0
        for k in range(int(mesh.n_intervals[e])):
            i, j = dofs[k], dofs[k + 1]
            m[i, i] += 2 * w
            m[j, j] += 2 * w
            m[i, j] += w
            m[j, i] += w
    return m


def thomas_solve(lower, diag, upper, rhs):
    """Tridiagonal solve by forward elimination and back substitution."""
    n = len(diag)
    c = np.array(upper, dtype=float)
    d = np.array(diag, dtype=float)
    b = np.array(rhs, dtype=float)
    for i in range(1, n):
        w = lower[i - 1] / d[i - 1]
        d[i] -= w * c[i - 1]
        b[i] -= w * b[i - 1]
    x = np.empty(n)
    x[-1] = b[-1] / d[-1]
    for i in range(n - 2, -1, -1):
        x[i] = (b[i] - c[i] * x[i + 1]) / d[i]
    return x


def random_metric_graph(rng, n_min=4, n_max=12, extra_edges=2, unit_lengths=False):
    """Random connected metric graph with a nonempty Dirichlet set."""
    n = int(rng.integers(n_min, n_max + 1))
    edges = set()
    for v in range(1, n):
        parent = int(rng.integers(0, v))
        edges.add((parent, v))
    for _ in range(extra_edges):
        u = int(rng.integers(0, n))
        v = int(rng.integers(0, n))
        if u != v:
            edges.add((min(u, v), max(u, v)))
    edges = tuple(sorted(edges))
    if unit_lengths:
        lengths = np.ones(len(edges))
    else:
        lengths = rng.uniform(0.5, 2.0, len(edges))
    base = CombinatorialGraph(n, edges, np.ones(len(edges)))
    k = int(rng.integers(1, max(2, n // 2) + 1))
    dirichlet = tuple(sorted(int(v) for v in rng.choice(n, size=k, replace=False)))
    return MetricGraph(base, lengths, dirichlet)
