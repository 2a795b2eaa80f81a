import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sp

from mgopt.assembly import ProblemData, build_operators
from mgopt.graphs import CombinatorialGraph, MetricGraph, make_fdm_L_graph, make_star
from mgopt.mesh import build_mesh, nodal_values
from mgopt.optcontrol import (
    KrylovResult,
    build_kkt,
    build_preconditioner,
    gmres,
    minres,
    normalize_precon_kind,
    objective_value,
    reduced_oracle,
    solve_kkt,
    solve_ocp,
)
from mgopt.pde import solve_state

from helpers import element_mass, element_stiffness, random_metric_graph


def tiny_star_ops(beta=0.5, c0=1.0, f=1.5, ybar=1.0, n_e=2, leaves=2):
    g = make_star(leaves)
    mesh = build_mesh(g, n_e)
    data = ProblemData(beta=beta, c0=c0, f=f, ybar=ybar)
    return build_operators(mesh, data), data


def test_kkt_apply_zero_and_shape():
    ops, data = tiny_star_ops()
    kkt = build_kkt(ops, data)
    assert kkt.dim == 2 * ops.n_free + ops.n_dirichlet
    assert np.all(kkt.apply(np.zeros(kkt.dim)) == 0.0)


def test_kkt_symmetry():
    rng = np.random.default_rng(0)
    g = random_metric_graph(rng)
    mesh = build_mesh(g, 3)
    data = ProblemData(beta=0.1, c0=1.0, f=1.0, ybar=2.0)
    ops = build_operators(mesh, data)
    kkt = build_kkt(ops, data)
    for _ in range(10):
        x = rng.standard_normal(kkt.dim)
        y = rng.standard_normal(kkt.dim)
        lhs = y @ kkt.apply(x)
        rhs = x @ kkt.apply(y)
        assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), 1.0)


def test_kkt_dense_matches_hand_assembly():
    ops, data = tiny_star_ops(beta=0.37, c0=2.0, f=1.5, ybar=1.0)
    mesh = ops.mesh
    a = element_stiffness(mesh)
    m = element_mass(mesh)
    k = a + element_mass(mesh, data.c0)
    nf = mesh.n_free
    free = slice(0, nf)
    diri = slice(nf, mesh.n_dof)
    z = np.zeros((nf, nf))
    expected = np.block(
        [
            [m[free, free], m[free, diri], k[free, free].T],
            [m[diri, free], m[diri, diri] + data.beta * np.eye(ops.n_dirichlet), k[free, diri].T],
            [k[free, free], k[free, diri], z],
        ]
    )
    kkt = build_kkt(ops, data)
    assert np.allclose(kkt.as_dense(), expected, rtol=0, atol=1e-14)
    ybar_vec = m @ np.full(mesh.n_dof, data.ybar)
    f_vec = m @ np.full(mesh.n_dof, data.f)
    rhs = np.concatenate([ybar_vec[free], ybar_vec[diri], f_vec[free]])
    assert np.allclose(kkt.rhs, rhs, atol=1e-14)


def test_kkt_dense_cap():
    ops, data = tiny_star_ops()
    kkt = build_kkt(ops, data)
    with pytest.raises(ValueError, match="capped"):
        kkt.as_dense(cap=3)


def test_precon_kind_normalization():
    assert normalize_precon_kind("sym") == "matched_symmetric"
    assert normalize_precon_kind("nonsym") == "matched_nonsymmetric"
    assert normalize_precon_kind("identity") == "none"
    with pytest.raises(ValueError):
        normalize_precon_kind("bogus")


def test_preconditioner_requires_controls():
    g = make_star(3, "kirchhoff")
    mesh = build_mesh(g, 2)
    data = ProblemData(beta=1.0, c0=1.0)
    ops = build_operators(mesh, data)
    with pytest.raises(ValueError, match="Dirichlet"):
        build_preconditioner("matched_symmetric", ops, data)


def test_preconditioner_linearity_and_kinds():
    ops, data = tiny_star_ops(leaves=3, n_e=3)
    kkt = build_kkt(ops, data)
    rng = np.random.default_rng(1)
    for kind in ("none", "ideal", "matched_symmetric", "matched_nonsymmetric"):
        pc = build_preconditioner(kind, ops, data)
        x = rng.standard_normal(kkt.dim)
        y = rng.standard_normal(kkt.dim)
        lhs = pc.apply(2.0 * x + 3.0 * y)
        rhs = 2.0 * pc.apply(x) + 3.0 * pc.apply(y)
        assert np.linalg.norm(lhs - rhs) <= 1e-12 * max(np.linalg.norm(rhs), 1.0)


def test_matched_diagonals_beta_scaling():
    # for large beta the control Schur block is dominated by beta*I and the
    # matching diagonal N decays like beta^{-1/2}
    g = make_star(4)
    mesh = build_mesh(g, 4)

    def n_diag(beta):
        data = ProblemData(beta=beta, c0=1.0)
        ops = build_operators(mesh, data)
        return build_preconditioner("matched_symmetric", ops, data)

    pc_lo = n_diag(1e3)
    pc_hi = n_diag(1e5)
    assert np.abs(pc_hi.d_sm.diagonal() - 1e5).max() <= 1e-3 * 1e5
    nz = pc_lo.n_diag > 0
    ratio = pc_lo.n_diag[nz] / pc_hi.n_diag[nz]
    assert np.allclose(ratio, 10.0, rtol=0.15)


def test_matched_lumped_diagonal_support():
    # the lumped matching diagonal lives exactly on free DOFs adjacent to
    # Dirichlet vertices and is nonnegative
    g = make_star(3)
    n_e = 4
    mesh = build_mesh(g, n_e)
    data = ProblemData(beta=0.1, c0=1.0)
    ops = build_operators(mesh, data)
    pc = build_preconditioner("matched_symmetric", ops, data)
    assert np.all(pc.d_kdk >= 0.0)
    expected = np.zeros(ops.n_free, dtype=bool)
    for e in range(g.n_edges):
        expected[mesh.interior_dof(e, n_e - 1)] = True
    assert np.array_equal(pc.d_kdk > 0, expected)


def test_ideal_preconditioner_size_cap():
    ops, data = tiny_star_ops()
    with pytest.raises(ValueError, match="capped"):
        build_preconditioner("ideal", ops, data, dense_cap=3)


def test_gmres_identity_one_iteration():
    b = np.arange(1.0, 6.0)
    res = gmres(lambda x: x, b, None, tol=1e-10)
    assert res.iterations == 1
    assert res.converged
    assert np.allclose(res.x, b)


def test_gmres_zero_rhs():
    res = gmres(lambda x: x, np.zeros(4))
    assert res.converged and res.iterations == 0
    assert np.all(res.x == 0.0)


def test_gmres_dense_spd_vs_direct():
    rng = np.random.default_rng(2)
    m = rng.standard_normal((20, 20))
    a = m @ m.T + 20 * np.eye(20)
    b = rng.standard_normal(20)
    res = gmres(lambda x: a @ x, b, None, tol=1e-10, max_it=40)
    x_ref = scipy.linalg.solve(a, b)
    assert res.converged
    assert np.linalg.norm(res.x - x_ref) <= 1e-7 * np.linalg.norm(x_ref)


def test_gmres_reports_nonconvergence():
    rng = np.random.default_rng(3)
    m = rng.standard_normal((30, 30))
    a = m @ m.T + 0.1 * np.eye(30)
    b = rng.standard_normal(30)
    res = gmres(lambda x: a @ x, b, None, tol=1e-14, max_it=3)
    assert not res.converged
    assert res.iterations == 3
    assert res.true_residual > 1e-14


def test_gmres_ideal_preconditioner_regression():
    # three exact eigenvalue clusters: convergence in three Arnoldi steps
    g = make_star(3)
    mesh = build_mesh(g, 4)
    data = ProblemData(beta=1e-2, c0=1.0, f=1.0, ybar=1.0)
    ops = build_operators(mesh, data)
    kkt = build_kkt(ops, data)
    pc = build_preconditioner("ideal", ops, data)
    res = gmres(kkt.apply, kkt.rhs, pc.apply, tol=1e-8, max_it=50)
    assert res.converged
    assert res.iterations <= 5
    assert res.iterations == 3


def test_minres_diagonal_indefinite():
    a = np.diag([1.0, -1.0])
    res = minres(lambda x: a @ x, np.array([1.0, 1.0]), None, tol=1e-12)
    assert res.converged
    assert res.iterations <= 2
    assert np.allclose(res.x, [1.0, -1.0], atol=1e-10)


def test_minres_detects_nonsymmetric_operator():
    a = np.array([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ValueError, match="symmetric"):
        minres(lambda x: a @ x, np.ones(2))


def test_minres_matches_conjugate_residual_oracle():
    # on an SPD system unpreconditioned MINRES and the conjugate residual
    # iteration produce the same residual decay
    rng = np.random.default_rng(4)
    m = rng.standard_normal((25, 25))
    a = m @ m.T + 25 * np.eye(25)
    b = rng.standard_normal(25)

    def conjugate_residual(iters):
        x = np.zeros(25)
        r = b.copy()
        p = r.copy()
        ar = a @ r
        ap = ar.copy()
        history = [np.linalg.norm(r)]
        for _ in range(iters):
            rar = r @ ar
            alpha = rar / (ap @ ap)
            x += alpha * p
            r -= alpha * ap
            history.append(np.linalg.norm(r))
            ar = a @ r
            beta = (r @ ar) / rar
            p = r + beta * p
            ap = ar + beta * ap
        return np.array(history)

    res = minres(lambda x: a @ x, b, None, tol=1e-10, max_it=12)
    oracle = conjugate_residual(res.iterations) / np.linalg.norm(b)
    mine = res.residuals
    assert len(mine) == len(oracle)
    assert np.allclose(mine, oracle, rtol=1e-6, atol=1e-12)


def test_minres_agrees_with_gmres_on_kkt():
    ops, data = tiny_star_ops(leaves=3, n_e=4)
    res_g, kkt, _ = solve_kkt(ops, data, solver="gmres", precon="nonsym", tol=1e-10)
    res_m, _, _ = solve_kkt(ops, data, solver="minres", precon="sym", tol=1e-10)
    assert res_g.converged and res_m.converged
    diff = np.linalg.norm(res_g.x - res_m.x) / np.linalg.norm(res_g.x)
    assert diff <= 1e-6


def test_minres_requires_spd_preconditioner():
    ops, data = tiny_star_ops()
    with pytest.raises(ValueError, match="SPD"):
        solve_kkt(ops, data, solver="minres", precon="nonsym")


def test_solve_kkt_unknown_solver():
    ops, data = tiny_star_ops()
    with pytest.raises(ValueError, match="solver"):
        solve_kkt(ops, data, solver="jacobi")


def test_solve_ocp_zero_data_gives_zero():
    g = make_star(3)
    data = ProblemData(beta=0.5, c0=1.0, f=0.0, ybar=0.0)
    sol = solve_ocp(g, 4, data)
    assert np.all(sol.u == 0.0)
    assert np.all(sol.y.values == 0.0)
    assert np.all(sol.p.values == 0.0)
    assert sol.stats.iterations == 0


def test_solve_ocp_block_and_optimality_residuals():
    g = make_fdm_L_graph(8, 6, seed=3)
    data = ProblemData(beta=0.1, c0=2.0, f=1.5, ybar=1.0)
    sol = solve_ocp(g, 8, data, tol=1e-8)
    assert sol.stats.converged
    assert sol.stats.block_residual <= 1e-7
    assert sol.stats.optimality_residual <= 1e-7
    assert sol.stats.n_dof == g.n_vertices + g.n_edges * 7


def test_solve_ocp_large_beta_kills_control():
    g = make_fdm_L_graph(8, 6, seed=3)
    small = solve_ocp(g, 8, ProblemData(beta=0.1, c0=2.0, f=1.5, ybar=1.0))
    large = solve_ocp(g, 8, ProblemData(beta=1e6, c0=2.0, f=1.5, ybar=1.0))
    assert np.linalg.norm(large.u) <= 1e-4 * np.linalg.norm(small.u)


def test_solve_ocp_improves_objective():
    g = make_fdm_L_graph(10, 12, seed=1)
    data = ProblemData(beta=0.1, c0=2.0, f=1.5, ybar=1.0)
    sol = solve_ocp(g, 8, data)
    mesh = build_mesh(g, 8)
    ops = build_operators(mesh, data)
    uncontrolled = solve_state(ops, f_vec=ops.f_vec)
    j_zero = objective_value(ops, uncontrolled.y.values, np.zeros(g.n_dirichlet))
    assert sol.stats.objective < j_zero


def test_solve_ocp_matches_reduced_oracle():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 5:
        g = random_metric_graph(rng, n_min=4, n_max=12)
        n_e = int(rng.integers(2, 7))
        mesh = build_mesh(g, n_e)
        if mesh.n_dof > 300:
            continue
        data = ProblemData(
            beta=float(rng.uniform(1e-3, 1.0)),
            c0=float(rng.uniform(0.0, 2.0)),
            f=float(rng.uniform(-2.0, 2.0)),
            ybar=float(rng.uniform(-2.0, 2.0)),
        )
        u_oracle = reduced_oracle(g, n_e, data)
        sol = solve_ocp(g, n_e, data, tol=1e-10)
        err = np.linalg.norm(sol.u - u_oracle)
        assert err <= 1e-7 * (1.0 + np.linalg.norm(u_oracle))
        checked += 1


def test_reduced_oracle_single_control_closed_form():
    base = CombinatorialGraph(2, ((0, 1),), np.ones(1))
    g = MetricGraph(base, np.ones(1), (1,))
    data = ProblemData(beta=0.3, c0=1.0, f=1.0, ybar=2.0)
    n_e = 8
    u = reduced_oracle(g, n_e, data)
    assert u.shape == (1,)
    # independent dense computation of the 1x1 normal equation
    mesh = build_mesh(g, n_e)
    ops = build_operators(mesh, data)
    kd = ops.K_FD.toarray().ravel()
    kff = ops.K_FF.toarray()
    s = np.zeros(mesh.n_dof)
    s[: ops.n_free] = np.linalg.solve(kff, -kd)
    s[ops.n_free :] = 1.0
    y_f = np.zeros(mesh.n_dof)
    y_f[: ops.n_free] = np.linalg.solve(kff, ops.f_F)
    m = ops.M.toarray()
    gram = s @ (m @ s) + data.beta
    rhs = (nodal_values(mesh, data.ybar) - y_f) @ (m @ s)
    assert abs(u[0] - rhs / gram) <= 1e-10 * max(abs(u[0]), 1.0)


def test_reduced_oracle_beta_limit():
    g = make_star(4)
    data1 = ProblemData(beta=1.0, c0=1.0, f=1.0, ybar=1.0)
    data2 = ProblemData(beta=1e12, c0=1.0, f=1.0, ybar=1.0)
    u1 = reduced_oracle(g, 4, data1)
    u2 = reduced_oracle(g, 4, data2)
    assert np.linalg.norm(u2) <= 1e-9 * np.linalg.norm(u1)


def test_reduced_oracle_cap():
    g = make_star(12)
    data = ProblemData(beta=1.0)
    with pytest.raises(ValueError, match="capped"):
        reduced_oracle(g, 2, data, cap=5)


def test_iteration_counts_mesh_robust():
    # counts may grow only mildly when the mesh is refined fourfold
    g = make_star(12)
    data = ProblemData(beta=1e-3, c0=2.0, f=1.5, ybar=1.0)
    its = {}
    for n_e in (16, 64, 256):
        its[n_e] = solve_ocp(g, n_e, data).stats.iterations
    assert its[64] <= 2 * its[16]
    assert its[256] <= 2 * its[64]


def test_iteration_counts_beta_robust_invariant():
    g = make_star(8)
    counts = []
    for beta in (1e-2, 1e-3, 1e-4, 1e-5):
        data = ProblemData(beta=beta, c0=2.0, f=1.5, ybar=1.0)
        counts.append(solve_ocp(g, 32, data).stats.iterations)
    assert max(counts) / min(counts) <= 1.5
