"""Discrete optimality (KKT) system, block preconditioners, and Krylov solvers.

The first-order conditions form the symmetric saddle-point system

    [ M_FF          M_FD        K_FF^T ] [ y_F ]   [ ybar_F ]
    [ M_DF          M_DD + bI   K_FD^T ] [ u   ] = [ ybar_D ]
    [ K_FF          K_FD        0      ] [ p_F ]   [ f_F    ]

whose third unknown carries the opposite sign of the adjoint state; solvers
flip it back on output so that b*u equals the variational vertex flux of p.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import linalg
from .assembly import FeOperators, ProblemData, build_operators
from .graphs import MetricGraph
from .mesh import PiecewiseLinearFunction, build_mesh, nodal_values
from .pde import discrete_kirchhoff, harmonic_extension, solve_state

PRECONDITIONER_KINDS = ("none", "ideal", "matched_symmetric", "matched_nonsymmetric")

_PRECON_ALIASES = {
    "none": "none",
    "identity": "none",
    "ideal": "ideal",
    "sym": "matched_symmetric",
    "matched_symmetric": "matched_symmetric",
    "nonsym": "matched_nonsymmetric",
    "matched_nonsymmetric": "matched_nonsymmetric",
}


def normalize_precon_kind(kind: str) -> str:
    try:
        return _PRECON_ALIASES[kind]
    except KeyError:
        raise ValueError(f"unknown preconditioner kind {kind!r}") from None


@dataclass(eq=False)
class KktSystem:
    """Matrix-free application of the symmetric 3x3 saddle-point operator."""

    m_ff: sp.csr_matrix
    m_fd: sp.csr_matrix
    m_df: sp.csr_matrix
    m_dd: sp.csr_matrix
    k_ff: sp.csr_matrix
    k_fd: sp.csr_matrix
    k_df: sp.csr_matrix
    beta: float
    rhs: np.ndarray
    n_f: int
    n_d: int

    @property
    def dim(self) -> int:
        return 2 * self.n_f + self.n_d

    def split(self, x):
        nf, nd = self.n_f, self.n_d
        return x[:nf], x[nf : nf + nd], x[nf + nd :]

    def apply(self, x) -> np.ndarray:
        x1, x2, x3 = self.split(np.asarray(x, dtype=float))
        out = np.empty(self.dim)
        out[: self.n_f] = self.m_ff @ x1 + self.m_fd @ x2 + self.k_ff @ x3
        out[self.n_f : self.n_f + self.n_d] = (
            self.m_df @ x1 + self.m_dd @ x2 + self.beta * x2 + self.k_df @ x3
        )
        out[self.n_f + self.n_d :] = self.k_ff @ x1 + self.k_fd @ x2
        return out

    def as_dense(self, cap: int = 2000) -> np.ndarray:
        """Materialized operator for oracles and eigenvalue probes, size-capped."""
        if self.dim > cap:
            raise ValueError(f"dense KKT materialization capped at {cap}, got {self.dim}")
        z = sp.csr_matrix((self.n_f, self.n_f))
        full = sp.bmat(
            [
                [self.m_ff, self.m_fd, self.k_ff.T],
                [self.m_df, self.m_dd + self.beta * sp.identity(self.n_d), self.k_fd.T],
                [self.k_ff, self.k_fd, z],
            ]
        )
        return full.toarray()


def build_kkt(ops: FeOperators, data: ProblemData) -> KktSystem:
    """Assemble the saddle-point operator and right-hand side (ybar_F, ybar_D, f_F)."""
    if not data.beta > 0:
        raise ValueError("regularization weight must be positive")
    rhs = np.concatenate([ops.ybar_F, ops.ybar_D, ops.f_F])
    return KktSystem(
        m_ff=ops.M_FF,
        m_fd=ops.M_FD,
        m_df=ops.M_DF,
        m_dd=ops.M_DD,
        k_ff=ops.K_FF,
        k_fd=ops.K_FD,
        k_df=ops.K_DF,
        beta=data.beta,
        rhs=rhs,
        n_f=ops.n_free,
        n_d=ops.n_dirichlet,
    )


class Preconditioner:
    """Block-diagonal approximate inverse of the KKT operator.

    ``apply`` maps a residual to the preconditioned residual; inner solves are
    prefactored once at construction.  ``symmetric_definite`` marks the kinds
    admissible for MINRES.
    """

    def __init__(self, kind, n_f, n_d, apply_fn, symmetric_definite, **extras):
        self.kind = kind
        self.n_f = n_f
        self.n_d = n_d
        self._apply = apply_fn
        self.symmetric_definite = symmetric_definite
        self.d_m = extras.get("d_m")
        self.d_sm = extras.get("d_sm")
        self.d_kdk = extras.get("d_kdk")
        self.n_diag = extras.get("n_diag")
        self.n2 = extras.get("n2")
        self.s_m = extras.get("s_m")
        self.schur_dense = extras.get("schur_dense")

    def apply(self, r) -> np.ndarray:
        return self._apply(np.asarray(r, dtype=float))


def _mass_diag_schur(ops: FeOperators, beta: float):
    """D_M = diag(M_FF) and the diagonal-based control Schur block D_SM."""
    d_m = ops.M_FF.diagonal()
    n_d = ops.n_dirichlet
    d_sm = (
        ops.M_DD
        + beta * sp.identity(n_d, format="csr")
        - ops.M_DF @ sp.diags(1.0 / d_m) @ ops.M_FD
    ).tocsr()
    bad = np.nonzero(d_sm.diagonal() <= 0)[0]
    if bad.size:
        raise ValueError(f"control Schur block has nonpositive diagonal at index {int(bad[0])}")
    return d_m, d_sm


def build_preconditioner(
    kind: str, ops: FeOperators, data: ProblemData, dense_cap: int = 2000
) -> Preconditioner:
    """Set up one of the KKT preconditioners with prefactored inner solves.

    Kinds: ``none`` (identity), ``ideal`` (exact mass block and exact dense
    Schur complement, size-capped diagnostic), ``matched_symmetric``
    (diagonal mass approximations and the lumped-square-root matching term N,
    SPD and usable with MINRES) and ``matched_nonsymmetric`` (the
    GMRES-oriented Schur approximation with the full M_FF, applied exactly
    through its low-rank structure).
    """
    kind = normalize_precon_kind(kind)
    n_f, n_d = ops.n_free, ops.n_dirichlet
    beta = data.beta
    if kind == "none":
        return Preconditioner("none", n_f, n_d, lambda r: r, symmetric_definite=True)
    if n_d == 0:
        raise ValueError(f"{kind} preconditioner needs at least one Dirichlet node")

    if kind == "ideal":
        dim = 2 * n_f + n_d
        if dim > dense_cap:
            raise ValueError(f"ideal preconditioner is dense and capped at {dense_cap}, got {dim}")
        m2 = sp.bmat(
            [[ops.M_FF, ops.M_FD], [ops.M_DF, ops.M_DD + beta * sp.identity(n_d)]]
        ).tocsc()
        m2_fact = linalg.factor(m2, "cholesky")
        b = sp.hstack([ops.K_FF, ops.K_FD]).tocsr()
        x = m2_fact.solve(b.T.toarray())
        s = b @ x
        s = 0.5 * (s + s.T)
        s_fact = scipy.linalg.cho_factor(s)

        def apply_ideal(r):
            out = np.empty_like(r)
            out[: n_f + n_d] = m2_fact.solve(r[: n_f + n_d])
            out[n_f + n_d :] = scipy.linalg.cho_solve(s_fact, r[n_f + n_d :])
            return out

        return Preconditioner(
            "ideal", n_f, n_d, apply_ideal, symmetric_definite=True, schur_dense=s
        )

    d_m, d_sm = _mass_diag_schur(ops, beta)
    dsm_fact = linalg.factor(d_sm.tocsc(), "cholesky")

    if kind == "matched_symmetric":
        # Lumped diagonal of K_FD D_SM^{-1} K_FD^T via its row sums.
        d_kdk = ops.K_FD @ dsm_fact.solve(np.asarray(ops.K_FD.sum(axis=0)).ravel())
        floor = -1e-12 * max(float(np.abs(d_kdk).max()), 1.0)
        if np.any(d_kdk < floor):
            raise ValueError("lumped Schur matching diagonal has negative entries")
        d_kdk = np.maximum(d_kdk, 0.0)
        n_diag = np.sqrt(d_kdk * d_m)
        g = (ops.K_FF + sp.diags(n_diag)).tocsc()
        try:
            g_fact = linalg.factor(g, "cholesky")
        except linalg.NotPositiveDefiniteError as exc:
            raise ValueError(f"matched Schur block not SPD: {exc}") from exc

        def apply_sym(r):
            out = np.empty_like(r)
            out[:n_f] = r[:n_f] / d_m
            out[n_f : n_f + n_d] = dsm_fact.solve(r[n_f : n_f + n_d])
            out[n_f + n_d :] = g_fact.solve(d_m * g_fact.solve(r[n_f + n_d :]))
            return out

        return Preconditioner(
            "matched_symmetric",
            n_f,
            n_d,
            apply_sym,
            symmetric_definite=True,
            d_m=d_m,
            d_sm=d_sm,
            d_kdk=d_kdk,
            n_diag=n_diag,
        )

    # matched_nonsymmetric: the GMRES-oriented Schur approximation
    #   S = K_FF M_FF^{-1} K_FF^T + K_FD D_SM^{-1} K_FD^T
    # applied exactly.  The second term has rank n_D, so the inverse follows
    # from the Woodbury identity around C = K_FF M_FF^{-1} K_FF^T, whose own
    # inverse is an LU solve with K_FF, a multiply by the full M_FF, and an
    # LU solve with K_FF^T.  A matched-product surrogate (K_FF + N1) M_FF^{-1}
    # (K_FF^T + N2) overshoots S by O(h^-2) on n_D directions and loses both
    # beta- and mesh-robustness, so the exact low-rank form is used instead.
    kff_fact = linalg.factor(ops.K_FF.tocsc(), "lu")
    m_ff = ops.M_FF
    w_fd = ops.K_FD.toarray()

    def c_inv(r):
        return kff_fact.solve(m_ff @ kff_fact.solve(r))

    cinv_w = c_inv(w_fd)
    capacitance = d_sm.toarray() + w_fd.T @ cinv_w
    cap_fact = scipy.linalg.lu_factor(capacitance)

    def apply_nonsym(r):
        out = np.empty_like(r)
        out[:n_f] = r[:n_f] / d_m
        out[n_f : n_f + n_d] = dsm_fact.solve(r[n_f : n_f + n_d])
        t = c_inv(r[n_f + n_d :])
        out[n_f + n_d :] = t - cinv_w @ scipy.linalg.lu_solve(cap_fact, w_fd.T @ t)
        return out

    return Preconditioner(
        "matched_nonsymmetric",
        n_f,
        n_d,
        apply_nonsym,
        symmetric_definite=False,
        d_m=d_m,
        d_sm=d_sm,
    )


@dataclass(eq=False)
class KrylovResult:
    x: np.ndarray
    iterations: int
    converged: bool
    residuals: np.ndarray
    true_residual: float


def gmres(apply_a, b, apply_p_inv=None, tol: float = 1e-8, max_it: int | None = None) -> KrylovResult:
    """Right-preconditioned GMRES without restarts.

    Solves A x = b with the Arnoldi process on A P^{-1}; right preconditioning
    keeps the recurrence residual equal to the true residual, and the method
    terminates as soon as ||b - A x|| <= tol ||b||.  The iteration count is
    the number of Arnoldi steps; the residual history holds the relative
    residual after each step.
    """
    b = np.asarray(b, dtype=float)
    n = b.size
    preconditioned = apply_p_inv is not None
    if apply_p_inv is None:
        apply_p_inv = lambda q: q
    if max_it is None:
        max_it = n
    k_max = min(max_it, n)
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return KrylovResult(np.zeros(n), 0, True, np.zeros(1), 0.0)
    residuals = [1.0]
    if residuals[0] <= tol:
        return KrylovResult(np.zeros(n), 0, True, np.array(residuals), 1.0)

    v = np.zeros((n, k_max + 1), order="F")
    v[:, 0] = b / b_norm
    # The preconditioned basis is kept so the solution can be combined
    # directly in solution space; mapping V y through P^{-1} instead would
    # amplify roundoff by the spread of the preconditioner block scales.
    z = np.zeros((n, k_max), order="F") if preconditioned else v
    h = np.zeros((k_max + 1, k_max))
    cs = np.zeros(k_max)
    sn = np.zeros(k_max)
    g = np.zeros(k_max + 1)
    g[0] = b_norm

    def form_solution(k):
        y = scipy.linalg.solve_triangular(h[:k, :k], g[:k])
        return z[:, :k] @ y

    k_used = 0
    converged = False
    x = None
    true_res = None
    # The recurrence residual equals the true residual only in exact
    # arithmetic; verify on candidate solutions and tighten if needed.
    target = tol
    for k in range(k_max):
        zk = np.asarray(apply_p_inv(v[:, k]), dtype=float)
        if preconditioned:
            z[:, k] = zk
        w = np.asarray(apply_a(zk), dtype=float)
        # Classical Gram-Schmidt with one reorthogonalization pass.
        basis = v[:, : k + 1]
        coeffs = basis.T @ w
        w = w - basis @ coeffs
        corr = basis.T @ w
        w = w - basis @ corr
        coeffs = coeffs + corr
        h_next = float(np.linalg.norm(w))
        h[: k + 1, k] = coeffs
        h[k + 1, k] = h_next
        for i in range(k):
            t = cs[i] * h[i, k] + sn[i] * h[i + 1, k]
            h[i + 1, k] = -sn[i] * h[i, k] + cs[i] * h[i + 1, k]
            h[i, k] = t
        denom = float(np.hypot(h[k, k], h[k + 1, k]))
        if denom == 0.0:
            cs[k], sn[k] = 1.0, 0.0
        else:
            cs[k] = h[k, k] / denom
            sn[k] = h[k + 1, k] / denom
        h[k, k] = denom
        h[k + 1, k] = 0.0
        g[k + 1] = -sn[k] * g[k]
        g[k] = cs[k] * g[k]
        k_used = k + 1
        rel = abs(g[k + 1]) / b_norm
        residuals.append(rel)
        breakdown = h_next <= 1e-14 * b_norm
        if rel <= target or breakdown:
            cand = form_solution(k_used)
            cand_res = float(np.linalg.norm(b - np.asarray(apply_a(cand))) / b_norm)
            if true_res is None or cand_res < true_res:
                x, true_res = cand, cand_res
            if cand_res <= tol:
                converged = True
                break
            if breakdown:
                break
            target = min(target, rel) / 4.0
        if breakdown:
            break
        v[:, k + 1] = w / h_next

    if not converged:
        final = form_solution(k_used)
        final_res = float(np.linalg.norm(b - np.asarray(apply_a(final))) / b_norm)
        if true_res is None or final_res < true_res:
            x, true_res = final, final_res
        converged = true_res <= tol
    return KrylovResult(x, k_used, converged, np.array(residuals), true_res)


def minres(apply_a, b, apply_p_inv=None, tol: float = 1e-8, max_it: int | None = None) -> KrylovResult:
    """Preconditioned MINRES for symmetric (indefinite) operators.

    The preconditioner application must be symmetric positive definite.
    Symmetry of the operator is probed on random vectors at setup; the
    iteration stops once the preconditioned relative residual drops below
    tol, and the true unpreconditioned residual is reported alongside.
    """
    b = np.asarray(b, dtype=float)
    n = b.size
    if apply_p_inv is None:
        apply_p_inv = lambda q: q
    if max_it is None:
        max_it = n

    rng = np.random.default_rng(12345)
    vp = rng.standard_normal(n)
    wp = rng.standard_normal(n)
    av = np.asarray(apply_a(vp))
    aw = np.asarray(apply_a(wp))
    scale = np.linalg.norm(av) * np.linalg.norm(wp) + np.linalg.norm(vp) * np.linalg.norm(aw)
    if abs(av @ wp - vp @ aw) > 1e-10 * max(scale, 1.0):
        raise ValueError("operator is not symmetric; MINRES requires <Av,w> = <v,Aw>")

    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return KrylovResult(np.zeros(n), 0, True, np.zeros(1), 0.0)

    x = np.zeros(n)
    r1 = b.copy()
    y = np.asarray(apply_p_inv(r1), dtype=float)
    beta1_sq = float(r1 @ y)
    if beta1_sq < 0.0:
        raise ValueError("preconditioner is not positive definite")
    beta1 = np.sqrt(beta1_sq)
    if beta1 == 0.0:
        return KrylovResult(x, 0, True, np.zeros(1), 0.0)

    oldb = 0.0
    beta = beta1
    dbar = 0.0
    epsln = 0.0
    phibar = beta1
    cs = -1.0
    sn = 0.0
    w = np.zeros(n)
    w2 = np.zeros(n)
    r2 = r1
    residuals = [1.0]
    converged = False
    iterations = 0
    for itn in range(1, max_it + 1):
        s = 1.0 / beta
        v = s * y
        y = np.asarray(apply_a(v), dtype=float)
        if itn >= 2:
            y = y - (beta / oldb) * r1
        alfa = float(v @ y)
        y = y - (alfa / beta) * r2
        r1 = r2
        r2 = y
        y = np.asarray(apply_p_inv(r2), dtype=float)
        oldb = beta
        beta_sq = float(r2 @ y)
        if beta_sq < 0.0:
            raise ValueError("preconditioner is not positive definite")
        beta = np.sqrt(beta_sq)

        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta
        gamma = max(np.hypot(gbar, beta), np.finfo(float).eps)
        cs = gbar / gamma
        sn = beta / gamma
        phi = cs * phibar
        phibar = sn * phibar

        w1 = w2
        w2 = w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x = x + phi * w

        iterations = itn
        rel = phibar / beta1
        residuals.append(rel)
        if rel <= tol:
            converged = True
            break

    true_res = float(np.linalg.norm(b - np.asarray(apply_a(x))) / b_norm)
    return KrylovResult(x, iterations, converged, np.array(residuals), true_res)


@dataclass(eq=False)
class SolveStats:
    n_dof: int
    iterations: int
    converged: bool
    residual: float
    block_residual: float
    optimality_residual: float
    objective: float
    elapsed: float
    solver: str
    precon: str


@dataclass(eq=False)
class OcpSolution:
    y: PiecewiseLinearFunction
    u: np.ndarray
    p: PiecewiseLinearFunction
    stats: SolveStats


def objective_value(ops: FeOperators, y_values, u) -> float:
    """Tracking objective 0.5 ||y - ybar||_{L2}^2 + 0.5 beta |u|^2."""
    e = np.asarray(y_values, dtype=float) - nodal_values(ops.mesh, ops.data.ybar)
    u = np.asarray(u, dtype=float)
    return 0.5 * ops.l2_inner(e, e) + 0.5 * ops.data.beta * float(u @ u)


def optimality_residual(ops: FeOperators, y, u, p) -> float:
    """Relative defect of b*u - K_h p with the adjoint-state sign convention."""
    yv = y.values if isinstance(y, PiecewiseLinearFunction) else np.asarray(y)
    pv = p.values if isinstance(p, PiecewiseLinearFunction) else np.asarray(p)
    resid = yv - nodal_values(ops.mesh, ops.data.ybar)
    flux = discrete_kirchhoff(ops, pv, resid)
    defect = ops.data.beta * np.asarray(u) - flux
    denom = ops.data.beta * np.linalg.norm(u) + np.linalg.norm(flux)
    if denom == 0.0:
        return float(np.linalg.norm(defect))
    return float(np.linalg.norm(defect) / denom)


def solve_kkt(
    ops: FeOperators,
    data: ProblemData,
    solver: str = "gmres",
    precon: str = "matched_nonsymmetric",
    tol: float = 1e-8,
    max_it: int | None = None,
    dense_cap: int = 2000,
):
    """Build and solve the saddle-point system; returns (result, kkt, preconditioner)."""
    kkt = build_kkt(ops, data)
    pc = build_preconditioner(precon, ops, data, dense_cap=dense_cap)
    if max_it is None:
        # unpreconditioned comparison runs are capped near the mesh size;
        # preconditioned runs get a generous cap never below the system size
        max_it = ops.mesh.n_dof if pc.kind == "none" else min(kkt.dim, 1000)
    if solver == "gmres":
        result = gmres(kkt.apply, kkt.rhs, pc.apply, tol=tol, max_it=max_it)
    elif solver == "minres":
        if not pc.symmetric_definite:
            raise ValueError(f"MINRES needs an SPD preconditioner, not {pc.kind}")
        result = minres(kkt.apply, kkt.rhs, pc.apply, tol=tol, max_it=max_it)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    return result, kkt, pc


def solve_ocp(
    graph: MetricGraph,
    n_e: int,
    data: ProblemData,
    solver: str = "gmres",
    precon: str = "matched_nonsymmetric",
    tol: float = 1e-8,
    max_it: int | None = None,
    dense_cap: int = 2000,
) -> OcpSolution:
    """Discretize and solve the optimal control problem end to end.

    Returns the state, the control, and the adjoint state (sign restored so
    that the optimality condition b*u = K_h p holds), plus solve statistics.
    """
    t0 = time.perf_counter()
    mesh = build_mesh(graph, n_e)
    ops = build_operators(mesh, data)
    return solve_ocp_assembled(
        ops, data, solver=solver, precon=precon, tol=tol, max_it=max_it,
        dense_cap=dense_cap, _t0=t0,
    )


def solve_ocp_assembled(
    ops: FeOperators,
    data: ProblemData,
    solver: str = "gmres",
    precon: str = "matched_nonsymmetric",
    tol: float = 1e-8,
    max_it: int | None = None,
    dense_cap: int = 2000,
    _t0: float | None = None,
) -> OcpSolution:
    """Solve on prebuilt operators (used by parameter sweeps to share assembly)."""
    t0 = time.perf_counter() if _t0 is None else _t0
    result, kkt, pc = solve_kkt(
        ops, data, solver=solver, precon=precon, tol=tol, max_it=max_it, dense_cap=dense_cap
    )
    mesh = ops.mesh
    y_f_part, u, p_flipped = kkt.split(result.x)
    nf = ops.n_free
    y = np.empty(mesh.n_dof)
    y[:nf] = y_f_part
    y[nf:] = u
    p = np.zeros(mesh.n_dof)
    p[:nf] = -p_flipped
    y_fn = PiecewiseLinearFunction(mesh, y)
    p_fn = PiecewiseLinearFunction(mesh, p)
    rhs_norm = float(np.linalg.norm(kkt.rhs))
    block_res = float(np.linalg.norm(kkt.apply(result.x) - kkt.rhs))
    if rhs_norm > 0:
        block_res /= rhs_norm
    stats = SolveStats(
        n_dof=mesh.n_dof,
        iterations=result.iterations,
        converged=result.converged,
        residual=result.true_residual,
        block_residual=block_res,
        optimality_residual=optimality_residual(ops, y_fn, u, p_fn),
        objective=objective_value(ops, y, u),
        elapsed=time.perf_counter() - t0,
        solver=solver,
        precon=pc.kind,
    )
    return OcpSolution(y=y_fn, u=u.copy(), p=p_fn, stats=stats)


def reduced_oracle(graph: MetricGraph, n_e: int, data: ProblemData, cap: int = 500) -> np.ndarray:
    """Brute-force control via the dense reduced normal equations.

    Builds G_ij = (S e_i, S e_j)_{L2} + beta delta_ij column by column from
    harmonic-extension solves and r_i = (ybar - y_f, S e_i)_{L2}, then solves
    the dense n_D x n_D system.  Independent of the KKT path; intended as a
    cross-check at small control counts.
    """
    mesh = build_mesh(graph, n_e)
    ops = build_operators(mesh, data)
    n_d = ops.n_dirichlet
    if n_d > cap:
        raise ValueError(f"reduced oracle capped at {cap} controls, got {n_d}")
    if n_d == 0:
        return np.zeros(0)
    y_f = solve_state(ops, f_vec=ops.f_vec).y_f.values
    ybar = nodal_values(mesh, data.ybar)
    columns = np.column_stack(
        [harmonic_extension(ops, np.eye(n_d)[i]).values for i in range(n_d)]
    )
    gram = columns.T @ (ops.M @ columns) + data.beta * np.eye(n_d)
    rhs = columns.T @ (ops.M @ (ybar - y_f))
    return scipy.linalg.solve(gram, rhs, assume_a="pos")
