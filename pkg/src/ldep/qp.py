"""Operator-splitting solver for convex quadratic programs.

Solves problems of the form

    minimize    (1/2) z' diag(P) z + q' z
    subject to  l <= A z <= u

with a diagonal, nonnegative quadratic cost (pure LPs are the P = 0
case).  The method is ADMM with over-relaxation: the regularized KKT
matrix is factored once per problem and reused every iteration, the
constraint matrix is equilibrated beforehand by iterative max-norm
scaling, and an active-set polish step is used to push the returned
solution to high accuracy once the iterates have settled.

Distinct problems may be solved concurrently; a single solve call is
single-threaded and deterministic.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DimensionMismatch, LdepError

__all__ = [
    "SolverConfig",
    "ConvexSubproblem",
    "Solution",
    "SolveStatus",
    "solve",
    "kkt_residuals",
    "dump_subproblem",
]

# Equality-like rows get a stiffer step, free rows a much softer one.
_RHO_EQ_SCALE = 1e3
_RHO_FREE_SCALE = 1e-6
_EQ_GAP = 1e-10
_SCALING_REG = 1e-12
_POLISH_TRIGGER = 1e-2
_POLISH_DELTA = 1e-7
_POLISH_REFINE = 5
_POLISH_RETRY_GAP = 200
# Stop early when a decent iterate exists but the best residual score has
# improved by less than 10% across a span of iterations; degenerate
# problems otherwise crawl at the iteration cap with no hope of
# certifying.  The minimum-iteration guard keeps warm-start transients
# (good primal, stale dual) from tripping the test.
_STALL_SPAN = 1500
_STALL_FACTOR = 0.9
_STALL_MIN_ITERS = 3000
_STALL_SCORE_CEIL = 1e-3


class SolveStatus(enum.Enum):
    SOLVED = "Solved"
    MAX_ITER = "MaxIter"
    INFEASIBLE = "Infeasible"


@dataclass(frozen=True)
class SolverConfig:
    """Settings of the operator-splitting solver.

    Attributes
    ----------
    rho : float
        Base step parameter; scaled per constraint row depending on its
        bounds (stiffer on equality-like rows, softer on free rows).
    sigma : float
        Primal regularization added to the KKT matrix.
    relaxation : float
        Over-relaxation coefficient, in (0, 2).
    eps_prim, eps_dual : float
        Absolute residual thresholds certifying a solution.
    max_iters : int
        Iteration cap.
    check_interval : int
        Iterations between residual / termination checks.
    scaling_passes : int
        Max-norm equilibration sweeps over the constraint matrix.
    infeas_tol : float
        Relative threshold of the divergence certificate that declares
        primal infeasibility.
    polish : bool
        Whether to attempt active-set polishing of near-converged
        iterates.
    """

    rho: float = 0.1
    sigma: float = 1e-6
    relaxation: float = 1.6
    eps_prim: float = 1e-6
    eps_dual: float = 1e-6
    max_iters: int = 50000
    check_interval: int = 25
    scaling_passes: int = 10
    infeas_tol: float = 1e-12
    polish: bool = True

    def __post_init__(self):
        if not self.rho > 0:
            raise LdepError(f"rho must be positive, got {self.rho}")
        if self.sigma < 0:
            raise LdepError("sigma must be nonnegative")
        if not 0.0 < self.relaxation < 2.0:
            raise LdepError("relaxation must lie in (0, 2)")
        if not (self.eps_prim > 0 and self.eps_dual > 0):
            raise LdepError("residual tolerances must be positive")
        if self.max_iters < 1 or self.check_interval < 1:
            raise LdepError("max_iters and check_interval must be at least 1")
        if self.scaling_passes < 0:
            raise LdepError("scaling_passes must be nonnegative")
        if not self.infeas_tol > 0:
            raise LdepError("infeas_tol must be positive")


@dataclass(frozen=True)
class ConvexSubproblem:
    """Standard-form convex QP with two-sided linear constraints.

    ``P`` holds the diagonal of the quadratic cost (entrywise >= 0), and
    ``l``/``u`` may contain +-inf for one-sided rows.  ``A`` must not
    contain all-zero rows.
    """

    P: np.ndarray
    q: np.ndarray
    A: sp.csc_matrix
    l: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float).ravel()
        q = np.asarray(self.q, dtype=float).ravel()
        A = sp.csc_matrix(self.A, dtype=float)
        lo = np.asarray(self.l, dtype=float).ravel()
        up = np.asarray(self.u, dtype=float).ravel()
        n = P.shape[0]
        if q.shape[0] != n:
            raise DimensionMismatch("len(q) vs len(P)", n, q.shape[0])
        if A.shape[1] != n:
            raise DimensionMismatch("columns of A vs len(P)", n, A.shape[1])
        k = A.shape[0]
        if lo.shape[0] != k or up.shape[0] != k:
            raise DimensionMismatch("len(l), len(u) vs rows of A", k, (lo.shape[0], up.shape[0]))
        if not np.all(np.isfinite(P)) or not np.all(np.isfinite(q)):
            raise LdepError("P and q must be finite")
        if np.any(P < 0):
            raise LdepError("P must be entrywise nonnegative")
        if not np.all(np.isfinite(A.data)):
            raise LdepError("A must have finite entries")
        if np.any(np.isnan(lo)) or np.any(np.isnan(up)):
            raise LdepError("bounds must not contain NaN")
        if np.any(lo > up):
            raise LdepError("every lower bound must not exceed its upper bound")
        if k > 0:
            row_nnz = np.diff(sp.csr_matrix(abs(A)).indptr)
            if np.any(row_nnz == 0):
                raise LdepError("A contains an all-zero row")
        A.eliminate_zeros()
        A.sort_indices()
        for arr in (P, q, lo, up):
            arr.flags.writeable = False
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "l", lo)
        object.__setattr__(self, "u", up)

    @property
    def num_vars(self) -> int:
        return self.P.shape[0]

    @property
    def num_constraints(self) -> int:
        return self.A.shape[0]

    def objective_value(self, z: np.ndarray) -> float:
        z = np.asarray(z, dtype=float)
        return float(0.5 * np.dot(z * self.P, z) + np.dot(self.q, z))


@dataclass(frozen=True)
class Solution:
    """Result of a solve: primal/dual vectors plus certification data."""

    z: np.ndarray
    y: np.ndarray
    status: SolveStatus
    primal_residual: float
    dual_residual: float
    iterations: int


def kkt_residuals(p: ConvexSubproblem, s: Solution) -> tuple[float, float]:
    """Primal feasibility and stationarity gaps of a candidate solution.

    primal = ||clip(Az, l, u) - Az||_inf, dual = ||Pz + q + A'y||_inf.
    """
    z = np.asarray(s.z, dtype=float)
    y = np.asarray(s.y, dtype=float)
    if z.shape[0] != p.num_vars:
        raise DimensionMismatch("len(z) vs problem size", p.num_vars, z.shape[0])
    if y.shape[0] != p.num_constraints:
        raise DimensionMismatch("len(y) vs constraint count", p.num_constraints, y.shape[0])
    return _residuals(p, z, y)


def _residuals(p: ConvexSubproblem, z: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    if p.num_constraints > 0:
        az = p.A @ z
        prim = float(np.max(np.abs(np.clip(az, p.l, p.u) - az)))
        dual_vec = p.P * z + p.q + p.A.T @ y
    else:
        prim = 0.0
        dual_vec = p.P * z + p.q
    dual = float(np.max(np.abs(dual_vec))) if dual_vec.size else 0.0
    return prim, dual


def _equilibrate(A: sp.csc_matrix, passes: int) -> tuple[np.ndarray, np.ndarray]:
    """Iterative max-norm scaling; returns column scale d and row scale e."""
    k, n = A.shape
    d = np.ones(n)
    e = np.ones(k)
    if k == 0 or A.nnz == 0:
        return d, e
    As = abs(A).tocsc()
    for _ in range(passes):
        col_max = np.asarray(As.max(axis=0).todense()).ravel()
        row_max = np.asarray(As.max(axis=1).todense()).ravel()
        dc = 1.0 / np.sqrt(np.where(col_max > _SCALING_REG, col_max, 1.0))
        dr = 1.0 / np.sqrt(np.where(row_max > _SCALING_REG, row_max, 1.0))
        As = sp.diags(dr) @ As @ sp.diags(dc)
        d *= dc
        e *= dr
    return d, e


def _row_steps(rho: float, lo: np.ndarray, up: np.ndarray) -> np.ndarray:
    steps = np.full(lo.shape[0], rho)
    finite_gap = np.isfinite(lo) & np.isfinite(up)
    steps[finite_gap & (up - lo <= _EQ_GAP)] = rho * _RHO_EQ_SCALE
    steps[np.isneginf(lo) & np.isposinf(up)] = rho * _RHO_FREE_SCALE
    return steps


def _polish(p: ConvexSubproblem, z: np.ndarray, y: np.ndarray):
    """Active-set refinement of a near-converged iterate.

    Constraints are classified as active when their multiplier is
    decisively nonzero AND the row sits near the corresponding bound;
    both filters are needed because degenerate problems leave boundary
    chatter in the duals of weakly active rows.  The resulting
    equality-constrained KKT system is solved with a small
    regularization plus iterative refinement, and the candidate is
    returned for acceptance by residual comparison.
    """
    n = p.num_vars
    az = p.A @ z
    prim = float(np.max(np.abs(np.clip(az, p.l, p.u) - az))) if az.size else 0.0
    y_cut = 1e-9 * max(1.0, float(np.max(np.abs(y))) if y.size else 0.0)
    finite_l = np.isfinite(p.l)
    finite_u = np.isfinite(p.u)
    prox_l = np.where(finite_l, max(10.0 * prim, 1e-6) * (1.0 + np.abs(np.where(finite_l, p.l, 0.0))), 0.0)
    prox_u = np.where(finite_u, max(10.0 * prim, 1e-6) * (1.0 + np.abs(np.where(finite_u, p.u, 0.0))), 0.0)
    lower = (y < -y_cut) & finite_l & (np.abs(az - np.where(finite_l, p.l, 0.0)) <= prox_l)
    upper = (y > y_cut) & finite_u & (np.abs(np.where(finite_u, p.u, 0.0) - az) <= prox_u)
    act = lower | upper
    idx = np.flatnonzero(act)
    A_act = p.A[idx, :]
    rhs_act = np.where(lower[idx], p.l[idx], p.u[idx])
    na = idx.shape[0]

    K = sp.vstack(
        [
            sp.hstack([sp.diags(p.P + _POLISH_DELTA), A_act.T]),
            sp.hstack([A_act, -_POLISH_DELTA * sp.eye(na)]),
        ],
        format="csc",
    )
    try:
        factor = spla.splu(K)
    except RuntimeError:
        return None
    sol = np.zeros(n + na)
    best_sol = None
    best_norm = np.inf
    # Refine against the unregularized system so delta does not bias the
    # result; an inconsistent active set makes refinement diverge, so keep
    # the best iterate instead of the last.
    for _ in range(_POLISH_REFINE + 1):
        xs, ys = sol[:n], sol[n:]
        res_top = -p.q - p.P * xs - (A_act.T @ ys if na else 0.0)
        res_bot = rhs_act - (A_act @ xs) if na else np.zeros(0)
        res = np.concatenate([res_top, res_bot])
        rnorm = float(np.max(np.abs(res))) if res.size else 0.0
        if rnorm < best_norm:
            best_norm = rnorm
            best_sol = sol.copy()
        elif best_sol is not None:
            break
        step = factor.solve(res)
        if not np.all(np.isfinite(step)):
            break
        sol = sol + step
    if best_sol is None:
        return None
    sol = best_sol
    z_pol = sol[:n]
    y_pol = np.zeros(p.num_constraints)
    y_pol[idx] = sol[n:]
    return z_pol, y_pol


def solve(
    p: ConvexSubproblem,
    cfg: SolverConfig | None = None,
    x0: np.ndarray | None = None,
    y0: np.ndarray | None = None,
) -> Solution:
    """Solve a convex subproblem.

    Parameters
    ----------
    p : ConvexSubproblem
        Problem data; must satisfy the type invariants.
    cfg : SolverConfig, optional
        Solver settings; defaults apply when omitted.
    x0, y0 : ndarray, optional
        Initial primal / dual hints (e.g. the previous solution of a
        closely related problem).

    Returns
    -------
    Solution
        With status SOLVED both residuals meet their thresholds;
        MAX_ITER returns the best iterate found; INFEASIBLE indicates a
        primal infeasibility certificate was detected.
    """
    if cfg is None:
        cfg = SolverConfig()
    n, k = p.num_vars, p.num_constraints

    d, e = _equilibrate(p.A, cfg.scaling_passes)
    A_s = sp.diags(e) @ p.A @ sp.diags(d) if k > 0 else p.A
    # Cost normalization keeps the dual step sizes comparable across
    # problems whose objective scale varies by orders of magnitude.
    q_d = p.q * d
    cost = 1.0 / min(max(float(np.max(np.abs(q_d))) if n else 1.0, 1e-6), 1e6)
    P_s = cost * p.P * d * d
    q_s = cost * q_d
    l_s = p.l * e if k > 0 else p.l
    u_s = p.u * e if k > 0 else p.u

    rho = _row_steps(cfg.rho, l_s, u_s)
    rho_inv = 1.0 / rho

    kkt = sp.vstack(
        [
            sp.hstack([sp.diags(P_s + cfg.sigma), A_s.T]),
            sp.hstack([A_s, -sp.diags(rho_inv)]),
        ],
        format="csc",
    )
    factor = spla.splu(kkt)

    if x0 is not None:
        x0 = np.asarray(x0, dtype=float)
        if x0.shape[0] != n:
            raise DimensionMismatch("len(x0) vs problem size", n, x0.shape[0])
        x = x0 / d
    else:
        x = np.zeros(n)
    if y0 is not None:
        y0 = np.asarray(y0, dtype=float)
        if y0.shape[0] != k:
            raise DimensionMismatch("len(y0) vs constraint count", k, y0.shape[0])
        y = cost * y0 / e
    else:
        y = np.zeros(k)
    z = np.clip(A_s @ x, l_s, u_s) if k > 0 else np.zeros(0)

    alpha = cfg.relaxation
    sigma = cfg.sigma
    y_at_last_check = y.copy()
    best = None  # (maxres, z_u, y_u, prim, dual)
    last_polish_score = np.inf
    last_polish_iter = -_POLISH_RETRY_GAP
    score_history: list[tuple[int, float]] = []
    iters_done = 0

    def unscaled(xv, yv):
        return xv * d, yv * e / cost

    def consider(z_u, y_u, prim, dual):
        nonlocal best
        score = max(prim, dual)
        if best is None or score < best[0]:
            best = (score, z_u, y_u, prim, dual)

    for it in range(1, cfg.max_iters + 1):
        rhs = np.concatenate([sigma * x - q_s, z - rho_inv * y])
        sol = factor.solve(rhs)
        x_t = sol[:n]
        z_t = z + rho_inv * (sol[n:] - y) if k > 0 else np.zeros(0)
        x = alpha * x_t + (1.0 - alpha) * x
        if k > 0:
            z_relaxed = alpha * z_t + (1.0 - alpha) * z
            z_new = np.clip(z_relaxed + rho_inv * y, l_s, u_s)
            y = y + rho * (z_relaxed - z_new)
            z = z_new
        iters_done = it

        if it % cfg.check_interval == 0 or it == cfg.max_iters:
            x_u, y_u = unscaled(x, y)
            prim, dual = _residuals(p, x_u, y_u)
            consider(x_u, y_u, prim, dual)

            if prim <= cfg.eps_prim and dual <= cfg.eps_dual:
                if cfg.polish:
                    cand = _polish(p, x_u, y_u)
                    if cand is not None:
                        prim_p, dual_p = _residuals(p, *cand)
                        if prim_p <= prim and dual_p <= dual:
                            return Solution(cand[0], cand[1], SolveStatus.SOLVED, prim_p, dual_p, it)
                return Solution(x_u, y_u, SolveStatus.SOLVED, prim, dual, it)

            # Near-convergence polish: tries a direct active-set solve once the
            # iterates are settled, which certifies long before ADMM alone would.
            if cfg.polish and k > 0:
                den_p = 1.0 + (float(np.max(np.abs(p.A @ x_u))) if k else 0.0)
                den_d = 1.0 + max(
                    float(np.max(np.abs(p.P * x_u))) if n else 0.0,
                    float(np.max(np.abs(p.A.T @ y_u))) if k else 0.0,
                    float(np.max(np.abs(p.q))) if n else 0.0,
                )
                rel = max(prim / den_p, dual / den_d)
                # Retry on clear progress or, failing that, periodically:
                # degenerate problems can stall while the active set still
                # drifts toward one that polishes cleanly.
                due = (
                    rel < 0.5 * last_polish_score
                    or it - last_polish_iter >= _POLISH_RETRY_GAP
                )
                if rel <= _POLISH_TRIGGER and due:
                    last_polish_score = min(rel, last_polish_score)
                    last_polish_iter = it
                    cand = _polish(p, x_u, y_u)
                    if cand is not None:
                        prim_p, dual_p = _residuals(p, *cand)
                        consider(cand[0], cand[1], prim_p, dual_p)
                        if prim_p <= cfg.eps_prim and dual_p <= cfg.eps_dual:
                            return Solution(
                                cand[0], cand[1], SolveStatus.SOLVED, prim_p, dual_p, it
                            )

            if k > 0:
                delta_y = (y - y_at_last_check) * e
                y_at_last_check = y.copy()
                if _primal_infeasible(p, delta_y, cfg.infeas_tol):
                    return Solution(x_u, y_u, SolveStatus.INFEASIBLE, prim, dual, it)

            score_history.append((it, best[0]))
            while it - score_history[0][0] > _STALL_SPAN:
                score_history.pop(0)
            if (
                it >= _STALL_MIN_ITERS
                and best[0] <= _STALL_SCORE_CEIL
                and it - score_history[0][0] >= _STALL_SPAN
                and best[0] > _STALL_FACTOR * score_history[0][1]
            ):
                break

    score, z_u, y_u, prim, dual = best
    return Solution(z_u, y_u, SolveStatus.MAX_ITER, prim, dual, iters_done)


def _primal_infeasible(p: ConvexSubproblem, delta_y: np.ndarray, tol: float) -> bool:
    """Divergence certificate: a dual ray proving no feasible point exists."""
    norm = float(np.max(np.abs(delta_y))) if delta_y.size else 0.0
    if norm <= tol:
        return False
    v = delta_y / norm
    pos = np.maximum(v, 0.0)
    neg = np.minimum(v, 0.0)
    # A ray pushing on an infinite bound cannot certify anything.
    if np.any(pos[np.isposinf(p.u)] > tol) or np.any(neg[np.isneginf(p.l)] < -tol):
        return False
    finite_u = np.isfinite(p.u)
    finite_l = np.isfinite(p.l)
    support = float(np.dot(p.u[finite_u], pos[finite_u]) + np.dot(p.l[finite_l], neg[finite_l]))
    if support >= -tol:
        return False
    return float(np.max(np.abs(p.A.T @ v))) < tol


def dump_subproblem(p: ConvexSubproblem, path) -> None:
    """Write a subproblem to a text file for external cross-checking.

    Format (all floats at 17 significant digits, infinities as inf/-inf):

        ldep-qp/1
        dims <num_vars> <num_constraints>
        P <num_vars floats>
        q <num_vars floats>
        l <num_constraints floats>
        u <num_constraints floats>
        A <nnz>
        <row> <col> <value>          one line per stored entry, row-major
    """
    coo = p.A.tocoo()
    order = np.lexsort((coo.col, coo.row))

    def fmt(values):
        return " ".join(f"{v:.17g}" for v in values)

    lines = [
        "ldep-qp/1",
        f"dims {p.num_vars} {p.num_constraints}",
        f"P {fmt(p.P)}",
        f"q {fmt(p.q)}",
        f"l {fmt(p.l)}",
        f"u {fmt(p.u)}",
        f"A {coo.nnz}",
    ]
    lines.extend(
        f"{coo.row[i]} {coo.col[i]} {coo.data[i]:.17g}" for i in order
    )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
