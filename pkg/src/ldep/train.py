"""Penalty convex-concave training of the two-sided classifier.

Each iteration keeps the convex ingredients of the margin constraints,
replaces the subtracted maximum by the affine piece that is active at
the current iterate (an exact minorant, so the convexified constraints
are a restriction of the true ones), and solves the resulting QP/LP
with per-sample slacks whose penalty weight grows geometrically.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, LdepError, SingleClassError
from .model import LDepModel, _as_vector
from .problem import CcpSchedule, Dataset, TrainConfig, model_objective, objective
from .qp import ConvexSubproblem, Solution, SolveStatus, solve

__all__ = [
    "Side",
    "TrainStatus",
    "IterationRecord",
    "CcpIterate",
    "TrainReport",
    "SubproblemLayout",
    "initialize",
    "linearize_concave",
    "build_subproblem",
    "train",
    "train_best",
]


# A subproblem iterate is usable when its KKT residuals are at most this,
# even if the solver could not certify the target tolerance: the procedure
# only needs the next linearization point, and exact feasibility is
# restored separately.
_USABLE_RESIDUAL = 5e-3


class Side(enum.Enum):
    """Which maximum of the decision function to linearize."""

    DILATION = "dilation"
    EROSION = "erosion"


class TrainStatus(enum.Enum):
    CONVERGED = "Converged"
    MAX_ITERS = "MaxItersReached"
    SOLVER_FAILURE = "SolverFailure"


@dataclass(frozen=True)
class IterationRecord:
    """Scalars recorded after one completed outer iteration."""

    iteration: int
    objective: float
    slack_sum: float
    tau: float
    solver_status: str
    solver_iterations: int


@dataclass(frozen=True)
class CcpIterate:
    """Rich per-iteration state passed to a training callback."""

    model: LDepModel
    xi: np.ndarray
    slack: np.ndarray
    record: IterationRecord


@dataclass(frozen=True)
class TrainReport:
    """Trace of a training run."""

    records: tuple[IterationRecord, ...]
    status: TrainStatus
    objective: float
    wall_time_s: float
    seed: int
    retried: bool = False

    @property
    def iterations(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class SubproblemLayout:
    """Offsets of the stacked decision vector of one convex subproblem.

    Order: vec(W) row-major, a, vec(M) row-major, b, xi, h (hinge
    epigraph), p_W and p_M (L1 epigraphs), s (constraint slacks).
    """

    n: int
    n1: int
    n2: int
    m: int

    @property
    def w0(self) -> int:
        return 0

    @property
    def a0(self) -> int:
        return self.n1 * self.n

    @property
    def m0(self) -> int:
        return self.a0 + self.n1

    @property
    def b0(self) -> int:
        return self.m0 + self.n2 * self.n

    @property
    def xi0(self) -> int:
        return self.b0 + self.n2

    @property
    def h0(self) -> int:
        return self.xi0 + self.m

    @property
    def pw0(self) -> int:
        return self.h0 + self.m

    @property
    def pm0(self) -> int:
        return self.pw0 + self.n1 * self.n

    @property
    def s0(self) -> int:
        return self.pm0 + self.n2 * self.n

    @property
    def size(self) -> int:
        return self.s0 + self.m

    def split(self, z: np.ndarray):
        """Unpack a solution vector into (W, a, M, b, xi, h, p_W, p_M, s)."""
        n, n1, n2 = self.n, self.n1, self.n2
        W = z[self.w0 : self.w0 + n1 * n].reshape(n1, n)
        a = z[self.a0 : self.a0 + n1]
        M = z[self.m0 : self.m0 + n2 * n].reshape(n2, n)
        b = z[self.b0 : self.b0 + n2]
        xi = z[self.xi0 : self.xi0 + self.m]
        h = z[self.h0 : self.h0 + self.m]
        pw = z[self.pw0 : self.pw0 + n1 * n].reshape(n1, n)
        pm = z[self.pm0 : self.pm0 + n2 * n].reshape(n2, n)
        s = z[self.s0 : self.s0 + self.m]
        return W, a, M, b, xi, h, pw, pm, s

    def pack(self, W, a, M, b, xi, h, pw, pm, s) -> np.ndarray:
        z = np.concatenate(
            [
                np.asarray(W, dtype=float).ravel(),
                np.asarray(a, dtype=float).ravel(),
                np.asarray(M, dtype=float).ravel(),
                np.asarray(b, dtype=float).ravel(),
                np.asarray(xi, dtype=float).ravel(),
                np.asarray(h, dtype=float).ravel(),
                np.asarray(pw, dtype=float).ravel(),
                np.asarray(pm, dtype=float).ravel(),
                np.asarray(s, dtype=float).ravel(),
            ]
        )
        if z.shape[0] != self.size:
            raise DimensionMismatch("packed vector length", self.size, z.shape[0])
        return z


def initialize(cfg: TrainConfig, n: int, seed: int) -> LDepModel:
    """Random starting model: Gaussian weights with std 1/sqrt(n), zero biases."""
    if n < 1:
        raise LdepError(f"input dimension must be at least 1, got {n}")
    rng = np.random.default_rng(seed)
    std = 1.0 / np.sqrt(n)
    W = rng.normal(0.0, std, size=(cfg.n1, n))
    M = rng.normal(0.0, std, size=(cfg.n2, n))
    return LDepModel(W=W, a=np.zeros(cfg.n1), M=M, b=np.zeros(cfg.n2))


def linearize_concave(m: LDepModel, x, side: Side) -> tuple[int, float]:
    """Active affine piece of one side's maximum at ``x``.

    Returns the 0-based row index achieving the maximum (ties broken by
    the smallest index) together with the maximum value.  The affine
    function built from that row under-estimates the side's maximum for
    every candidate parameter value at this fixed ``x``, which is what
    makes the convexified constraints a sound restriction.
    """
    xv = _as_vector(x, "x")
    if xv.shape[0] != m.n:
        raise DimensionMismatch("len(x) vs model dimension", m.n, xv.shape[0])
    if side is Side.DILATION:
        vals = m.W @ xv + m.a
    elif side is Side.EROSION:
        vals = m.M @ xv + m.b
    else:
        raise LdepError(f"unknown side {side!r}")
    idx = int(np.argmax(vals))
    return idx, float(vals[idx])


def build_subproblem(
    data: Dataset, m_k: LDepModel, tau_k: float, cfg: TrainConfig
) -> ConvexSubproblem:
    """Convex QP obtained by linearizing the margin constraints at ``m_k``.

    Decision vector per :class:`SubproblemLayout`.  Constraint rows, in
    order: hinge epigraph (xi_k - h_k <= 0), hinge nonnegativity
    (h_k >= 0), L1 boxes for W then M (entry - p <= 0 followed by
    entry + p >= 0), the per-sample margin rows, and the slack signs
    (s_k >= 0).
    """
    if not tau_k > 0:
        raise LdepError(f"penalty weight must be positive, got {tau_k}")
    if m_k.n != data.n:
        raise DimensionMismatch("model dimension vs data columns", data.n, m_k.n)
    if m_k.n1 != cfg.n1 or m_k.n2 != cfg.n2:
        raise DimensionMismatch(
            "model row counts vs config", (cfg.n1, cfg.n2), (m_k.n1, m_k.n2)
        )
    n, n1, n2, m = data.n, cfg.n1, cfg.n2, data.m
    lay = SubproblemLayout(n=n, n1=n1, n2=n2, m=m)
    N = lay.size
    nW, nM = n1 * n, n2 * n

    P = np.zeros(N)
    P[lay.w0 : lay.w0 + nW] = 2.0 * cfg.lambda_w * (1.0 - cfg.alpha)
    P[lay.m0 : lay.m0 + nM] = 2.0 * cfg.lambda_m * (1.0 - cfg.alpha)

    q = np.zeros(N)
    q[lay.h0 : lay.h0 + m] = cfg.C / m
    q[lay.pw0 : lay.pw0 + nW] = cfg.lambda_w * cfg.alpha
    q[lay.pm0 : lay.pm0 + nM] = cfg.lambda_m * cfg.alpha
    q[lay.s0 : lay.s0 + m] = tau_k

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []
    lbs: list[np.ndarray] = []
    ubs: list[np.ndarray] = []
    row_count = 0

    def add_rows(r, c, v, lo, up, count):
        nonlocal row_count
        rows.append(np.asarray(r, dtype=np.int64) + row_count)
        cols.append(np.asarray(c, dtype=np.int64))
        vals.append(np.asarray(v, dtype=float))
        lbs.append(np.asarray(lo, dtype=float))
        ubs.append(np.asarray(up, dtype=float))
        row_count += count

    ks = np.arange(m)
    ones_m = np.ones(m)
    inf_m = np.full(m, np.inf)

    # xi_k - h_k <= 0
    add_rows(
        np.concatenate([ks, ks]),
        np.concatenate([lay.xi0 + ks, lay.h0 + ks]),
        np.concatenate([ones_m, -ones_m]),
        -inf_m,
        np.zeros(m),
        m,
    )
    # h_k >= 0
    add_rows(ks, lay.h0 + ks, ones_m, np.zeros(m), inf_m, m)

    def add_l1_box(offset_w, offset_p, count):
        e = np.arange(count)
        one = np.ones(count)
        inf = np.full(count, np.inf)
        # entry - p <= 0
        add_rows(
            np.concatenate([e, e]),
            np.concatenate([offset_w + e, offset_p + e]),
            np.concatenate([one, -one]),
            -inf,
            np.zeros(count),
            count,
        )
        # entry + p >= 0
        add_rows(
            np.concatenate([e, e]),
            np.concatenate([offset_w + e, offset_p + e]),
            np.concatenate([one, one]),
            np.zeros(count),
            inf,
            count,
        )

    add_l1_box(lay.w0, lay.pw0, nW)
    add_l1_box(lay.m0, lay.pm0, nM)

    feat = np.arange(n)
    for k in range(m):
        x = data.X[k]
        if data.y[k] < 0:
            j_star, _ = linearize_concave(m_k, x, Side.EROSION)
            # per-row entries: x on the row's W block, 1 on a_i, -x on the
            # active M row, -1 on its bias, -1 on xi_k and s_k
            i = np.arange(n1)
            count = n1
            per_row_cols = np.concatenate(
                [
                    (lay.w0 + i[:, None] * n + feat).ravel(),
                    lay.a0 + i,
                    np.tile(lay.m0 + j_star * n + feat, count),
                    np.full(count, lay.b0 + j_star),
                    np.full(count, lay.xi0 + k),
                    np.full(count, lay.s0 + k),
                ]
            )
            per_row_rows = np.concatenate(
                [
                    np.repeat(i, n),
                    i,
                    np.repeat(i, n),
                    i,
                    i,
                    i,
                ]
            )
            per_row_vals = np.concatenate(
                [
                    np.tile(x, count),
                    np.ones(count),
                    np.tile(-x, count),
                    -np.ones(count),
                    -np.ones(count),
                    -np.ones(count),
                ]
            )
        else:
            i_star, _ = linearize_concave(m_k, x, Side.DILATION)
            j = np.arange(n2)
            count = n2
            per_row_cols = np.concatenate(
                [
                    (lay.m0 + j[:, None] * n + feat).ravel(),
                    lay.b0 + j,
                    np.tile(lay.w0 + i_star * n + feat, count),
                    np.full(count, lay.a0 + i_star),
                    np.full(count, lay.xi0 + k),
                    np.full(count, lay.s0 + k),
                ]
            )
            per_row_rows = np.concatenate(
                [np.repeat(j, n), j, np.repeat(j, n), j, j, j]
            )
            per_row_vals = np.concatenate(
                [
                    np.tile(x, count),
                    np.ones(count),
                    np.tile(-x, count),
                    -np.ones(count),
                    -np.ones(count),
                    -np.ones(count),
                ]
            )
        add_rows(
            per_row_rows,
            per_row_cols,
            per_row_vals,
            np.full(count, -np.inf),
            np.full(count, -1.0),
            count,
        )

    # s_k >= 0
    add_rows(ks, lay.s0 + ks, ones_m, np.zeros(m), inf_m, m)

    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(row_count, N),
    ).tocsc()
    return ConvexSubproblem(
        P=P, q=q, A=A, l=np.concatenate(lbs), u=np.concatenate(ubs)
    )


def _restore_feasible(
    lay: SubproblemLayout, data: Dataset, m_k: LDepModel, z: np.ndarray
) -> np.ndarray:
    """Exactly feasible copy of a near-feasible subproblem iterate.

    The constraint structure makes feasibility restorable in closed form
    without touching the model block: clip s and the L1 epigraphs, absorb
    any remaining margin gap into xi, then lift h over max(xi, 0).  Each
    step only relaxes the rows the adjusted variable appears in.
    """
    z = np.array(z, dtype=float)
    W, a, M, b, xi, h, pw, pm, s = lay.split(z)
    np.maximum(s, 0.0, out=s)
    np.maximum(pw, np.abs(W), out=pw)
    np.maximum(pm, np.abs(M), out=pm)
    # Active rows were fixed when the subproblem was built, from m_k.
    j_star = np.argmax(data.X @ m_k.M.T + m_k.b, axis=1)
    i_star = np.argmax(data.X @ m_k.W.T + m_k.a, axis=1)
    F = data.X @ W.T + a
    G = data.X @ M.T + b
    rows = np.arange(data.m)
    need = np.where(
        data.y < 0,
        F.max(axis=1) + 1.0 - G[rows, j_star] - s,
        G.max(axis=1) + 1.0 - F[rows, i_star] - s,
    )
    np.maximum(xi, need, out=xi)
    np.maximum(h, np.maximum(xi, 0.0), out=h)
    return z


def _run_ccp(data: Dataset, cfg: TrainConfig, model0: LDepModel, callback):
    """One CCP run; returns (model, records, status, failed_solution)."""
    sched = cfg.ccp
    lay = SubproblemLayout(n=data.n, n1=cfg.n1, n2=cfg.n2, m=data.m)
    model = model0
    tau = sched.tau0
    records: list[IterationRecord] = []
    prev_obj = None

    for k in range(sched.max_iters):
        sub = build_subproblem(data, model, tau, cfg)
        # Each subproblem is solved from scratch: the previous iterate sits
        # near the optimum of a *different* linearization, and reusing it
        # anchors the operator-splitting solver in a transient that decays
        # far more slowly than a fresh solve converges.
        sol = solve(sub, cfg.solver)
        usable = sol.status is SolveStatus.SOLVED or (
            sol.status is SolveStatus.MAX_ITER
            and max(sol.primal_residual, sol.dual_residual) <= _USABLE_RESIDUAL
        )
        if not usable:
            return model, records, TrainStatus.SOLVER_FAILURE, sol
        z = _restore_feasible(lay, data, model, sol.z)
        W, a, M, b, xi, _h, _pw, _pm, s = lay.split(z)
        new_model = LDepModel(W=W, a=a, M=M, b=b)
        obj = objective(new_model, xi, cfg, data.m)
        slack = float(np.sum(np.clip(s, 0.0, None)))
        rec = IterationRecord(
            iteration=k,
            objective=obj,
            slack_sum=slack,
            tau=tau,
            solver_status=sol.status.value,
            solver_iterations=sol.iterations,
        )
        records.append(rec)
        if callback is not None:
            callback(CcpIterate(model=new_model, xi=np.array(xi), slack=np.array(s), record=rec))
        converged = (
            prev_obj is not None
            and abs(obj - prev_obj) <= sched.tol_obj * max(1.0, abs(prev_obj))
            and slack < sched.tol_slack
        )
        model = new_model
        prev_obj = obj
        if converged:
            return model, records, TrainStatus.CONVERGED, None
        tau = min(sched.mu * tau, sched.tau_max)

    return model, records, TrainStatus.MAX_ITERS, None


def train(
    data: Dataset, cfg: TrainConfig, callback=None
) -> tuple[LDepModel, TrainReport]:
    """Train a model on a two-class dataset.

    Runs the penalty procedure from a seeded random start; a failed
    subproblem solve triggers one retry from a fresh start (seed + 1)
    before giving up with status ``SOLVER_FAILURE``.

    Parameters
    ----------
    data : Dataset
        Must contain at least one sample of each class.
    cfg : TrainConfig
        Problem and procedure settings.
    callback : callable, optional
        Called with a :class:`CcpIterate` after each outer iteration.

    Returns
    -------
    (LDepModel, TrainReport)
        The final model and the run's trace.  ``report.objective`` is
        the training objective of the returned model with its tightest
        feasible slacks.
    """
    if not (np.any(data.y > 0) and np.any(data.y < 0)):
        raise SingleClassError("training data must contain both classes")
    start = time.perf_counter()
    retried = False
    seed = cfg.seed

    model0 = initialize(cfg, data.n, seed)
    model, records, status, _fail = _run_ccp(data, cfg, model0, callback)
    if status is TrainStatus.SOLVER_FAILURE:
        retried = True
        seed = cfg.seed + 1
        model0 = initialize(cfg, data.n, seed)
        model, records, status, _fail = _run_ccp(data, cfg, model0, callback)

    wall = time.perf_counter() - start
    report = TrainReport(
        records=tuple(records),
        status=status,
        objective=model_objective(model, data, cfg),
        wall_time_s=wall,
        seed=seed,
        retried=retried,
    )
    return model, report


def train_best(
    data: Dataset, cfg: TrainConfig, restarts: int = 1, callback=None
) -> tuple[LDepModel, TrainReport]:
    """Multi-start training: best of ``restarts`` runs with seeds
    cfg.seed, cfg.seed + 1, ...

    The winner is the run whose final model attains the lowest training
    objective (slacks at their tightest feasible values).
    """
    if restarts < 1:
        raise LdepError(f"restarts must be at least 1, got {restarts}")
    best: tuple[LDepModel, TrainReport] | None = None
    for i in range(restarts):
        run_cfg = replace(cfg, seed=cfg.seed + i)
        model, report = train(data, run_cfg, callback=callback)
        if best is None or report.objective < best[1].objective:
            best = (model, report)
    return best
