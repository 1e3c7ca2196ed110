"""Training problem for the two-sided piecewise-linear classifier.

Objective terms, regularizers and the exact difference-of-convex
constraint residuals, kept independent of any particular solution
method.  The problem minimizes

    (C/m) * sum_k max(xi_k, 0)  +  r_W  +  r_M

over (W, a, M, b, xi), where r_W and r_M are elastic-net penalties, and
each training sample contributes one unit-margin constraint: negative
samples require the positive-side maximum plus one to stay below the
negative-side maximum plus the sample's slack, and positive samples the
mirrored inequality.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, LdepError
from .model import LDepModel, affine_max, _as_vector
from .qp import SolverConfig

__all__ = [
    "CcpSchedule",
    "TrainConfig",
    "Dataset",
    "hinge_sum",
    "elastic_net",
    "dc_residual",
    "objective",
    "residuals_at_zero_slack",
    "model_objective",
]


@dataclass(frozen=True)
class CcpSchedule:
    """Penalty schedule and stopping rules of the convex-concave procedure.

    Attributes
    ----------
    tau0 : float
        Initial weight on the per-sample constraint slacks.
    mu : float
        Multiplicative growth factor applied to the penalty each iteration.
    tau_max : float
        Cap on the penalty weight.
    max_iters : int
        Maximum number of convex subproblems solved.
    tol_obj : float
        Relative objective-change threshold of the stopping test.
    tol_slack : float
        Maximum total constraint slack allowed at convergence.
    """

    tau0: float = 0.005
    mu: float = 1.2
    tau_max: float = 1e8
    max_iters: int = 100
    tol_obj: float = 1e-5
    tol_slack: float = 1e-4

    def __post_init__(self):
        if not self.tau0 > 0:
            raise LdepError(f"tau0 must be positive, got {self.tau0}")
        if not self.mu > 1:
            raise LdepError(f"mu must exceed 1, got {self.mu}")
        if not self.tau_max >= self.tau0:
            raise LdepError("tau_max must be at least tau0")
        if self.max_iters < 1:
            raise LdepError("max_iters must be at least 1")
        if not (self.tol_obj > 0 and self.tol_slack > 0):
            raise LdepError("tolerances must be positive")


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of the training problem plus procedure settings.

    ``C`` weights the average hinge loss, ``alpha`` mixes the elastic-net
    penalty between entrywise L1 (alpha=1) and squared Frobenius
    (alpha=0), and ``lambda_w`` / ``lambda_m`` scale the penalties of the
    two weight matrices.  ``n1`` and ``n2`` fix the number of affine
    pieces on each side of the model.
    """

    C: float = 1.0
    alpha: float = 1.0
    lambda_w: float = 5e-4
    lambda_m: float = 5e-4
    n1: int = 4
    n2: int = 3
    ccp: CcpSchedule = field(default_factory=CcpSchedule)
    solver: SolverConfig = field(default_factory=SolverConfig)
    seed: int = 0

    def __post_init__(self):
        if not self.C > 0:
            raise LdepError(f"C must be positive, got {self.C}")
        if not 0.0 <= self.alpha <= 1.0:
            raise LdepError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.lambda_w < 0 or self.lambda_m < 0:
            raise LdepError("regularization weights must be nonnegative")
        if self.n1 < 1 or self.n2 < 1:
            raise LdepError("n1 and n2 must be at least 1")
        if self.seed < 0:
            raise LdepError("seed must be nonnegative")


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with labels in {-1, +1}."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y)
        if y.ndim != 1:
            raise LdepError("y must be a 1-D vector of labels")
        if X.shape[0] != y.shape[0]:
            raise DimensionMismatch("rows of X vs len(y)", X.shape[0], y.shape[0])
        if X.shape[0] < 1:
            raise LdepError("dataset must contain at least one sample")
        if not np.all(np.isfinite(X)):
            raise LdepError("X contains non-finite entries")
        yi = y.astype(np.int64)
        if not np.array_equal(yi, np.asarray(y, dtype=float)) or not np.all(np.abs(yi) == 1):
            raise LdepError("labels must be exactly -1 or +1")
        Xf = np.array(X, dtype=float)
        Xf.flags.writeable = False
        yi.flags.writeable = False
        object.__setattr__(self, "X", Xf)
        object.__setattr__(self, "y", yi)

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]


def hinge_sum(xi) -> float:
    """Sum of ``max(xi_k, 0)`` over the slack vector."""
    v = np.asarray(xi, dtype=float)
    if v.size == 0:
        return 0.0
    return float(np.sum(np.maximum(v, 0.0)))


def elastic_net(A, lam: float, alpha: float) -> float:
    """Elastic-net penalty ``lam * ((1-alpha) * ||A||_F^2 + alpha * ||A||_1)``.

    The L1 part is the entrywise 1-norm, i.e. the sum of the row-wise
    1-norms.
    """
    if not 0.0 <= alpha <= 1.0:
        raise LdepError(f"alpha must lie in [0, 1], got {alpha}")
    if lam < 0:
        raise LdepError(f"lambda must be nonnegative, got {lam}")
    M = np.asarray(A, dtype=float)
    return float(lam * ((1.0 - alpha) * np.sum(M * M) + alpha * np.sum(np.abs(M))))


def dc_residual(m: LDepModel, x, label: int, xi: float) -> float:
    """Signed violation of a sample's unit-margin constraint.

    For ``label == -1`` returns ``f(x) + 1 - g(x) - xi`` and for
    ``label == +1`` returns ``g(x) + 1 - f(x) - xi``, where ``f`` and
    ``g`` are the positive-side and negative-side maxima.  The constraint
    is satisfied exactly when the residual is <= 0.
    """
    if label not in (-1, 1):
        raise LdepError(f"label must be -1 or +1, got {label}")
    xv = _as_vector(x, "x")
    if xv.shape[0] != m.n:
        raise DimensionMismatch("len(x) vs model dimension", m.n, xv.shape[0])
    f = affine_max(m.W, m.a, xv)
    g = affine_max(m.M, m.b, xv)
    if label == -1:
        return f + 1.0 - g - float(xi)
    return g + 1.0 - f - float(xi)


def objective(m: LDepModel, xi, cfg: TrainConfig, m_count: int) -> float:
    """Full training objective for a given slack vector."""
    v = np.asarray(xi, dtype=float)
    if v.shape[0] != m_count:
        raise DimensionMismatch("len(xi) vs dataset size", m_count, v.shape[0])
    loss = (cfg.C / m_count) * hinge_sum(v)
    return loss + elastic_net(m.W, cfg.lambda_w, cfg.alpha) + elastic_net(m.M, cfg.lambda_m, cfg.alpha)


def residuals_at_zero_slack(m: LDepModel, data: Dataset) -> np.ndarray:
    """Per-sample constraint residuals with all slacks at zero."""
    from .model import decision_values

    tau = decision_values(m, data.X)
    # label -1: f + 1 - g = tau + 1; label +1: g + 1 - f = 1 - tau
    return np.where(data.y < 0, tau + 1.0, 1.0 - tau)


def model_objective(m: LDepModel, data: Dataset, cfg: TrainConfig) -> float:
    """Training objective of a model with its tightest feasible slacks.

    Eliminates the slack variables: each sample's slack is set to the
    smallest value satisfying its margin constraint, so the hinge term
    becomes ``sum_k max(0, residual_k)``.  This makes objectives of
    different models directly comparable.
    """
    r = residuals_at_zero_slack(m, data)
    loss = (cfg.C / data.m) * float(np.sum(np.maximum(r, 0.0)))
    return loss + elastic_net(m.W, cfg.lambda_w, cfg.alpha) + elastic_net(m.M, cfg.lambda_m, cfg.alpha)
