"""Dilation-erosion perceptron models and their decision functions.

The classifiers here are piecewise-linear: the score of a sample is the
difference of two maxima of affine functions (a max-plus "dilation" side
minus a side that plays the role of a min-plus "erosion" after the sign
conventions are absorbed into the weights).  All evaluation is pure and
operates on immutable float64 arrays, so models can be shared freely
across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, LdepError

__all__ = [
    "DepModel",
    "LDepModel",
    "dilation",
    "erosion",
    "affine_max",
    "dep_decision",
    "decision_function",
    "predict",
]


def _as_vector(x, name: str) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise LdepError(f"{name} must be a 1-D vector, got shape {v.shape}")
    return v


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class LDepModel:
    """Piecewise-linear two-sided classifier.

    Parameters
    ----------
    W : ndarray, shape (n1, n)
        Weights of the maxout side that votes for the positive class.
    a : ndarray, shape (n1,)
        Biases paired with the rows of ``W``.
    M : ndarray, shape (n2, n)
        Weights of the side that votes for the negative class.
    b : ndarray, shape (n2,)
        Biases paired with the rows of ``M``.

    The decision score of a sample ``x`` is
    ``max_i(W[i] @ x + a[i]) - max_j(M[j] @ x + b[j])``.
    """

    W: np.ndarray
    a: np.ndarray
    M: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.W, dtype=float))
        M = np.atleast_2d(np.asarray(self.M, dtype=float))
        a = _as_vector(self.a, "a")
        b = _as_vector(self.b, "b")
        if W.ndim != 2 or M.ndim != 2:
            raise LdepError("W and M must be 2-D matrices")
        if W.shape[0] < 1 or M.shape[0] < 1:
            raise LdepError("W and M must each have at least one row")
        if W.shape[1] != M.shape[1]:
            raise DimensionMismatch("W/M column counts", W.shape[1], M.shape[1])
        if a.shape[0] != W.shape[0]:
            raise DimensionMismatch("len(a) vs rows of W", W.shape[0], a.shape[0])
        if b.shape[0] != M.shape[0]:
            raise DimensionMismatch("len(b) vs rows of M", M.shape[0], b.shape[0])
        for name, arr in (("W", W), ("a", a), ("M", M), ("b", b)):
            if not np.all(np.isfinite(arr)):
                raise LdepError(f"{name} contains non-finite entries")
        object.__setattr__(self, "W", _frozen(W))
        object.__setattr__(self, "a", _frozen(a))
        object.__setattr__(self, "M", _frozen(M))
        object.__setattr__(self, "b", _frozen(b))

    @property
    def n(self) -> int:
        """Input dimension."""
        return self.W.shape[1]

    @property
    def n1(self) -> int:
        """Number of affine pieces on the positive side."""
        return self.W.shape[0]

    @property
    def n2(self) -> int:
        """Number of affine pieces on the negative side."""
        return self.M.shape[0]


@dataclass(frozen=True)
class DepModel:
    """Classic dilation-erosion perceptron over raw features.

    Evaluation convenience only; training always targets :class:`LDepModel`,
    which absorbs the mixing weight ``beta`` into its matrices.
    """

    a: np.ndarray
    b: np.ndarray
    beta: float

    def __post_init__(self):
        a = _as_vector(self.a, "a")
        b = _as_vector(self.b, "b")
        if a.shape[0] != b.shape[0]:
            raise DimensionMismatch("len(a) vs len(b)", a.shape[0], b.shape[0])
        if a.shape[0] == 0:
            raise LdepError("structuring elements must be nonempty")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise LdepError("structuring elements contain non-finite entries")
        if not 0.0 <= float(self.beta) <= 1.0:
            raise LdepError(f"beta must lie in [0, 1], got {self.beta}")
        object.__setattr__(self, "a", _frozen(a))
        object.__setattr__(self, "b", _frozen(b))
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def n(self) -> int:
        return self.a.shape[0]


def _check_pair(x, w, xname: str, wname: str) -> tuple[np.ndarray, np.ndarray]:
    xv = _as_vector(x, xname)
    wv = _as_vector(w, wname)
    if xv.shape[0] == 0 or wv.shape[0] == 0:
        raise LdepError(f"{xname} and {wname} must be nonempty")
    if xv.shape[0] != wv.shape[0]:
        raise DimensionMismatch(f"len({xname}) vs len({wname})", xv.shape[0], wv.shape[0])
    return xv, wv


def dilation(x, a) -> float:
    """Max-plus dilation ``max_j(x[j] + a[j])``."""
    xv, av = _check_pair(x, a, "x", "a")
    return float(np.max(xv + av))


def erosion(x, b) -> float:
    """Min-plus erosion ``min_j(x[j] + b[j])``, the dual of :func:`dilation`."""
    xv, bv = _check_pair(x, b, "x", "b")
    return float(np.min(xv + bv))


def affine_max(A: np.ndarray, c: np.ndarray, x) -> float:
    """Value of ``max_i(A[i] @ x + c[i])`` at ``x``."""
    xv = _as_vector(x, "x")
    if xv.shape[0] != A.shape[1]:
        raise DimensionMismatch("len(x) vs matrix columns", A.shape[1], xv.shape[0])
    return float(np.max(A @ xv + c))


def dep_decision(m: DepModel, x) -> float:
    """Pre-sign score ``beta * dilation(x, a) + (1 - beta) * erosion(x, b)``."""
    xv = _as_vector(x, "x")
    if xv.shape[0] != m.n:
        raise DimensionMismatch("len(x) vs model dimension", m.n, xv.shape[0])
    return m.beta * dilation(xv, m.a) + (1.0 - m.beta) * erosion(xv, m.b)


def decision_function(m: LDepModel, x) -> float:
    """Score of ``x``: positive-side maximum minus negative-side maximum."""
    xv = _as_vector(x, "x")
    if xv.shape[0] != m.n:
        raise DimensionMismatch("len(x) vs model dimension", m.n, xv.shape[0])
    return affine_max(m.W, m.a, xv) - affine_max(m.M, m.b, xv)


def predict(m: LDepModel, x) -> int:
    """Predicted label in {-1, +1}.

    A score of exactly zero maps to +1, matching the ``>=`` convention used
    by the unit-margin training constraints.
    """
    return 1 if decision_function(m, x) >= 0.0 else -1


def decision_values(m: LDepModel, X: np.ndarray) -> np.ndarray:
    """Scores for every row of ``X`` (shape (m, n))."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != m.n:
        raise DimensionMismatch("columns of X vs model dimension", m.n, X.shape[1])
    pos = np.max(X @ m.W.T + m.a, axis=1)
    neg = np.max(X @ m.M.T + m.b, axis=1)
    return pos - neg


def predict_many(m: LDepModel, X: np.ndarray) -> np.ndarray:
    """Vectorized :func:`predict` over the rows of ``X``."""
    return np.where(decision_values(m, X) >= 0.0, 1, -1)
