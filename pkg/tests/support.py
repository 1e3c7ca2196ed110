"""Shared fixtures and oracle data used across the test modules."""

from __future__ import annotations

import numpy as np

from ldep import Dataset, LDepModel, TrainConfig, dc_residual
from ldep.train import Side, linearize_concave


def reference_model() -> LDepModel:
    """A fixed 2-D model whose scores below were evaluated by hand.

    Used as an oracle throughout: the decision values at the probe
    points in REFERENCE_SCORES were computed independently with pen and
    paper from these matrices.
    """
    return LDepModel(
        W=np.array(
            [
                [0.0, -4.456],
                [-6.828, 5.977],
                [7.438, 3.109],
                [0.0, 0.0],
            ]
        ),
        a=np.array([4.532, 0.148, -0.829, 1.854]),
        M=np.array(
            [
                [0.0, -4.456],
                [-19.349, 0.0],
                [0.0, 0.0],
            ]
        ),
        b=np.array([-5.532, 2.955, -1.285]),
    )


#: (point, expected decision value, absolute tolerance)
REFERENCE_SCORES = [
    ((0.0, 0.0), 1.577, 1e-9),
    ((-0.4, 0.3), -6.0223, 1e-3),
    ((0.0, 1.0), 3.17, 1e-9),
    ((-0.2, 0.3), -3.5181, 1e-9),
    ((-0.2, 1.2), 1.8612, 1e-9),
]


def toy_dataset() -> Dataset:
    """Two 1-D points, one per class, separable with margin well over 1."""
    return Dataset(X=np.array([[-1.0], [1.0]]), y=np.array([-1, 1]))


def toy_config(**overrides) -> TrainConfig:
    """Training settings under which the toy problem has a clean solution."""
    base = dict(n1=1, n2=1, C=10.0, alpha=1.0, lambda_w=1e-4, lambda_m=1e-4, seed=0)
    base.update(overrides)
    return TrainConfig(**base)


def soundness_max_residual(num_triples: int, seed: int) -> float:
    """Worst true-constraint residual over convexified-feasible points.

    For each triple, a random anchor model supplies the linearization
    index, a random candidate model plays the role of the subproblem's
    decision variables, and the candidate's slack is set so that the
    convexified margin constraint holds with equality minus a random
    nonnegative gap (the procedure's extra slack s stays at zero).  The
    convexified constraint must then imply the true one, so the returned
    maximum should not exceed numerical noise.
    """
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(num_triples):
        n = int(rng.integers(1, 5))
        n1 = int(rng.integers(1, 5))
        n2 = int(rng.integers(1, 5))
        anchor = LDepModel(
            W=rng.normal(size=(n1, n)),
            a=rng.normal(size=n1),
            M=rng.normal(size=(n2, n)),
            b=rng.normal(size=n2),
        )
        candidate = LDepModel(
            W=rng.normal(size=(n1, n)),
            a=rng.normal(size=n1),
            M=rng.normal(size=(n2, n)),
            b=rng.normal(size=n2),
        )
        x = rng.normal(size=n)
        label = -1 if rng.integers(2) == 0 else 1
        side = Side.EROSION if label == -1 else Side.DILATION
        idx, _ = linearize_concave(anchor, x, side)
        f = float(np.max(candidate.W @ x + candidate.a))
        g = float(np.max(candidate.M @ x + candidate.b))
        if label == -1:
            linearized = float(candidate.M[idx] @ x + candidate.b[idx])
            convexified_lhs = f + 1.0 - linearized
        else:
            linearized = float(candidate.W[idx] @ x + candidate.a[idx])
            convexified_lhs = g + 1.0 - linearized
        # Slack chosen so the convexified constraint holds with margin `gap`.
        gap = float(rng.uniform(0.0, 2.0))
        xi = convexified_lhs + gap
        assert convexified_lhs - xi <= 0.0  # convexified constraint satisfied
        worst = max(worst, dc_residual(candidate, x, label, xi))
    return worst
