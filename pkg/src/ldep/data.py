"""Dataset files, synthetic benchmarks, metrics and model persistence.

All text formats use 17-significant-digit decimal floats so that a
write/read cycle reproduces every value bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError, DimensionMismatch, LdepError, ModelFormatError
from .model import LDepModel, decision_values, predict_many
from .problem import Dataset

__all__ = [
    "MixtureParams",
    "load_csv",
    "write_csv",
    "generate_datasets",
    "accuracy",
    "confusion_counts",
    "export_grid",
    "grid_rows",
    "save_model",
    "load_model",
]

MODEL_FORMAT = "ldep-model/1"
GRID_HEADER = "x,y,tau,label"


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


# ---------------------------------------------------------------------------
# labeled CSV


def load_csv(path) -> Dataset:
    """Read a labeled CSV file: n feature columns followed by one label.

    Labels may be written as -1/+1 or 0/1 (0 maps to -1).  A header row
    is detected by a non-numeric first line and skipped.  Errors report
    1-based row and column positions.
    """
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.read()
    lines = [(i + 1, ln) for i, ln in enumerate(raw.splitlines()) if ln.strip()]
    if not lines:
        raise DataFormatError("file contains no data rows")

    def parse_fields(ln: str) -> list[str]:
        return [f.strip() for f in ln.split(",")]

    start = 0
    first_fields = parse_fields(lines[0][1])
    try:
        [float(f) for f in first_fields]
    except ValueError:
        start = 1
        if len(lines) == 1:
            raise DataFormatError("file contains no data rows after the header")

    width = len(parse_fields(lines[start][1]))
    if width < 2:
        raise DataFormatError(
            "rows need at least one feature column and a label",
            row=lines[start][0],
        )

    rows: list[list[float]] = []
    labels: list[int] = []
    for lineno, ln in lines[start:]:
        fields = parse_fields(ln)
        if len(fields) != width:
            raise DataFormatError(
                f"row has {len(fields)} fields, expected {width}", row=lineno
            )
        vals = []
        for c, f in enumerate(fields):
            try:
                vals.append(float(f))
            except ValueError:
                raise DataFormatError(
                    f"cannot parse {f!r} as a number", row=lineno, col=c + 1
                ) from None
        lbl = vals[-1]
        if lbl in (-1.0, 1.0):
            labels.append(int(lbl))
        elif lbl == 0.0:
            labels.append(-1)
        else:
            raise DataFormatError(
                f"label must be one of -1, +1, 0, 1, got {fields[-1]}",
                row=lineno,
                col=width,
            )
        rows.append(vals[:-1])
    return Dataset(X=np.array(rows, dtype=float), y=np.array(labels, dtype=np.int64))


def write_csv(path, data: Dataset) -> None:
    """Write a dataset as plain labeled CSV (no header)."""
    with open(path, "w", encoding="utf-8") as fh:
        for k in range(data.m):
            feats = ",".join(_fmt(v) for v in data.X[k])
            fh.write(f"{feats},{int(data.y[k])}\n")


# ---------------------------------------------------------------------------
# synthetic benchmark generator


@dataclass(frozen=True)
class MixtureParams:
    """Two-class Gaussian-mixture shape: equal-weight isotropic components.

    The defaults follow the conventional description of Ripley's
    synthetic two-class benchmark (two components per class in the
    plane, common variance 0.03); see the README for provenance notes.
    """

    neg_means: tuple = ((-0.7, 0.3), (0.3, 0.3))
    pos_means: tuple = ((-0.3, 0.7), (0.4, 0.7))
    variance: float = 0.03

    def __post_init__(self):
        for name, means in (("neg_means", self.neg_means), ("pos_means", self.pos_means)):
            if len(means) < 1:
                raise LdepError(f"{name} needs at least one component")
            dims = {len(mu) for mu in means}
            if len(dims) != 1:
                raise LdepError(f"{name} components differ in dimension")
        if len(self.neg_means[0]) != len(self.pos_means[0]):
            raise DimensionMismatch(
                "mixture component dimensions",
                len(self.neg_means[0]),
                len(self.pos_means[0]),
            )
        if self.variance < 0:
            raise LdepError(f"variance must be nonnegative, got {self.variance}")

    @property
    def dim(self) -> int:
        return len(self.neg_means[0])


def _sample_block(rng: np.random.Generator, count: int, means, variance: float):
    mu = np.asarray(means, dtype=float)
    comp = rng.integers(0, mu.shape[0], size=count)
    noise = rng.normal(0.0, np.sqrt(variance), size=(count, mu.shape[1]))
    return mu[comp] + noise


def _sample_dataset(rng: np.random.Generator, count: int, params: MixtureParams) -> Dataset:
    n_neg = count // 2
    n_pos = count - n_neg
    Xn = _sample_block(rng, n_neg, params.neg_means, params.variance)
    Xp = _sample_block(rng, n_pos, params.pos_means, params.variance)
    X = np.vstack([Xn, Xp])
    y = np.concatenate([np.full(n_neg, -1, dtype=np.int64), np.full(n_pos, 1, dtype=np.int64)])
    return Dataset(X=X, y=y)


def generate_datasets(
    count_train: int,
    count_test: int,
    params: MixtureParams | None = None,
    seed: int = 0,
) -> tuple[Dataset, Dataset]:
    """Draw a train/test pair from the two-class Gaussian mixture.

    Each dataset is balanced (negatives = count // 2, listed first) and
    the pair is deterministic for a given seed: the training set is
    drawn before the test set from a single seeded generator.
    """
    if count_train < 2 or count_test < 2:
        raise LdepError(
            f"counts must be at least 2, got ({count_train}, {count_test})"
        )
    p = params if params is not None else MixtureParams()
    rng = np.random.default_rng(seed)
    train = _sample_dataset(rng, count_train, p)
    test = _sample_dataset(rng, count_test, p)
    return train, test


# ---------------------------------------------------------------------------
# metrics


def accuracy(m: LDepModel, d: Dataset) -> float:
    """Fraction of samples whose prediction equals the label."""
    pred = predict_many(m, d.X)
    return float(np.mean(pred == d.y))


def confusion_counts(m: LDepModel, d: Dataset) -> dict[str, int]:
    """Counts tp/tn/fp/fn with +1 treated as the positive class."""
    pred = predict_many(m, d.X)
    pos = d.y > 0
    return {
        "tp": int(np.sum((pred > 0) & pos)),
        "tn": int(np.sum((pred < 0) & ~pos)),
        "fp": int(np.sum((pred > 0) & ~pos)),
        "fn": int(np.sum((pred < 0) & pos)),
    }


# ---------------------------------------------------------------------------
# decision-surface grid


def grid_rows(m: LDepModel, xrange_, yrange_, steps: int) -> np.ndarray:
    """Uniform grid of (x, y, tau, label) rows for a planar model.

    ``x`` is the outer loop and ``y`` the inner one, so each contiguous
    run of ``steps`` rows is one column of the plot.  Both range
    endpoints are included.
    """
    if m.n != 2:
        raise DimensionMismatch("grid export needs a planar model", 2, m.n)
    if steps < 2:
        raise LdepError(f"steps must be at least 2, got {steps}")
    x0, x1 = (float(v) for v in xrange_)
    y0, y1 = (float(v) for v in yrange_)
    xs = np.linspace(x0, x1, steps)
    ys = np.linspace(y0, y1, steps)
    gx = np.repeat(xs, steps)
    gy = np.tile(ys, steps)
    pts = np.column_stack([gx, gy])
    tau = decision_values(m, pts)
    label = np.where(tau >= 0.0, 1, -1)
    return np.column_stack([gx, gy, tau, label.astype(float)])


def export_grid(m: LDepModel, xrange_, yrange_, steps: int, path) -> int:
    """Write the decision-surface grid CSV; returns the number of rows."""
    rows = grid_rows(m, xrange_, yrange_, steps)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(GRID_HEADER + "\n")
        for x, y, tau, label in rows:
            fh.write(f"{_fmt(x)},{_fmt(y)},{_fmt(tau)},{int(label)}\n")
    return rows.shape[0]


# ---------------------------------------------------------------------------
# model persistence


def save_model(m: LDepModel, path, meta: dict | None = None) -> None:
    """Write a model as structured text (format ``ldep-model/1``).

    ``meta`` entries are echoed into a trailing section as ``key value``
    lines in insertion order; they are informational and ignored by
    :func:`load_model`.  Keys must not contain whitespace.
    """
    lines = [MODEL_FORMAT, f"n {m.n}", f"n1 {m.n1}", f"n2 {m.n2}", "W"]
    for row in m.W:
        lines.append(" ".join(_fmt(v) for v in row))
    lines.append("a")
    lines.append(" ".join(_fmt(v) for v in m.a))
    lines.append("M")
    for row in m.M:
        lines.append(" ".join(_fmt(v) for v in row))
    lines.append("b")
    lines.append(" ".join(_fmt(v) for v in m.b))
    if meta:
        lines.append("meta")
        for k, v in meta.items():
            key = str(k)
            if not key or any(ch.isspace() for ch in key):
                raise LdepError(f"meta key {k!r} must be non-empty without whitespace")
            lines.append(f"{key} {v}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> LDepModel:
    """Read a model file written by :func:`save_model`.

    Raises :class:`ModelFormatError` on an unknown format version, a
    shape inconsistency, or any parse failure; messages carry 1-based
    line numbers.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    pos = 0

    def take(what: str) -> tuple[int, str]:
        nonlocal pos
        while pos < len(lines) and not lines[pos].strip():
            pos += 1
        if pos >= len(lines):
            raise ModelFormatError(f"unexpected end of file, expected {what}")
        pos += 1
        return pos, lines[pos - 1].strip()

    lineno, header = take("format version")
    if header != MODEL_FORMAT:
        raise ModelFormatError(
            f"unsupported format version {header!r} at line {lineno}, "
            f"expected {MODEL_FORMAT!r}"
        )

    def take_int(name: str) -> int:
        lineno, ln = take(f"'{name} <int>'")
        parts = ln.split()
        if len(parts) != 2 or parts[0] != name:
            raise ModelFormatError(f"expected '{name} <int>' at line {lineno}")
        try:
            v = int(parts[1])
        except ValueError:
            raise ModelFormatError(
                f"cannot parse {parts[1]!r} as an integer at line {lineno}"
            ) from None
        if v < 1:
            raise ModelFormatError(f"{name} must be at least 1 at line {lineno}")
        return v

    n = take_int("n")
    n1 = take_int("n1")
    n2 = take_int("n2")

    def take_tag(tag: str):
        lineno, ln = take(f"section tag {tag!r}")
        if ln != tag:
            raise ModelFormatError(f"expected section {tag!r} at line {lineno}, got {ln!r}")

    def take_floats(count: int, what: str) -> np.ndarray:
        lineno, ln = take(what)
        parts = ln.split()
        if len(parts) != count:
            raise ModelFormatError(
                f"{what} at line {lineno} has {len(parts)} values, expected {count}"
            )
        try:
            return np.array([float(p) for p in parts])
        except ValueError:
            raise ModelFormatError(f"cannot parse {what} at line {lineno}") from None

    take_tag("W")
    W = np.vstack([take_floats(n, f"W row {i + 1}") for i in range(n1)])
    take_tag("a")
    a = take_floats(n1, "a")
    take_tag("M")
    M = np.vstack([take_floats(n, f"M row {j + 1}") for j in range(n2)])
    take_tag("b")
    b = take_floats(n2, "b")

    # nothing but an optional meta section may follow
    while pos < len(lines) and not lines[pos].strip():
        pos += 1
    if pos < len(lines):
        lineno, tag = take("section tag 'meta'")
        if tag != "meta":
            raise ModelFormatError(f"unexpected content at line {lineno}: {tag!r}")

    try:
        return LDepModel(W=W, a=a, M=M, b=b)
    except LdepError as exc:
        raise ModelFormatError(f"inconsistent model contents: {exc}") from None
