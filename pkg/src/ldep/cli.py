"""Command-line interface.

Machine-readable results go to stdout as ``key=value`` lines (or CSV for
row-oriented output); human-readable diagnostics go to stderr.  Exit
codes: 0 success, 1 usage/I-O/validation errors, 2 solver failure.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from .data import (
    MixtureParams,
    accuracy,
    confusion_counts,
    export_grid,
    generate_datasets,
    load_csv,
    load_model,
    save_model,
    write_csv,
)
from .errors import DataFormatError, DimensionMismatch, LdepError
from .model import LDepModel, decision_values
from .problem import CcpSchedule, Dataset, TrainConfig
from .train import TrainStatus, train_best

__all__ = ["main", "build_parser"]


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with code 1, not 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _emit(**kv) -> None:
    for k, v in kv.items():
        print(f"{k}={v}")


def _fold_standardization(m: LDepModel, mu: np.ndarray, sd: np.ndarray) -> LDepModel:
    """Rewrite a model trained on z-scored features to act on raw ones."""
    shift = mu / sd
    return LDepModel(
        W=m.W / sd,
        a=m.a - m.W @ shift,
        M=m.M / sd,
        b=m.b - m.M @ shift,
    )


def _load_features(path, n_expected: int) -> np.ndarray:
    """Feature-only CSV reader; tolerates a trailing label column."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.read()
    lines = [(i + 1, ln) for i, ln in enumerate(raw.splitlines()) if ln.strip()]
    if not lines:
        raise DataFormatError("file contains no data rows")
    start = 0
    try:
        [float(f) for f in lines[0][1].split(",")]
    except ValueError:
        start = 1
        if len(lines) == 1:
            raise DataFormatError("file contains no data rows after the header")
    rows = []
    for lineno, ln in lines[start:]:
        fields = [f.strip() for f in ln.split(",")]
        if len(fields) not in (n_expected, n_expected + 1):
            raise DataFormatError(
                f"row has {len(fields)} fields, expected {n_expected} features"
                " (a trailing label column is tolerated)",
                row=lineno,
            )
        try:
            vals = [float(f) for f in fields[:n_expected]]
        except ValueError:
            raise DataFormatError("cannot parse feature value", row=lineno) from None
        rows.append(vals)
    return np.array(rows, dtype=float)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_train(args) -> int:
    data = load_csv(args.data)
    mu = sd = None
    train_data = data
    if args.standardize:
        mu = data.X.mean(axis=0)
        sd = data.X.std(axis=0)
        sd = np.where(sd > 0, sd, 1.0)
        train_data = Dataset(X=(data.X - mu) / sd, y=data.y)
    cfg = TrainConfig(
        C=args.c,
        alpha=args.alpha,
        lambda_w=args.lambda_w,
        lambda_m=args.lambda_m,
        n1=args.n1,
        n2=args.n2,
        ccp=CcpSchedule(
            tau0=args.tau0,
            mu=args.mu,
            tau_max=args.tau_max,
            max_iters=args.max_iters,
            tol_obj=args.tol_obj,
            tol_slack=args.tol_slack,
        ),
        seed=args.seed,
    )
    t0 = time.perf_counter()
    model, report = train_best(train_data, cfg, restarts=args.restarts)
    wall = time.perf_counter() - t0
    if report.status is TrainStatus.SOLVER_FAILURE:
        print("error: convex subproblem solver failed; no model written", file=sys.stderr)
        return 2
    if args.standardize:
        model = _fold_standardization(model, mu, sd)
    acc = accuracy(model, data)
    meta = {
        "C": _fmt(cfg.C),
        "alpha": _fmt(cfg.alpha),
        "lambda_w": _fmt(cfg.lambda_w),
        "lambda_m": _fmt(cfg.lambda_m),
        "seed": report.seed,
        "restarts": args.restarts,
        "standardize": int(bool(args.standardize)),
        "status": report.status.value,
        "iterations": report.iterations,
        "objective": _fmt(report.objective),
        "train_accuracy": _fmt(acc),
    }
    save_model(model, args.out, meta=meta)
    _emit(
        objective=_fmt(report.objective),
        train_accuracy=_fmt(acc),
        iterations=report.iterations,
        status=report.status.value,
        wall_time_s=_fmt(wall),
        out=args.out,
    )
    return 0


def _cmd_eval(args) -> int:
    model = load_model(args.model)
    data = load_csv(args.data)
    if data.n != model.n:
        raise DimensionMismatch("data columns vs model dimension", model.n, data.n)
    counts = confusion_counts(model, data)
    _emit(accuracy=_fmt(accuracy(model, data)), **counts)
    return 0


def _cmd_predict(args) -> int:
    model = load_model(args.model)
    X = _load_features(args.data, model.n)
    tau = decision_values(model, X)
    labels = np.where(tau >= 0.0, 1, -1)
    body = "tau,label\n" + "".join(
        f"{_fmt(t)},{int(l)}\n" for t, l in zip(tau, labels)
    )
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(body)
        _emit(rows=X.shape[0], out=args.out)
    else:
        sys.stdout.write(body)
    return 0


def _cmd_grid(args) -> int:
    model = load_model(args.model)
    if not (args.xmax > args.xmin and args.ymax > args.ymin):
        raise LdepError("ranges must satisfy xmax > xmin and ymax > ymin")
    count = export_grid(
        model, (args.xmin, args.xmax), (args.ymin, args.ymax), args.steps, args.out
    )
    _emit(rows=count, out=args.out)
    return 0


def _cmd_gen_data(args) -> int:
    train, test = generate_datasets(
        args.train_count, args.test_count, MixtureParams(), args.seed
    )
    train_path = f"{args.out_prefix}_train.csv"
    test_path = f"{args.out_prefix}_test.csv"
    write_csv(train_path, train)
    write_csv(test_path, test)
    _emit(
        train_path=train_path,
        test_path=test_path,
        train_rows=train.m,
        test_rows=test.m,
    )
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="ldep",
        description="Train and apply piecewise-linear dilation-erosion classifiers.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p_train = sub.add_parser(
        "train", help="fit a model to a labeled CSV file and save it"
    )
    p_train.add_argument("--data", required=True, help="labeled training CSV")
    p_train.add_argument("--out", default="model.txt", help="model file to write (default: %(default)s)")
    p_train.add_argument("--n1", type=int, default=4, help="affine pieces on the positive side (default: %(default)s)")
    p_train.add_argument("--n2", type=int, default=3, help="affine pieces on the negative side (default: %(default)s)")
    p_train.add_argument("--c", type=float, default=1.0, help="hinge-loss weight C (default: %(default)s)")
    p_train.add_argument("--alpha", type=float, default=1.0, help="elastic-net mix, 1 = pure L1 (default: %(default)s)")
    p_train.add_argument("--lambda-w", type=float, default=5e-4, help="penalty weight on W (default: %(default)s)")
    p_train.add_argument("--lambda-m", type=float, default=5e-4, help="penalty weight on M (default: %(default)s)")
    p_train.add_argument("--seed", type=int, default=0, help="base seed of the random starts (default: %(default)s)")
    p_train.add_argument("--restarts", type=int, default=1, help="number of random starts, best kept (default: %(default)s)")
    p_train.add_argument("--tau0", type=float, default=0.005, help="initial slack penalty (default: %(default)s)")
    p_train.add_argument("--mu", type=float, default=1.2, help="slack penalty growth factor (default: %(default)s)")
    p_train.add_argument("--tau-max", type=float, default=1e8, help="slack penalty cap (default: %(default)s)")
    p_train.add_argument("--max-iters", type=int, default=100, help="outer iteration cap (default: %(default)s)")
    p_train.add_argument("--tol-obj", type=float, default=1e-5, help="relative objective-change tolerance (default: %(default)s)")
    p_train.add_argument("--tol-slack", type=float, default=1e-4, help="total-slack tolerance (default: %(default)s)")
    p_train.add_argument("--standardize", action="store_true", help="z-score features; the saved model acts on raw features")
    p_train.set_defaults(func=_cmd_train)

    p_eval = sub.add_parser("eval", help="accuracy and confusion counts on a labeled CSV")
    p_eval.add_argument("--model", required=True, help="model file")
    p_eval.add_argument("--data", required=True, help="labeled CSV")
    p_eval.set_defaults(func=_cmd_eval)

    p_pred = sub.add_parser("predict", help="scores and labels for a feature CSV")
    p_pred.add_argument("--model", required=True, help="model file")
    p_pred.add_argument("--data", required=True, help="feature CSV (a trailing label column is ignored)")
    p_pred.add_argument("--out", default=None, help="output CSV path (default: stdout)")
    p_pred.set_defaults(func=_cmd_predict)

    p_grid = sub.add_parser("grid", help="export the decision surface of a planar model")
    p_grid.add_argument("--model", required=True, help="model file (2 input features)")
    p_grid.add_argument("--xmin", type=float, default=-1.5, help="default: %(default)s")
    p_grid.add_argument("--xmax", type=float, default=1.0, help="default: %(default)s")
    p_grid.add_argument("--ymin", type=float, default=-0.3, help="default: %(default)s")
    p_grid.add_argument("--ymax", type=float, default=1.2, help="default: %(default)s")
    p_grid.add_argument("--steps", type=int, default=101, help="grid points per axis (default: %(default)s)")
    p_grid.add_argument("--out", default="grid.csv", help="grid CSV to write (default: %(default)s)")
    p_grid.set_defaults(func=_cmd_grid)

    p_gen = sub.add_parser("gen-data", help="sample the synthetic two-class benchmark")
    p_gen.add_argument("--train-count", type=int, default=250, help="default: %(default)s")
    p_gen.add_argument("--test-count", type=int, default=1000, help="default: %(default)s")
    p_gen.add_argument("--seed", type=int, default=0, help="default: %(default)s")
    p_gen.add_argument("--out-prefix", default="synth", help="writes <prefix>_train.csv and <prefix>_test.csv (default: %(default)s)")
    p_gen.set_defaults(func=_cmd_gen_data)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (LdepError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
