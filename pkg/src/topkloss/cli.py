"""Command-line front end.

Subcommands: ``loss`` (per-sample losses from a score file), ``gradcheck``
(analytic vs finite-difference gradients), ``stability`` (temperature sweep
reporting finite/overflowed), ``bench`` (forward-pass timings as CSV),
``proba`` (top-k membership marginals), ``train-toy`` (the synthetic
training harness).

Score files are comma-separated, one sample per row: integer label first,
then the class scores.  A header row is tolerated (detected by a non-numeric
first token).  Output is line-oriented key=value plus CSV tables; identical
inputs, flags, and seed produce byte-identical output.

Exit codes: 0 success, 1 data/assertion failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from .esp import esp_forward_dc, esp_forward_sum, esp_forward_sum_linear
from .losses import (
    LossConfig,
    ScoreBatch,
    hard_loss,
    smooth_loss_batch,
    smooth_loss_grad,
    task_loss,
)
from .marginals import aggregate_crops
from .oracle import finite_diff_grad
from .toytrain import LinearModel, NoisySpec, TrainingDiverged, generate_dataset, train

EXIT_OK = 0
EXIT_DATA = 1
EXIT_USAGE = 2


class DataError(Exception):
    """Malformed input data (reported with a line number when possible)."""


def _fmt(x: float) -> str:
    return "%.17g" % float(x)


def _is_number(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


def read_score_file(path: str):
    """Parse a score file into (labels, scores); raises DataError."""
    rows = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            toks = [t.strip() for t in line.split(",")]
            if not rows and not _is_number(toks[0]):
                continue  # header row
            try:
                label = int(toks[0])
            except ValueError:
                raise DataError(f"line {lineno}: label {toks[0]!r} is not an integer") from None
            try:
                scores = [float(t) for t in toks[1:]]
            except ValueError:
                raise DataError(f"line {lineno}: non-numeric score") from None
            if not scores:
                raise DataError(f"line {lineno}: no scores after the label")
            rows.append((lineno, label, scores))
    if not rows:
        raise DataError("no data rows found")
    n = len(rows[0][2])
    for lineno, label, scores in rows:
        if len(scores) != n:
            raise DataError(f"line {lineno}: expected {n} scores, got {len(scores)}")
        if not 0 <= label < n:
            raise DataError(f"line {lineno}: label {label} out of range [0, {n})")
        if not all(np.isfinite(scores)):
            raise DataError(f"line {lineno}: non-finite score")
    labels = np.array([r[1] for r in rows], dtype=np.intp)
    scores = np.array([r[2] for r in rows], dtype=np.float64)
    return labels, scores


def cmd_loss(args) -> int:
    labels, scores = read_score_file(args.input)
    cfg = LossConfig(k=args.k, tau=args.tau, alpha=args.alpha, precision=args.precision)
    n = scores.shape[1]
    kind = "hard" if args.hard else "smooth"
    if args.hard:
        losses = np.array([hard_loss(s, int(y), cfg) for s, y in zip(scores, labels)])
    else:
        losses = np.asarray(smooth_loss_batch(ScoreBatch(scores, labels), cfg), dtype=np.float64)
    errors = np.array([task_loss(s, int(y), cfg.k) for s, y in zip(scores, labels)])

    print(
        f"n={n} samples={len(labels)} k={cfg.k} tau={_fmt(cfg.tau)} "
        f"alpha={_fmt(cfg.alpha)} kind={kind} precision={cfg.precision}"
    )
    for i, (y, lo, er) in enumerate(zip(labels, losses, errors)):
        print(f"sample={i} label={int(y)} loss={_fmt(lo)} task_error={int(er)}")
    print(f"mean_loss={_fmt(losses.mean())} task_error_rate={_fmt(errors.mean())}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .losses import smooth_loss

    cfg = LossConfig(k=args.k, tau=args.tau, alpha=args.alpha)
    rng = np.random.default_rng(args.seed)
    max_rel = 0.0
    for _ in range(args.trials):
        s = rng.normal(0.0, 2.0, args.n)
        y = int(rng.integers(args.n))
        grad = smooth_loss_grad(ScoreBatch(s[None, :], [y]), cfg).grad[0]
        fd = finite_diff_grad(lambda v: smooth_loss(v, y, cfg), s, args.h)
        rel = float(np.abs(grad - fd).max() / max(1e-8, np.abs(fd).max()))
        max_rel = max(max_rel, rel)
    status = "pass" if max_rel <= args.tol else "fail"
    print(
        f"n={args.n} k={args.k} tau={_fmt(args.tau)} trials={args.trials} "
        f"max_rel_err={_fmt(max_rel)} tol={_fmt(args.tol)} status={status}"
    )
    return EXIT_OK if status == "pass" else EXIT_DATA


def _linear_mode_losses(scores, labels, cfg):
    """Debug path: the summation recurrence in plain linear space."""
    dtype = cfg.dtype
    k, tau = cfg.k, cfg.tau
    bsz, n = scores.shape
    keep = np.arange(n)[None, :] != labels[:, None]
    s_y = scores[np.arange(bsz), labels].astype(dtype)
    s_rest = scores[keep].reshape(bsz, n - 1)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        e = np.exp((s_rest / (k * tau)).astype(dtype))
        sig = esp_forward_sum_linear(e, k, dtype=dtype)
        lead = np.exp(s_y / dtype(k * tau)) * sig[:, k - 1]
        full = lead + np.exp(dtype(cfg.alpha / tau)) * sig[:, k]
        return tau * (np.log(full) - np.log(lead))


def cmd_stability(args) -> int:
    taus = [float(t) for t in args.taus.split(",") if t]
    if not taus:
        raise DataError("empty tau list")
    rng = np.random.default_rng(args.seed)
    scores = rng.uniform(-args.score_range, args.score_range, size=(args.batch, args.n))
    labels = rng.integers(0, args.n, size=args.batch)
    mode = "linear" if args.linear else "log"
    print(
        f"n={args.n} k={args.k} precision={args.precision} mode={mode} "
        f"batch={args.batch} score_range={_fmt(args.score_range)} seed={args.seed}"
    )
    print("tau,stable")
    for tau in taus:
        cfg = LossConfig(k=args.k, tau=tau, alpha=args.alpha, precision=args.precision)
        if args.linear:
            losses = _linear_mode_losses(scores, labels, cfg)
            ok = bool(np.isfinite(losses).all())
        else:
            res = smooth_loss_grad(ScoreBatch(scores, labels), cfg)
            ok = bool(np.isfinite(res.loss).all() and np.isfinite(res.grad).all())
        print(f"{_fmt(tau)},{'yes' if ok else 'no'}")
    return EXIT_OK


def cmd_bench(args) -> int:
    ns = [int(t) for t in args.n_list.split(",") if t]
    if not ns:
        raise DataError("empty n list")
    forward = esp_forward_dc if args.algo == "dc" else esp_forward_sum
    rng = np.random.default_rng(args.seed)
    print("n,algo,mean_ms,std_ms")
    for n in ns:
        log_e = rng.uniform(-5.0, 5.0, size=(args.batch, n))
        forward(log_e, args.k)  # warm-up, excluded from timing
        times = []
        for _ in range(args.repeats):
            t0 = time.perf_counter()
            forward(log_e, args.k)
            times.append((time.perf_counter() - t0) * 1e3)
        times = np.asarray(times)
        print(f"{n},{args.algo},{times.mean():.6f},{times.std():.6f}")
    return EXIT_OK


def cmd_proba(args) -> int:
    _, scores = read_score_file(args.input)
    if not 1 <= args.k <= scores.shape[1]:
        raise ValueError(f"need 1 <= k <= {scores.shape[1]}, got k={args.k}")
    dist = aggregate_crops(scores, args.k)
    print(f"k={args.k} crops={scores.shape[0]} n={scores.shape[1]}")
    print("class,prob")
    for i, p in enumerate(dist.probs):
        print(f"{i},{_fmt(p)}")
    return EXIT_OK


def cmd_train_toy(args) -> int:
    spec = NoisySpec(
        coarse_count=args.coarse,
        fine_per_coarse=args.fine,
        feature_dim=args.dim,
        samples=args.samples,
        noise_prob=args.noise,
        seed=args.seed,
    )
    data = generate_dataset(spec)
    cfg = LossConfig(k=args.k, tau=args.tau, alpha=args.alpha, precision=args.precision)
    loss_kind = "cross_entropy" if args.loss == "ce" else "smooth_topk"
    model = LinearModel.zeros(spec.feature_dim, spec.n_classes, reg=args.reg)
    print(
        f"classes={spec.n_classes} coarse={args.coarse} fine={args.fine} dim={args.dim} "
        f"samples={args.samples} noise={_fmt(args.noise)} loss={args.loss} k={args.k} "
        f"tau={_fmt(args.tau)} epochs={args.epochs} lr={_fmt(args.lr)} seed={args.seed}"
    )
    report = train(
        model,
        data,
        loss_kind,
        cfg,
        epochs=args.epochs,
        lr=args.lr,
        lr_decay=args.lr_decay,
        batch_size=args.batch,
        seed=args.seed,
    )
    for e in range(args.epochs):
        print(
            f"epoch={e} loss={_fmt(report.loss_curve[e])} "
            f"train_top1={_fmt(report.train_top1[e])} train_topk={_fmt(report.train_topk[e])} "
            f"val_top1={_fmt(report.val_top1[e])} val_topk={_fmt(report.val_topk[e])}"
        )
    print(f"test_top1={_fmt(report.test_top1)} test_topk={_fmt(report.test_topk)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="topkloss", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("loss", help="evaluate losses over a score file")
    p.add_argument("input", help="CSV score file: label, then scores")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--hard", action="store_true", help="hard hinge instead of smooth loss")
    p.add_argument("--precision", choices=("f32", "f64"), default="f64")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("gradcheck", help="analytic gradient vs central differences")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--h", type=float, default=1e-6)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("stability", help="finite-or-overflow sweep over temperatures")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--taus", default="10,1,0.1,0.01,0.001,0.0001")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--precision", choices=("f32", "f64"), default="f32")
    p.add_argument("--score-range", type=float, default=20.0)
    p.add_argument("--batch", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--linear", action="store_true", help="debug: naive linear-space path")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("bench", help="forward-pass timing table (CSV)")
    p.add_argument("--n-list", default="1000,10000,100000")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--batch", type=int, default=1)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--algo", choices=("dc", "sum"), default="dc")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("proba", help="top-k membership marginals of score rows (crops)")
    p.add_argument("input", help="CSV score file; labels are ignored")
    p.add_argument("--k", type=int, required=True)
    p.set_defaults(func=cmd_proba)

    p = sub.add_parser("train-toy", help="train a linear model on synthetic noisy data")
    p.add_argument("--coarse", type=int, default=10)
    p.add_argument("--fine", type=int, default=5)
    p.add_argument("--dim", type=int, default=20)
    p.add_argument("--samples", type=int, default=5000)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--loss", choices=("ce", "topk"), default="topk")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--precision", choices=("f32", "f64"), default="f64")
    p.add_argument("--epochs", type=int, default=15)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--lr-decay", type=float, default=1.0)
    p.add_argument("--batch", type=int, default=128)
    p.add_argument("--reg", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_toy)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingDiverged as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
