"""Stability grid: log-space vs linear-space evaluation across temperatures.

For each (mode, precision, tau) cell, evaluates the smooth loss (and its
gradient, in log mode) on one random batch and reports whether every value
stayed finite.  The linear-space rows overflow as exp(s/(k tau)) leaves the
representable range; the log-space rows do not.
"""

import argparse

import numpy as np

from topkloss.cli import _linear_mode_losses
from topkloss.losses import LossConfig, ScoreBatch, smooth_loss_grad


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--k", type=int, default=5)
    ap.add_argument("--batch", type=int, default=128)
    ap.add_argument("--score-range", type=float, default=20.0)
    ap.add_argument("--taus", default="10,1,0.1,0.01,0.001,0.0001")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    scores = rng.uniform(-args.score_range, args.score_range, (args.batch, args.n))
    labels = rng.integers(0, args.n, args.batch)
    taus = [float(t) for t in args.taus.split(",")]

    header = "mode,precision," + ",".join(f"tau={t:g}" for t in taus)
    print(header)
    for mode in ("linear", "log"):
        for precision in ("f32", "f64"):
            cells = []
            for tau in taus:
                cfg = LossConfig(k=args.k, tau=tau, precision=precision)
                if mode == "linear":
                    vals = _linear_mode_losses(scores, labels, cfg)
                    ok = bool(np.isfinite(vals).all())
                else:
                    res = smooth_loss_grad(ScoreBatch(scores, labels), cfg)
                    ok = bool(np.isfinite(res.loss).all() and np.isfinite(res.grad).all())
                cells.append("stable" if ok else "overflow")
            print(f"{mode},{precision}," + ",".join(cells))


if __name__ == "__main__":
    main()
