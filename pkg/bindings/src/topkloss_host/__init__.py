"""Drop-in batch loss functions for external training loops.

Two flat entry points wrap the smooth top-k engine: `loss_and_grad` returns
per-sample losses and score gradients, `topk_marginals` returns per-row
top-k membership distributions.  Configuration is passed as plain scalars;
no objects to construct or hold.  Outputs are numerically identical to the
engine's command-line front end on the same data.

The wrappers are re-entrant and safe to call from multiple host threads:
all state is local, and the heavy lifting happens inside numpy kernels,
which drop the interpreter lock while they run.
"""

from dataclasses import dataclass

import numpy as np

import topkloss
from topkloss import LossConfig, ScoreBatch, smooth_loss_grad, topk_marginals_batch

__version__ = topkloss.__version__

__all__ = ["HostBatchView", "loss_and_grad", "topk_marginals", "__version__"]


@dataclass(frozen=True)
class HostBatchView:
    """Validated view over host arrays: (samples x classes) scores + labels."""

    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        scores = np.ascontiguousarray(np.asarray(self.scores, dtype=np.float64))
        labels = np.asarray(self.labels, dtype=np.intp)
        if scores.ndim != 2:
            raise ValueError(
                f"scores must be a 2-D (samples x classes) array, got shape {scores.shape}"
            )
        if labels.ndim != 1 or labels.shape[0] != scores.shape[0]:
            raise ValueError(
                f"labels must be one integer per sample: scores have {scores.shape[0]} "
                f"rows, labels have shape {labels.shape}"
            )
        if scores.shape[0] and not np.isfinite(scores).all():
            raise ValueError("scores must be finite")
        if scores.shape[0] and (labels.min() < 0 or labels.max() >= scores.shape[1]):
            raise ValueError(
                f"labels must lie in [0, {scores.shape[1]}), got range "
                f"[{labels.min()}, {labels.max()}]"
            )
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)


def loss_and_grad(
    scores,
    labels,
    k: int,
    tau: float = 1.0,
    alpha: float = 1.0,
    p_order: int | None = None,
    precision: str = "f64",
    instability_threshold: float | None = None,
):
    """Per-sample smooth top-k losses and gradients d loss / d scores.

    Returns ``(losses, grads)`` with shapes (samples,) and (samples x
    classes).  An empty batch returns empty arrays.  Shape or value problems
    raise ValueError with a descriptive message.
    """
    view = HostBatchView(scores, labels)
    cfg = LossConfig(
        k=k,
        tau=tau,
        alpha=alpha,
        p_order=p_order,
        precision=precision,
        instability_threshold=instability_threshold,
    )
    if view.scores.shape[0] == 0:
        n = view.scores.shape[1]
        return np.zeros(0, dtype=cfg.dtype), np.zeros((0, n), dtype=cfg.dtype)
    result = smooth_loss_grad(ScoreBatch(view.scores, view.labels), cfg)
    return result.loss, result.grad


def topk_marginals(scores, k: int):
    """Row-wise probability of each class entering the top-k prediction.

    Returns a (samples x classes) array with nonnegative rows summing to 1.
    """
    scores = np.ascontiguousarray(np.asarray(scores, dtype=np.float64))
    if scores.ndim != 2:
        raise ValueError(
            f"scores must be a 2-D (samples x classes) array, got shape {scores.shape}"
        )
    if scores.shape[0] == 0:
        return np.zeros_like(scores)
    return topk_marginals_batch(scores, k)
