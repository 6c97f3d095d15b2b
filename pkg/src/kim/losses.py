"""Behavior-cloning losses with exact gradients w.r.t. predictions."""

import numpy as np


class LossError(Exception):
    pass


def balanced_class_weights(targets, n_classes):
    """w_c = n_total / (n_classes * n_c). Every class must occur."""
    targets = np.asarray(targets, dtype=np.int64)
    counts = np.bincount(targets, minlength=n_classes)
    missing = [int(c) for c in np.flatnonzero(counts == 0)]
    if missing:
        raise LossError(f"no samples for class(es) {missing}; cannot balance weights")
    return targets.size / (n_classes * counts.astype(np.float64))


def compute_loss(kind, predictions, targets, class_weights=None):
    """(loss, dloss/dpredictions) for one batch.

    cross_entropy_balanced: predictions are unnormalized logits (B, k),
    targets are class indices; per-sample weight w_c = n_total/(n_classes n_c)
    from the batch unless class_weights is given. Loss is the plain mean over
    samples of w_{c_i} * (-log softmax_i[c_i]).

    mse: mean over samples and dims of (pred - target)^2.
    """
    predictions = np.asarray(predictions, dtype=np.float64)
    if predictions.shape[0] == 0:
        raise LossError("empty batch")
    if kind == "mse":
        targets = np.asarray(targets, dtype=np.float64)
        if targets.shape != predictions.shape:
            raise LossError(f"shape mismatch {predictions.shape} vs {targets.shape}")
        diff = predictions - targets
        loss = float(np.mean(diff * diff))
        return loss, 2.0 * diff / diff.size
    if kind == "cross_entropy_balanced":
        targets = np.asarray(targets, dtype=np.int64)
        n, k = predictions.shape
        if class_weights is None:
            class_weights = balanced_class_weights(targets, k)
        w = np.asarray(class_weights, dtype=np.float64)[targets]
        z = predictions - predictions.max(axis=1, keepdims=True)
        logsumexp = np.log(np.exp(z).sum(axis=1))
        nll = logsumexp - z[np.arange(n), targets]
        loss = float(np.mean(w * nll))
        softmax = np.exp(z) / np.exp(z).sum(axis=1, keepdims=True)
        grad = softmax * w[:, None]
        grad[np.arange(n), targets] -= w
        return loss, grad / n
    raise LossError(f"unknown loss kind '{kind}'")
