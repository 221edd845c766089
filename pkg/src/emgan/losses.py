"""Discriminator and pixel losses."""

from .errors import ShapeMismatch
from .tensor import as_tensor, mean, mul, softplus, square, sub, tabs, tsum


def bce_loss(logit, label):
    """Binary cross-entropy of a pre-sigmoid score against a 0/1 label.

    Uses ``softplus(d) - label * d``, which equals
    ``-label*ln(sigmoid(d)) - (1-label)*ln(1-sigmoid(d))`` and stays finite for
    every finite ``d``.
    """
    if label not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {label!r}")
    logit = as_tensor(logit)
    loss = tsum(softplus(logit))
    if label:
        loss = sub(loss, tsum(logit))
    return loss


def _check(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeMismatch(f"loss operands differ in shape: {a.shape} vs {b.shape}")
    return a, b


def l1_pixel_loss(a, b):
    """Sum of absolute differences (subgradient 0 at exact ties)."""
    a, b = _check(a, b)
    return tsum(tabs(sub(a, b)))


def mse_loss(a, b):
    """Mean of squared differences."""
    a, b = _check(a, b)
    return mean(square(sub(a, b)))


def pixel_loss(kind, a, b):
    """Per-sample pixel term used by the trainers: L1 is summed, MSE averaged."""
    if kind == "l1":
        return l1_pixel_loss(a, b)
    if kind == "mse":
        return mse_loss(a, b)
    raise ValueError(f"unknown pixel loss {kind!r}")


def weighted(loss, weight):
    return loss if weight == 1.0 else mul(loss, weight)
