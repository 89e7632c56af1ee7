"""Loss terms for the two label views plus the adversarial domain term.

All loss functions return scalar autodiff tensors wired into the caller's
graph. The numeric summary lives in `LossReport`, which records the algebraic
objective

    total = source + target - trade_off * domain

even though the backward pass runs on ``source + target + domain`` with the
sign flip applied inside the gradient reversal node. Backing through the
plus-form graph gives the discriminator its unscaled gradient while the
shared feature weights receive ``-trade_off`` times the domain gradient,
which is exactly the saddle-point update the algebraic objective asks for.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, as_tensor


@dataclass(frozen=True)
class LossReport:
    """Detached loss values of one step or one epoch."""

    source: float
    target: float
    domain: float
    trade_off: float

    @property
    def total(self) -> float:
        return self.source + self.target - self.trade_off * self.domain

    @classmethod
    def from_terms(cls, source, target, domain, trade_off: float) -> "LossReport":
        def value(term) -> float:
            return term.item() if isinstance(term, Tensor) else float(term)

        return cls(value(source), value(target), value(domain), float(trade_off))


def _check_batch(preds, refs, name: str) -> None:
    if len(preds) == 0:
        raise ValueError(f"{name} needs at least one sequence")
    if len(preds) != len(refs):
        raise ValueError(
            f"{name}: got {len(preds)} predictions but {len(refs)} references")


def source_loss(preds, labels, n_sequences: int | None = None) -> Tensor:
    """Fully-supervised regression loss on source frames.

    Squared errors are summed over the frames of each sequence and the grand
    sum is divided by the number of sequences only, so longer sequences
    contribute proportionally more.

    preds: list of [n_frames, 1] tensors, one per sequence.
    labels: list of matching per-frame label arrays.
    """
    _check_batch(preds, labels, "source_loss")
    n = len(preds) if n_sequences is None else int(n_sequences)
    if n < 1:
        raise ValueError(f"n_sequences must be >= 1, got {n}")
    total = as_tensor(0.0)
    for pred, lab in zip(preds, labels):
        ref = np.asarray(lab, dtype=np.float64).reshape(-1, 1)
        if pred.data.shape != ref.shape:
            raise ValueError(
                f"source_loss: prediction shape {pred.data.shape} does not "
                f"match labels {ref.shape}")
        total = total + (pred - ref).square().sum()
    return (1.0 / n) * total


def target_weak_loss(pooled, codes, n_sequences: int | None = None) -> Tensor:
    """Cross-entropy between soft ordinal codes and pooled level probabilities.

    Each term is -sum(code * log p); the sum over sequences is divided by the
    sequence count. Codes need not be normalized: a soft Gaussian code simply
    weights the log-probabilities of the levels near its center.

    pooled: list of [levels] probability tensors (2-D entries are accepted
    and reduced over all their rows, which makes the same form usable as a
    per-frame cross-entropy).
    """
    _check_batch(pooled, codes, "target_weak_loss")
    n = len(pooled) if n_sequences is None else int(n_sequences)
    if n < 1:
        raise ValueError(f"n_sequences must be >= 1, got {n}")
    total = as_tensor(0.0)
    for probs, code in zip(pooled, codes):
        ref = np.asarray(code, dtype=np.float64)
        if probs.data.shape != ref.shape:
            raise ValueError(
                f"target_weak_loss: probabilities {probs.data.shape} do not "
                f"match code {ref.shape}")
        total = total + -((probs.log() * ref).sum())
    return (1.0 / n) * total


def domain_loss(preds, domains, n_sequences: int | None = None) -> Tensor:
    """Binary cross-entropy of the domain discriminator over frames.

    Per-frame terms -[d log p + (1-d) log(1-p)] are summed within each
    sequence; the grand sum is divided by the total sequence count of both
    domains (pass it explicitly when the batch is a subset).

    preds: list of [n_frames, 1] probability tensors.
    domains: per-sequence domain flags, 0 = source, 1 = target.
    """
    _check_batch(preds, domains, "domain_loss")
    n = len(preds) if n_sequences is None else int(n_sequences)
    if n < 1:
        raise ValueError(f"n_sequences must be >= 1, got {n}")
    total = as_tensor(0.0)
    for pred, dom in zip(preds, domains):
        if dom not in (0, 1):
            raise ValueError(f"domain flag must be 0 or 1, got {dom!r}")
        if pred.data.ndim != 2 or pred.data.shape[1] != 1:
            raise ValueError(
                f"domain_loss: predictions must be [n_frames, 1], got "
                f"{pred.data.shape}")
        if dom == 1:
            total = total + -(pred.log().sum())
        else:
            total = total + -((1.0 - pred).log().sum())
    return (1.0 / n) * total


def lambda_schedule(progress: float, gamma: float = 10.0) -> float:
    """Trade-off weight ramp 2 / (1 + exp(-gamma * p)) - 1 for p in [0, 1].

    Starts at 0, saturates toward 1; with the default gamma it passes 0.46
    at p = 0.1 and 0.987 at p = 0.5, so adversarial pressure arrives only
    after the label heads have begun to settle.
    """
    if not 0.0 <= progress <= 1.0:
        raise ValueError(f"progress must be in [0, 1], got {progress}")
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return 2.0 / (1.0 + math.exp(-gamma * progress)) - 1.0
