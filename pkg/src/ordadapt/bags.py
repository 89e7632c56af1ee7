"""Sequences, fixed-length bags, and the pooling operators over per-frame
prediction rows.

A bag is a window of consecutive frames carrying a single weak ordinal label:
the maximum (quantized) frame label inside the window. Target-domain bags
deliberately do not carry frame labels, so training code cannot read them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .labels import DEFAULT_LEVELS, level_from_continuous

SOURCE_DOMAIN = 0
TARGET_DOMAIN = 1


@dataclass
class Sequence:
    """An ordered run of frame feature vectors with per-frame ground truth.

    ``frame_labels`` holds continuous values in [-1, 1] for source-domain
    sequences and integer ordinal levels for target-domain ones.
    """

    frames: np.ndarray
    frame_labels: np.ndarray
    domain: int
    subject_id: int
    sequence_id: int = 0

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        self.frame_labels = np.asarray(self.frame_labels)
        if self.frames.ndim != 2:
            raise ValueError(f"frames must be [n, D], got {self.frames.shape}")
        if len(self.frames) != len(self.frame_labels) or len(self.frames) == 0:
            raise ValueError(
                f"need one label per frame, got {len(self.frames)} frames and "
                f"{len(self.frame_labels)} labels")
        if self.domain not in (SOURCE_DOMAIN, TARGET_DOMAIN):
            raise ValueError(f"domain must be 0 (source) or 1 (target), got {self.domain}")

    def __len__(self) -> int:
        return len(self.frames)


@dataclass
class Bag:
    """A fixed-length sub-sequence with one weak ordinal label.

    ``frame_labels`` is populated only for source-domain bags, whose
    per-frame labels remain fully visible during training.
    """

    frames: np.ndarray = field(repr=False)
    weak_label: int
    parent: tuple
    domain: int
    frame_labels: Optional[np.ndarray] = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.frames)


def make_bags(seq: Sequence, window: int, stride: int,
              levels: int = DEFAULT_LEVELS) -> list:
    """Slice a sequence into bags of ``window`` frames every ``stride`` frames.

    Windows start at offsets 0, stride, 2*stride, ... while they fit entirely
    inside the sequence; shorter sequences yield no bags. Each bag's weak
    label is the maximum quantized frame label within its window.
    """
    if window < 1 or stride < 1:
        raise ValueError(f"window and stride must be >= 1, got {window}, {stride}")
    n = len(seq)
    if seq.domain == SOURCE_DOMAIN:
        frame_levels = np.array(
            [level_from_continuous(v, levels) for v in seq.frame_labels])
    else:
        frame_levels = np.asarray(seq.frame_labels, dtype=np.int64)
    bags = []
    for start in range(0, n - window + 1, stride):
        stop = start + window
        bag = Bag(
            frames=seq.frames[start:stop],
            weak_label=int(frame_levels[start:stop].max()),
            parent=(seq.subject_id, seq.sequence_id, start),
            domain=seq.domain,
            frame_labels=(np.asarray(seq.frame_labels[start:stop], dtype=np.float64)
                          if seq.domain == SOURCE_DOMAIN else None),
        )
        bags.append(bag)
    return bags


def _as_pred_matrix(preds) -> np.ndarray:
    preds = np.asarray(preds, dtype=np.float64)
    if preds.ndim != 2 or preds.shape[0] == 0:
        raise ValueError(f"need a non-empty [frames, K] prediction matrix, got {preds.shape}")
    return preds


def relevant_frames(preds) -> tuple:
    """Indices of frames whose predicted level equals the bag maximum.

    Returns ``(indices, level)``. Per-frame predicted level is the argmax of
    its row (first index on within-row ties).
    """
    preds = _as_pred_matrix(preds)
    frame_levels = preds.argmax(axis=1)
    top = int(frame_levels.max())
    return np.flatnonzero(frame_levels == top), top


def max_pool(preds) -> tuple:
    """Prediction row of the single frame at the highest predicted level.

    Ties on the level are broken by the larger probability at that level,
    then by the earlier frame index. Returns ``(row, frame_index)``.
    """
    preds = _as_pred_matrix(preds)
    idx, top = relevant_frames(preds)
    best = idx[np.argmax(preds[idx, top])]  # argmax keeps the earliest on ties
    return preds[int(best)].copy(), int(best)


def adaptive_pool(preds) -> tuple:
    """Mean prediction row over all frames at the highest predicted level.

    Returns ``(pooled_row, n_relevant)``. On an all-neutral bag the maximum
    predicted level is 0 and the pool runs over every argmax-0 frame.
    """
    preds = _as_pred_matrix(preds)
    idx, _ = relevant_frames(preds)
    return preds[idx].mean(axis=0), int(idx.size)


def mean_pool(preds) -> np.ndarray:
    """Plain elementwise mean over all frames (ablation baseline)."""
    return _as_pred_matrix(preds).mean(axis=0)


POOLINGS = ("max", "adaptive", "mean")


def pool_rows(preds, mode: str) -> np.ndarray:
    """Dispatch to one of the pooling operators, returning just the row."""
    if mode == "max":
        return max_pool(preds)[0]
    if mode == "adaptive":
        return adaptive_pool(preds)[0]
    if mode == "mean":
        return mean_pool(preds)
    raise ValueError(f"unknown pooling {mode!r}, expected one of {POOLINGS}")


def pooling_indices(preds, mode: str) -> np.ndarray:
    """Frame indices the pooling mode averages over (for graph-side reuse)."""
    if mode == "max":
        return np.array([max_pool(preds)[1]])
    if mode == "adaptive":
        return relevant_frames(preds)[0]
    if mode == "mean":
        return np.arange(_as_pred_matrix(preds).shape[0])
    raise ValueError(f"unknown pooling {mode!r}, expected one of {POOLINGS}")
