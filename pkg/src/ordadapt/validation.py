"""Input validation helpers shared by the estimator and the CLI."""

from __future__ import annotations

import numpy as np

from .bags import SOURCE_DOMAIN, TARGET_DOMAIN, Sequence


def as_float_matrix(X, name: str = "X") -> np.ndarray:
    """Coerce to a finite 2-D float64 array or raise a descriptive error."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    return arr


def as_label_vector(y, n: int | None = None, name: str = "y") -> np.ndarray:
    arr = np.asarray(y, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if n is not None and arr.size != n:
        raise ValueError(f"{name} has {arr.size} entries, expected {n}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_sequences(sequences, name: str = "sequences") -> list:
    """Validate a non-empty list of Sequence with one shared feature width."""
    seqs = list(sequences)
    if not seqs:
        raise ValueError(f"{name} must contain at least one sequence")
    dims = set()
    for i, seq in enumerate(seqs):
        if not isinstance(seq, Sequence):
            raise TypeError(f"{name}[{i}] is {type(seq).__name__}, expected Sequence")
        dims.add(seq.frames.shape[1])
    if len(dims) != 1:
        raise ValueError(f"{name} mixes feature dimensions {sorted(dims)}")
    return seqs


def split_domains(sequences):
    """Partition a sequence list into (source, target) by the domain flag."""
    source = [s for s in sequences if s.domain == SOURCE_DOMAIN]
    target = [s for s in sequences if s.domain == TARGET_DOMAIN]
    return source, target
