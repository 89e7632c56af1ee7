"""Agreement metrics between predicted and reference intensity series.

Three scores are used throughout: Pearson correlation (PCC), a consistency
form of the intraclass correlation built from between- and error-mean-squares
(ICC), and mean absolute error (MAE). PCC ignores scale and location shifts;
ICC penalizes them; MAE reads in label units.

PCC and ICC are undefined on constant series. Those cases come back as NaN
with a flag on the per-sequence record and are excluded from averages instead
of being silently counted as zero agreement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LEVELS = ("frame", "sequence")
AGGREGATES = ("mean", "pooled")


@dataclass(frozen=True)
class PairMetrics:
    """Scores of one prediction/reference series pair."""

    pcc: float
    icc: float
    mae: float
    flagged: bool  # True when pcc/icc are undefined for this pair


@dataclass(frozen=True)
class MetricsReport:
    pcc: float
    icc: float
    mae: float
    level: str
    per_sequence: tuple


def _series_pair(y, h, min_len: int):
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    h = np.asarray(h, dtype=np.float64).reshape(-1)
    if y.shape != h.shape:
        raise ValueError(f"series lengths differ: {y.shape[0]} vs {h.shape[0]}")
    if y.shape[0] < min_len:
        raise ValueError(f"need at least {min_len} points, got {y.shape[0]}")
    return y, h


def is_constant(x) -> bool:
    x = np.asarray(x)
    return bool(np.all(x == x.reshape(-1)[0]))


def pcc(y, h) -> float:
    """Pearson correlation via the computational formula.

    [n*sum(yh) - sum(y)sum(h)] / sqrt([n*sum(y^2)-sum(y)^2][n*sum(h^2)-sum(h)^2])

    Returns NaN when either series is constant (zero variance).
    """
    y, h = _series_pair(y, h, 2)
    n = y.shape[0]
    num = n * np.dot(y, h) - y.sum() * h.sum()
    var_y = n * np.dot(y, y) - y.sum() ** 2
    var_h = n * np.dot(h, h) - h.sum() ** 2
    if var_y <= 0 or var_h <= 0:
        return math.nan
    return float(num / math.sqrt(var_y * var_h))


def icc31(y, h) -> float:
    """Two-rater intraclass correlation (BMS - EMS) / (BMS + EMS).

    With n paired observations,
        BMS = [n*sum((y+h)^2) - (sum(y)+sum(h))^2] / (2n(n-1))
        EMS = [2*sum(y^2) + 2*sum(h^2) - sum((y+h)^2)] / (2n)
    Unlike PCC this is sensitive to shifts and rescalings of either series.
    Returns NaN when BMS + EMS = 0 (the ratio is undefined).
    """
    y, h = _series_pair(y, h, 2)
    n = y.shape[0]
    s = y + h
    ss = np.dot(s, s)
    bms = (n * ss - s.sum() ** 2) / (2.0 * n * (n - 1))
    ems = (2.0 * np.dot(y, y) + 2.0 * np.dot(h, h) - ss) / (2.0 * n)
    denom = bms + ems
    if denom == 0:
        return math.nan
    return float((bms - ems) / denom)


def mae(y, h) -> float:
    """Mean absolute difference."""
    y, h = _series_pair(y, h, 1)
    return float(np.abs(y - h).mean())


def _pair_metrics(y, h) -> PairMetrics:
    flagged = y.shape[0] < 2 or is_constant(y) or is_constant(h)
    if flagged:
        return PairMetrics(math.nan, math.nan, mae(y, h), True)
    return PairMetrics(pcc(y, h), icc31(y, h), mae(y, h), False)


def evaluate(predictions, references, level: str = "frame",
             aggregate: str = "mean") -> MetricsReport:
    """Score a list of per-sequence prediction series against references.

    level is descriptive: "frame" for per-frame intensity traces,
    "sequence" for per-bag level series. aggregate picks between
    per-sequence metrics averaged with equal weight ("mean", robust to
    unequal lengths) and one computation over the concatenated series
    ("pooled"). Pairs where PCC/ICC are undefined are excluded from the
    averaged correlation values; MAE is always averaged over all pairs.
    """
    if level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}, got {level!r}")
    if aggregate not in AGGREGATES:
        raise ValueError(f"aggregate must be one of {AGGREGATES}, got {aggregate!r}")
    if len(predictions) == 0:
        raise ValueError("evaluate needs at least one sequence")
    if len(predictions) != len(references):
        raise ValueError(
            f"got {len(predictions)} prediction series but "
            f"{len(references)} reference series")

    pairs = []
    for pred, ref in zip(predictions, references):
        h, y = _series_pair(pred, ref, 1)
        pairs.append(_pair_metrics(y, h))
    per_sequence = tuple(pairs)

    if aggregate == "pooled":
        h_all = np.concatenate([np.asarray(p, dtype=np.float64).reshape(-1)
                                for p in predictions])
        y_all = np.concatenate([np.asarray(r, dtype=np.float64).reshape(-1)
                                for r in references])
        pooled = _pair_metrics(y_all, h_all)
        return MetricsReport(pooled.pcc, pooled.icc, pooled.mae, level, per_sequence)

    pcc_vals = [p.pcc for p in pairs if not p.flagged]
    icc_vals = [p.icc for p in pairs if not p.flagged]
    mean_pcc = float(np.mean(pcc_vals)) if pcc_vals else math.nan
    mean_icc = float(np.mean(icc_vals)) if icc_vals else math.nan
    mean_mae = float(np.mean([p.mae for p in pairs]))
    return MetricsReport(mean_pcc, mean_icc, mean_mae, level, per_sequence)
