"""Independent oracles shared by the test modules.

Everything here deliberately avoids the code paths under test: gradients come
from central finite differences, pooling from plain-Python enumeration, and
the agreement metrics from their definitional (mean-centered / ANOVA) forms
rather than the computational formulas the library uses.
"""

from __future__ import annotations

import math

import numpy as np

from ordadapt.autodiff import Tensor


def relative_error(approx, exact) -> float:
    """Norm-based relative difference, safe when both sides are near zero."""
    approx = np.asarray(approx, dtype=np.float64).reshape(-1)
    exact = np.asarray(exact, dtype=np.float64).reshape(-1)
    scale = max(float(np.linalg.norm(approx) + np.linalg.norm(exact)), 1e-8)
    return float(np.linalg.norm(approx - exact) / scale)


def numeric_gradient(f, arrays, index, eps=1e-6) -> np.ndarray:
    """Central-difference gradient of scalar ``f(arrays)`` wrt ``arrays[index]``."""
    base = [np.array(a, dtype=np.float64) for a in arrays]
    grad = np.zeros_like(base[index])
    flat = base[index].reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f(base)
        flat[i] = orig - eps
        lo = f(base)
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * eps)
    return grad


def gradient_check(build, arrays, eps=1e-6) -> float:
    """Worst relative error between autodiff and finite-difference gradients.

    ``build(tensors)`` must assemble a scalar Tensor from leaf tensors whose
    values are ``arrays``. Each finite-difference probe rebuilds the graph
    from scratch, so nothing is shared with the autodiff pass.
    """
    leaves = [Tensor(a) for a in arrays]
    root = build(leaves)
    root.backward()

    def forward(values) -> float:
        return build([Tensor(v) for v in values]).item()

    worst = 0.0
    for i in range(len(arrays)):
        fd = numeric_gradient(forward, arrays, i, eps)
        worst = max(worst, relative_error(leaves[i].grad, fd))
    return worst


# -- pooling oracles (pure-Python enumeration) -------------------------------

def _row_argmax(row) -> int:
    best = 0
    for k in range(1, len(row)):
        if row[k] > row[best]:
            best = k
    return best


def brute_relevant(preds):
    """Frames whose per-row argmax level equals the bag maximum, by loops."""
    rows = [[float(v) for v in row] for row in preds]
    levels = [_row_argmax(row) for row in rows]
    top = max(levels)
    return [i for i, lvl in enumerate(levels) if lvl == top], top


def brute_max_pool(preds):
    """Single best frame: highest level, then larger probability there,
    then the earlier index. Returns ``(row, index)``."""
    rows = [[float(v) for v in row] for row in preds]
    idx, top = brute_relevant(rows)
    best = idx[0]
    for i in idx[1:]:
        if rows[i][top] > rows[best][top]:
            best = i
    return rows[best], best


def brute_adaptive_pool(preds):
    """Elementwise mean over the relevant frames. Returns ``(row, indices)``."""
    rows = [[float(v) for v in row] for row in preds]
    idx, _ = brute_relevant(rows)
    k = len(rows[0])
    pooled = [sum(rows[i][j] for i in idx) / len(idx) for j in range(k)]
    return pooled, idx


# -- metric oracles (definitional forms) -------------------------------------

def oracle_pcc(y, h) -> float:
    """Pearson correlation from mean-centered sums."""
    y = [float(v) for v in y]
    h = [float(v) for v in h]
    n = len(y)
    my = sum(y) / n
    mh = sum(h) / n
    num = sum((a - my) * (b - mh) for a, b in zip(y, h))
    dy = math.sqrt(sum((a - my) ** 2 for a in y))
    dh = math.sqrt(sum((b - mh) ** 2 for b in h))
    if dy == 0.0 or dh == 0.0:
        return math.nan
    return num / (dy * dh)


def oracle_icc(y, h) -> float:
    """Consistency ICC from the two-rater ANOVA mean squares.

    With per-target means m_i and k = 2 raters,
        BMS = 2 * sum((m_i - mean(m))^2) / (n - 1)
        EMS = sum((y_i - h_i)^2) / (2n)
    and the score is (BMS - EMS) / (BMS + EMS).
    """
    y = [float(v) for v in y]
    h = [float(v) for v in h]
    n = len(y)
    m = [(a + b) / 2.0 for a, b in zip(y, h)]
    grand = sum(m) / n
    bms = 2.0 * sum((v - grand) ** 2 for v in m) / (n - 1)
    ems = sum((a - b) ** 2 for a, b in zip(y, h)) / (2.0 * n)
    if bms + ems == 0.0:
        return math.nan
    return (bms - ems) / (bms + ems)


def oracle_mae(y, h) -> float:
    return sum(abs(float(a) - float(b)) for a, b in zip(y, h)) / len(y)


# -- label-code oracle -------------------------------------------------------

def direct_gaussian(label, sigma, levels, normalize=False) -> np.ndarray:
    """Literal entry-by-entry evaluation of the Gaussian soft code."""
    vals = [math.exp(-((k - label) ** 2) / (2.0 * sigma * sigma))
            for k in range(levels)]
    if normalize:
        total = sum(vals)
        vals = [v / total for v in vals]
    return np.array(vals, dtype=np.float64)
