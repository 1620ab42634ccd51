"""Hot loops of the Monte Carlo layer: per-trial test statistics.

Every public function dispatches to a numba-compiled loop when
``_accel.USE_NUMBA`` is set and to a vectorized numpy version otherwise.
Both paths return identical values up to floating-point summation order.
"""
from __future__ import annotations

import math

import numpy as np

from . import _accel

STAT_FIELDS = ("t23", "thr23", "t2", "thr2", "t1", "linf_ratio")


# ---------------------------------------------------------------- numpy path

def _linf_scale_np(y3: np.ndarray, k_bar: int) -> np.ndarray:
    q_hat = np.maximum(y3, 1) / k_bar
    lg = np.log(np.minimum(1.0 / q_hat, k_bar))
    return np.sqrt(q_hat * np.maximum(lg, 0.0) / k_bar) + math.log(k_bar) / k_bar


def batch_statistics_numpy(x: np.ndarray, y: np.ndarray, k_bar: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    d1 = (x[:, 0] - y[:, 0]).astype(np.float64)
    d2 = (x[:, 1] - y[:, 1]).astype(np.float64)
    y3 = y[:, 2]
    q_hat = np.maximum(y3, 1) / k_bar
    p_hat = np.maximum(x[:, 2], 1) / k_bar
    zero = (y3 == 0)
    prod = d1 * d2
    out = np.empty((x.shape[0], 6))
    out[:, 0] = np.sum(q_hat ** (-2.0 / 3.0) * prod, axis=1)
    y1 = y[:, 0].astype(np.float64)
    out[:, 1] = np.sqrt(k_bar ** (-2.0 / 3.0) * np.sum(y1 ** (2.0 / 3.0), axis=1)) + 1.0
    out[:, 2] = np.sum(prod * zero, axis=1)
    out[:, 3] = np.sqrt(np.sum(y1 * y[:, 1] * zero, axis=1)) + math.log(k_bar) ** 2
    out[:, 4] = np.sum(d1 * zero, axis=1)
    out[:, 5] = np.max(np.abs(p_hat - q_hat) / _linf_scale_np(y3, k_bar), axis=1)
    return out


def linf_witness_numpy(x3: np.ndarray, y3: np.ndarray, k_bar: int, c: float) -> int:
    q_hat = np.maximum(y3, 1) / k_bar
    p_hat = np.maximum(x3, 1) / k_bar
    hit = np.flatnonzero(np.abs(p_hat - q_hat) >= c * _linf_scale_np(y3, k_bar))
    return int(hit[0]) if hit.size else -1


# ---------------------------------------------------------------- numba path

@_accel.njit
def _batch_statistics_loop(x, y, k_bar):
    n = x.shape[0]
    d = x.shape[2]
    out = np.empty((n, 6))
    log_k = math.log(k_bar)
    kb23 = k_bar ** (-2.0 / 3.0)
    for t in range(n):
        t23 = 0.0
        y23 = 0.0
        t2 = 0.0
        yy = 0.0
        t1 = 0.0
        ratio = 0.0
        for i in range(d):
            d1 = float(x[t, 0, i] - y[t, 0, i])
            d2 = float(x[t, 1, i] - y[t, 1, i])
            y3 = y[t, 2, i]
            q_hat = max(y3, 1) / k_bar
            p_hat = max(x[t, 2, i], 1) / k_bar
            t23 += q_hat ** (-2.0 / 3.0) * d1 * d2
            y23 += float(y[t, 0, i]) ** (2.0 / 3.0)
            if y3 == 0:
                t2 += d1 * d2
                yy += float(y[t, 0, i]) * float(y[t, 1, i])
                t1 += d1
            lg = math.log(min(1.0 / q_hat, k_bar))
            if lg < 0.0:
                lg = 0.0
            scale = math.sqrt(q_hat * lg / k_bar) + log_k / k_bar
            r = abs(p_hat - q_hat) / scale
            if r > ratio:
                ratio = r
        out[t, 0] = t23
        out[t, 1] = math.sqrt(kb23 * y23) + 1.0
        out[t, 2] = t2
        out[t, 3] = math.sqrt(yy) + log_k * log_k
        out[t, 4] = t1
        out[t, 5] = ratio
    return out


@_accel.njit
def _linf_witness_loop(x3, y3, k_bar, c):
    log_k = math.log(k_bar)
    for i in range(x3.shape[0]):
        q_hat = max(y3[i], 1) / k_bar
        p_hat = max(x3[i], 1) / k_bar
        lg = math.log(min(1.0 / q_hat, k_bar))
        if lg < 0.0:
            lg = 0.0
        scale = math.sqrt(q_hat * lg / k_bar) + log_k / k_bar
        if abs(p_hat - q_hat) >= c * scale:
            return i
    return -1


# ---------------------------------------------------------------- dispatch

def batch_statistics(x: np.ndarray, y: np.ndarray, k_bar: int, use_numba=None) -> np.ndarray:
    """Statistics for a batch of trials.

    ``x``/``y`` have shape (n, 3, d). Returns an (n, 6) float array with
    columns :data:`STAT_FIELDS`; ``linf_ratio`` is the largest multiplier at
    which the coordinate-wise pre-test still rejects.
    """
    use = _accel.USE_NUMBA if use_numba is None else use_numba
    if use and _accel.USE_NUMBA:
        return _batch_statistics_loop(np.ascontiguousarray(x, dtype=np.int64),
                                      np.ascontiguousarray(y, dtype=np.int64),
                                      float(k_bar))
    return batch_statistics_numpy(x, y, k_bar)


def linf_witness(x3, y3, k_bar: int, c: float, use_numba=None) -> int:
    """First coordinate (0-based) where the pre-test fires at multiplier c; -1 if none."""
    use = _accel.USE_NUMBA if use_numba is None else use_numba
    if use and _accel.USE_NUMBA:
        return int(_linf_witness_loop(np.ascontiguousarray(x3, dtype=np.int64),
                                      np.ascontiguousarray(y3, dtype=np.int64),
                                      float(k_bar), float(c)))
    return linf_witness_numpy(np.asarray(x3), np.asarray(y3), k_bar, c)
