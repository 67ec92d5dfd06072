"""Numpy implementations of the hot kernels; used when the compiled module is unavailable."""

import numpy as np

HARD, RATIO, SIGMOID, SOFTPLUS_RATIO = 0, 1, 2, 3

_CHUNK = 1 << 14


def cut_values_all(W, nbits=None):
    """Cut value of every subset, indexed by bitmask (bit ``i`` set means item ``i`` in S).

    With ``nbits`` only masks below ``2**nbits`` are produced (items ``>= nbits`` excluded).
    """
    W = np.ascontiguousarray(W, dtype=np.float64)
    n = W.shape[0]
    total = 1 << (n if nbits is None else nbits)
    out = np.empty(total)
    shifts = np.arange(n, dtype=np.int64)
    for lo in range(0, total, _CHUNK):
        masks = np.arange(lo, min(lo + _CHUNK, total), dtype=np.int64)
        B = ((masks[:, None] >> shifts) & 1).astype(np.float64)
        out[lo:lo + len(masks)] = ((B @ W) * (1.0 - B)).sum(axis=1)
    return out


def _log_softplus(z):
    # log(log1p(e^z)); the series keeps it finite when the softplus underflows
    out = np.empty_like(z)
    lo = z < -30.0
    pos = z > 0
    mid = ~lo & ~pos
    out[lo] = z[lo] - 0.5 * np.exp(z[lo])
    out[pos] = np.log(z[pos] + np.log1p(np.exp(-z[pos])))
    out[mid] = np.log(np.log1p(np.exp(z[mid])))
    return out


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def link_prob(code, a, b, t):
    if code == HARD:
        return (a >= b).astype(np.float64)
    if code == RATIO:
        ap = np.maximum(a, 0.0)
        bp = np.maximum(b, 0.0)
        den = ap + bp
        safe = np.where(den > 0, den, 1.0)
        return np.where(den > 0, ap / safe, 0.5)
    if code == SIGMOID:
        return _sigmoid((a - b) / t)
    if code == SOFTPLUS_RATIO:
        return _sigmoid(_log_softplus(a / t) - _log_softplus(b / t))
    raise ValueError(f"unknown link code {code}")


def dgreedy_sample_cut(W, order, code, t, U):
    """Run double greedy on a cut function once per row of uniforms ``U``.

    Returns a ``(runs, n)`` uint8 matrix of inclusion indicators by item index.
    Item ``order[i]`` is included iff ``U[r, i] < g(a_i, b_i)``.
    """
    W = np.ascontiguousarray(W, dtype=np.float64)
    U = np.asarray(U, dtype=np.float64)
    runs, n = U.shape
    deg = W.sum(axis=1)
    dX = np.zeros((runs, n))
    dY = np.tile(deg, (runs, 1))
    x = np.zeros((runs, n), dtype=np.uint8)
    for i, e in enumerate(order):
        a = deg[e] - 2.0 * dX[:, e]
        b = 2.0 * dY[:, e] - deg[e]
        inc = U[:, i] < link_prob(code, a, b, t)
        x[:, e] = inc
        dX[inc] += W[e]
        dY[~inc] -= W[e]
    return x
