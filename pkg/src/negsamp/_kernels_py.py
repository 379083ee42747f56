"""Numpy implementations of the hot kernels.

Same contracts as the compiled core in ``_core.pyx``; ``backend`` picks one at
import.  Everything here is pure and allocation-light so fits on a few hundred
thousand rows stay cheap even without the extension.
"""

from __future__ import annotations

import numpy as np

NAME = "python"


def sigmoid(g: np.ndarray) -> np.ndarray:
    """Stable logistic function, branch form, no overflow for any finite g."""
    g = np.asarray(g, dtype=np.float64)
    out = np.empty_like(g)
    pos = g >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-g[pos]))
    eg = np.exp(g[~pos])
    out[~pos] = eg / (1.0 + eg)
    return out


def log1pexp(g: np.ndarray) -> np.ndarray:
    """log(1 + exp(g)) without overflow; exact tail for large g."""
    g = np.asarray(g, dtype=np.float64)
    out = np.empty_like(g)
    big = g > 33.0  # beyond this log1p(exp(-g)) underflows anyway
    pos = (g >= 0) & ~big
    neg = g < 0
    out[big] = g[big]
    out[pos] = g[pos] + np.log1p(np.exp(-g[pos]))
    out[neg] = np.log1p(np.exp(g[neg]))
    return out


def logistic_obj_grad_hess(x, y, alpha, beta, weights, offsets):
    """Weighted, offset logistic log-likelihood with gradient and information.

    Returns (objective, gradient, negative Hessian) of
    sum_i w_i * [y_i * (g_i + l_i) - log(1 + exp(g_i + l_i))]
    at g_i = alpha + x_i . beta, as functions of (alpha, beta).  The negative
    Hessian is the observed information sum_i w_i p_i (1 - p_i) gdot gdot^T
    with gdot = (1, x_i).
    """
    eta = x @ beta
    eta += alpha
    eta += offsets
    p = sigmoid(eta)
    obj = float(np.dot(weights, y * eta - log1pexp(eta)))
    r = weights * (y - p)
    d = x.shape[1]
    grad = np.empty(d + 1)
    grad[0] = r.sum()
    grad[1:] = x.T @ r
    q = weights * p * (1.0 - p)
    hess = _gram(x, q)
    return obj, grad, hess


def weighted_gram(x, w):
    """sum_i w_i (1, x_i)(1, x_i)^T as a dense (d+1, d+1) matrix."""
    return _gram(np.asarray(x, dtype=np.float64), np.asarray(w, dtype=np.float64))


def _gram(x, w):
    d = x.shape[1]
    out = np.empty((d + 1, d + 1))
    out[0, 0] = w.sum()
    xw = x.T @ w
    out[0, 1:] = xw
    out[1:, 0] = xw
    out[1:, 1:] = x.T @ (x * w[:, None])
    return out
