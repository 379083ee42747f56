"""Binary-response log-odds models.

The working model is always linear in (alpha, beta).  A scaled-tanh two-layer
variant exists purely as a data generator for misspecification studies; it is
never fitted, so gradients are only defined for the linear kind.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import ContractError, DegenerateInputError, UnsupportedOperationError

LINEAR = "linear"
TANH_TWO_LAYER = "tanh-two-layer"

# probability() keeps the open interval (0,1) even where the float sigmoid
# would round to an endpoint (|g| beyond ~36)
_P_LO = np.nextafter(0.0, 1.0)
_P_HI = np.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class Theta:
    """Intercept and coefficient vector of a log-odds model."""

    alpha: float
    beta: np.ndarray

    def __post_init__(self):
        beta = np.atleast_1d(np.asarray(self.beta, dtype=np.float64))
        if beta.ndim != 1:
            raise ContractError("beta must be a vector")
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", beta)
        if not np.isfinite(self.alpha) or not np.all(np.isfinite(beta)):
            raise ContractError("theta entries must be finite")

    @property
    def d(self) -> int:
        return self.beta.shape[0]

    def as_vector(self) -> np.ndarray:
        return np.concatenate(([self.alpha], self.beta))

    @classmethod
    def from_vector(cls, v) -> "Theta":
        v = np.asarray(v, dtype=np.float64)
        return cls(float(v[0]), v[1:].copy())


@dataclass(frozen=True)
class LogOddsModel:
    """Model family tag: linear, or scaled-tanh two-layer (generation only)."""

    kind: str = LINEAR
    xi: float | None = None
    w: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == LINEAR:
            if self.xi is not None or self.w is not None:
                raise ContractError("linear models take no extra fields")
        elif self.kind == TANH_TWO_LAYER:
            if self.xi is None or self.w is None:
                raise ContractError("tanh-two-layer models need xi and w")
            if not self.xi > 0:
                raise ContractError("xi must be positive")
            w = np.asarray(self.w, dtype=np.float64)
            if w.ndim != 2 or w.shape[0] != w.shape[1] or not np.all(np.isfinite(w)):
                raise ContractError("w must be a finite square matrix")
            object.__setattr__(self, "w", w)
            object.__setattr__(self, "xi", float(self.xi))
        else:
            raise ContractError(f"unknown model kind {self.kind!r}")

    @classmethod
    def linear(cls) -> "LogOddsModel":
        return cls(LINEAR)

    @classmethod
    def tanh_two_layer(cls, xi: float, w) -> "LogOddsModel":
        return cls(TANH_TWO_LAYER, xi=xi, w=w)


@dataclass
class Dataset:
    """Dense feature matrix with binary labels and class counts."""

    x: np.ndarray
    y: np.ndarray
    n1: int = 0
    n0: int = 0

    def __post_init__(self):
        x = np.ascontiguousarray(self.x, dtype=np.float64)
        y = np.asarray(self.y)
        if x.ndim != 2:
            raise ContractError("x must be an (n, d) matrix")
        if y.shape != (x.shape[0],):
            raise ContractError("y length must match the number of rows of x")
        yv = y.astype(np.int8, copy=True)
        if not np.array_equal(np.asarray(y, dtype=np.float64), yv):
            raise ContractError("y entries must be 0 or 1")
        if np.any((yv != 0) & (yv != 1)):
            raise ContractError("y entries must be 0 or 1")
        self.x = x
        self.y = yv
        self.n1 = int(np.count_nonzero(yv))
        self.n0 = yv.shape[0] - self.n1
        if self.n1 < 1:
            raise DegenerateInputError("dataset has no positive instances")

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]


def _rows(x, d: int):
    """Coerce a single feature vector or a stack of rows to (m, d); remember
    whether the input was a single vector."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        if arr.shape[0] != d:
            raise ContractError(f"feature vector has length {arr.shape[0]}, expected {d}")
        return arr[None, :], True
    if arr.ndim == 2:
        if arr.shape[1] != d:
            raise ContractError(f"feature rows have width {arr.shape[1]}, expected {d}")
        return arr, False
    raise ContractError("x must be a vector or a matrix of rows")


def log_odds(model: LogOddsModel, theta: Theta, x):
    """alpha + f(x; beta) for one feature vector or a stack of rows."""
    rows, single = _rows(x, theta.d)
    if model.kind == LINEAR:
        g = theta.alpha + rows @ theta.beta
    else:
        if model.w.shape[0] != theta.d:
            raise ContractError("mixing matrix dimension does not match beta")
        g = theta.alpha + np.tanh(model.xi * (rows @ model.w)) @ theta.beta / model.xi
    return float(g[0]) if single else g


def probability(model: LogOddsModel, theta: Theta, x):
    """Pr(y=1 | x), clamped into the open interval (0, 1)."""
    rows, single = _rows(x, theta.d)
    p = backend.sigmoid(np.asarray(log_odds(model, theta, rows)))
    np.clip(p, _P_LO, _P_HI, out=p)
    return float(p[0]) if single else p


def grad_log_odds(model: LogOddsModel, theta: Theta, x):
    """Gradient (1, x) of the linear log-odds in (alpha, beta)."""
    if model.kind != LINEAR:
        raise UnsupportedOperationError("gradients are defined for the linear model only")
    rows, single = _rows(x, theta.d)
    out = np.empty((rows.shape[0], theta.d + 1))
    out[:, 0] = 1.0
    out[:, 1:] = rows
    return out[0] if single else out
