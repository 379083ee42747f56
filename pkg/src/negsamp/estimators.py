"""Working-model fits: plain, inverse-probability-weighted, and offset-corrected.

All three reduce to one concave objective,

    sum_i w_i * [y_i * (g_i + l_i) - log(1 + exp(g_i + l_i))],   g_i = alpha + x_i . beta,

with per-record weights w and offsets l.  The weighted fit uses l = 0 and
w = the inverse inclusion probability (one for positives, 1/pi(x) for kept
negatives); the corrected-likelihood fit uses w = 1 and l = -log(pi(x)) on
every record, positives included.  Offsetting the positives too is what makes
the corrected score exactly unbiased under keep-all-positives sampling: the
shifted probability satisfies p(1 - p_pi) = (1 - p) pi p_pi, which is the
zero-score identity record by record.

The solver is Newton with a Cholesky solve and step-halving; the accepted step
never decreases the objective, so the iterate path is monotone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from . import backend
from .errors import ConfigError, ContractError, EstimabilityError, FitError, SeparationError
from .model import Theta, _P_HI, _P_LO

_THETA_NORM_GUARD = 1e3
_MAX_HALVINGS = 30


@dataclass(frozen=True)
class FitSpec:
    """Per-record weights/offsets and solver knobs for fit_mle."""

    weights: np.ndarray | None = None
    offsets: np.ndarray | None = None
    tol: float = 1e-8
    max_iter: int = 100
    init: Theta | None = None


@dataclass(frozen=True)
class FitResult:
    theta_hat: Theta
    converged: bool
    iterations: int
    grad_norm: float
    neg_hessian: np.ndarray
    objective_path: tuple[float, ...] = ()

    def to_json(self) -> dict:
        return {
            "theta": {"alpha": self.theta_hat.alpha, "beta": self.theta_hat.beta.tolist()},
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "grad_norm": float(self.grad_norm),
        }


def fit_mle(data, spec: FitSpec | None = None) -> FitResult:
    """Maximize the weighted/offset logistic log-likelihood by damped Newton.

    `data` is anything with .x and .y (a Dataset or a Subsample).  Raises
    EstimabilityError when only one label value is present and
    SeparationError when the iterates diverge (complete separation guard).
    Non-convergence within max_iter is reported, not raised.
    """
    spec = spec or FitSpec()
    x = np.ascontiguousarray(data.x, dtype=np.float64)
    y = np.asarray(data.y, dtype=np.float64)
    n, d = x.shape
    if y.min() == y.max():
        raise EstimabilityError("both label values are required to fit an intercept")
    w = _vector(spec.weights, n, "weights", np.ones(n))
    if np.any(w <= 0):
        raise ContractError("weights must be strictly positive")
    l = _vector(spec.offsets, n, "offsets", np.zeros(n))
    if spec.init is not None:
        if spec.init.d != d:
            raise ContractError("init dimension does not match the design")
        theta = spec.init.as_vector()
    else:
        theta = np.zeros(d + 1)
    return _newton(x, y, w, l, theta, spec.tol, spec.max_iter)


def fit_ipw(sub, *, tol: float = 1e-8, max_iter: int = 100, init: Theta | None = None) -> FitResult:
    """Subsample fit weighting each record by its inverse inclusion probability.

    A positive always enters the subsample, so its weight is one no matter
    what sampling probability its covariates carry; negatives weight by the
    inverse of theirs.
    """
    pi = _check_pi(sub)
    w = np.where(sub.y == 1, 1.0, 1.0 / pi)
    spec = FitSpec(weights=w, tol=tol, max_iter=max_iter, init=init)
    return fit_mle(sub, spec)


def fit_lik(sub, *, tol: float = 1e-8, max_iter: int = 100, init: Theta | None = None) -> FitResult:
    """Subsample fit with the log-odds correction l = -log(pi) as an offset."""
    pi = _check_pi(sub)
    spec = FitSpec(offsets=-np.log(pi), tol=tol, max_iter=max_iter, init=init)
    return fit_mle(sub, spec)


def fit_lcc(sub, plan, *, tol: float = 1e-8, max_iter: int = 100) -> FitResult:
    """Case-control comparator: unweighted fit plus the classical additive
    correction from the pilot.

    The correction treats the inclusion probability as proportional to the
    pilot probability on the log scale, which is only approximate for
    keep-all-positives sampling; the estimator is kept as a comparator and is
    expected to carry that bias.
    """
    if plan.pilot is None:
        raise ConfigError("the case-control comparator needs the plan's pilot bundle")
    base = fit_mle(sub, FitSpec(tol=tol, max_iter=max_iter))
    tilt = plan.pilot.theta_tilde
    shift = math.log(plan.rho / plan.pilot.omega_tilde)
    corrected = Theta(base.theta_hat.alpha + tilt.alpha + shift, base.theta_hat.beta + tilt.beta)
    return replace(base, theta_hat=corrected)


def corrected_probability(theta: Theta, x, pi):
    """Pr(y=1 | x, kept): the model probability with offset -log(pi).

    With pi = 1 this is the plain model probability; smaller pi shifts the
    odds up by exactly the factor the sampling removed.
    """
    x_arr = np.asarray(x, dtype=np.float64)
    single = x_arr.ndim == 1
    rows = np.atleast_2d(x_arr)
    pi_arr = np.broadcast_to(np.asarray(pi, dtype=np.float64), (rows.shape[0],))
    if np.any((pi_arr <= 0.0) | (pi_arr > 1.0)):
        raise ContractError("pi must lie in (0, 1]")
    g = theta.alpha + rows @ theta.beta - np.log(pi_arr)
    p = backend.sigmoid(g)
    np.clip(p, _P_LO, _P_HI, out=p)
    return float(p[0]) if single else p


def _vector(v, n, name, default):
    if v is None:
        return default
    arr = np.asarray(v, dtype=np.float64)
    if arr.shape != (n,):
        raise ContractError(f"{name} must have length {n}")
    if not np.all(np.isfinite(arr)):
        raise ContractError(f"{name} must be finite")
    return arr


def _check_pi(sub):
    pi = np.asarray(sub.pi, dtype=np.float64)
    if np.any((pi <= 0.0) | (pi > 1.0)):
        raise ContractError("subsample inclusion probabilities must lie in (0, 1]")
    return pi


def _solve_step(hess, grad):
    jitter = 0.0
    k = grad.shape[0]
    while True:
        try:
            factor = cho_factor(hess + jitter * np.eye(k) if jitter else hess, lower=True)
            return cho_solve(factor, grad)
        except LinAlgError:
            if jitter >= 1.0:
                raise FitError("information matrix is not positive definite") from None
            jitter = 1e-10 if jitter == 0.0 else jitter * 1e3


def _newton(x, y, w, l, theta, tol, max_iter):
    obj, grad, hess = backend.logistic_obj_grad_hess(x, y, theta[0], theta[1:], w, l)
    path = [obj]
    grad_norm = float(np.abs(grad).max())
    iterations = 0
    while grad_norm > tol and iterations < max_iter:
        step = _solve_step(hess, grad)
        scale = 1.0
        accepted = False
        for _ in range(_MAX_HALVINGS + 1):
            cand = theta + scale * step
            cobj, cgrad, chess = backend.logistic_obj_grad_hess(x, y, cand[0], cand[1:], w, l)
            if math.isfinite(cobj):
                # Near the optimum the predicted gain sinks below the float
                # resolution of the summed objective, where the objective
                # comparison goes blind but the gradient still carries
                # signal: the full step is also accepted when it loses no
                # more than summation noise and cuts the gradient in half.
                # Without the near-tie guard that branch would embrace
                # objective-destroying excursions, since a runaway toward a
                # flat region shrinks the gradient too.  Damped steps must
                # actually move and improve, which keeps noise-level ties
                # from stalling the iteration in place.
                improved = cobj >= obj and not np.array_equal(cand, theta)
                near_tie = cobj >= obj - 1e-8 * (1.0 + abs(obj))
                shrank = (
                    scale == 1.0
                    and near_tie
                    and float(np.abs(cgrad).max()) <= 0.5 * grad_norm
                )
                if improved or shrank:
                    accepted = True
                    break
            scale *= 0.5
        if not accepted:
            break
        theta, obj, grad, hess = cand, cobj, cgrad, chess
        grad_norm = float(np.abs(grad).max())
        iterations += 1
        path.append(obj)
        if float(np.linalg.norm(theta)) > _THETA_NORM_GUARD:
            raise SeparationError(
                f"iterates diverged (|theta| > {_THETA_NORM_GUARD:g}); data is likely separable"
            )
    return FitResult(
        theta_hat=Theta.from_vector(theta),
        converged=grad_norm <= tol,
        iterations=iterations,
        grad_norm=grad_norm,
        neg_hessian=hess,
        objective_path=tuple(path),
    )
