"""Plug-in asymptotic variances for the three estimators.

All expectations over the covariate law are replaced by empirical means over
the supplied dataset.  With f(x) = x'beta and gdot(x) = (1, x):

    M_f   = mean of e^f gdot gdot'
    V_f   = mean(e^f) * M_f^{-1}
    V_sub = c_hat * mean(e^f) * M_f^{-1} [mean of e^{2f} gdot gdot' / phi] M_f^{-1}
    V_w   = V_f + V_sub
    Lam   = mean of e^f gdot gdot' / (1 + c_hat e^f / phi)
    V_lik = mean(e^f) * Lam^{-1}

where phi(x) is the sampling plan's acceptance shape pi(x)/rho and
c_hat = e^alpha / rho.  Setting c_hat = 0 collapses all three to V_f, the
equality case of the ordering V_f <= V_lik <= V_w.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .backend import sigmoid, weighted_gram
from .errors import ConditioningError, ContractError
from .model import Dataset, Theta
from .sampling import SamplingPlan, sampling_probability, solve_truncation

_COND_LIMIT = 1e12


def _sym_inv(mat: np.ndarray, label: str) -> np.ndarray:
    cond = np.linalg.cond(mat)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise ConditioningError(f"{label} is near-singular (condition number {cond:.3e})")
    try:
        factor = cho_factor(mat, lower=True)
    except LinAlgError as exc:
        raise ConditioningError(f"{label} is not positive definite: {exc}") from exc
    inv = cho_solve(factor, np.eye(mat.shape[0]))
    return 0.5 * (inv + inv.T)


@dataclass(frozen=True)
class VarianceReport:
    v_f: np.ndarray
    v_w: np.ndarray
    v_lik: np.ndarray
    c_hat: float
    theta_source: str = "truth"
    traces: tuple = field(init=False)

    def __post_init__(self):
        for name in ("v_f", "v_w", "v_lik"):
            m = np.asarray(getattr(self, name), dtype=np.float64)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ContractError(f"{name} must be a square matrix")
            object.__setattr__(self, name, m)
        if not self.c_hat >= 0:
            raise ContractError("c_hat must be nonnegative")
        object.__setattr__(
            self,
            "traces",
            (float(np.trace(self.v_f)), float(np.trace(self.v_w)), float(np.trace(self.v_lik))),
        )

    def to_json(self) -> dict:
        return {
            "v_f": self.v_f.tolist(),
            "v_w": self.v_w.tolist(),
            "v_lik": self.v_lik.tolist(),
            "traces": {
                "v_f": self.traces[0],
                "v_w": self.traces[1],
                "v_lik": self.traces[2],
            },
            "c_hat": self.c_hat,
            "theta_source": self.theta_source,
        }


def plugin_mf(data: Dataset, theta: Theta) -> np.ndarray:
    """Empirical mean of e^{x'beta} gdot(x) gdot(x)'."""
    if theta.d != data.d:
        raise ContractError("theta dimension does not match the data")
    ef = np.exp(data.x @ theta.beta)
    return weighted_gram(data.x, ef) / data.n


def plugin_variances(
    data: Dataset,
    theta: Theta,
    plan: SamplingPlan,
    *,
    c_hat: float | None = None,
    theta_source: str = "truth",
) -> VarianceReport:
    """Plug-in V_f, V_w, V_lik for a sampling plan evaluated at theta.

    phi is read off the plan's acceptance probability on every data record,
    so the report describes the design actually used, floors and truncation
    included.  c_hat defaults to e^alpha / rho; passing c_hat=0 gives the
    no-subsampling limit in which all three matrices coincide.
    """
    if theta.d != data.d:
        raise ContractError("theta dimension does not match the data")
    if c_hat is None:
        c_hat = float(np.exp(theta.alpha) / plan.rho)
    if not (np.isfinite(c_hat) and c_hat >= 0):
        raise ContractError("c_hat must be a finite nonnegative real")

    f = data.x @ theta.beta
    ef = np.exp(f)
    mean_ef = float(ef.mean())
    phi = sampling_probability(plan, data.x) / plan.rho

    mf = weighted_gram(data.x, ef) / data.n
    mf_inv = _sym_inv(mf, "M_f")
    v_f = mean_ef * mf_inv

    middle = weighted_gram(data.x, ef * ef / phi) / data.n
    v_sub = c_hat * mean_ef * (mf_inv @ middle @ mf_inv)
    v_w = v_f + 0.5 * (v_sub + v_sub.T)

    lam = weighted_gram(data.x, ef / (1.0 + c_hat * ef / phi)) / data.n
    v_lik = mean_ef * _sym_inv(lam, "Lambda_lik")

    return VarianceReport(v_f=v_f, v_w=v_w, v_lik=v_lik, c_hat=c_hat, theta_source=theta_source)


def mse(estimates, truth: Theta) -> float:
    """Mean squared Euclidean distance of estimates from the truth."""
    thetas = list(estimates)
    if not thetas:
        raise ContractError("mse needs at least one estimate")
    target = truth.as_vector()
    total = 0.0
    for est in thetas:
        v = est.as_vector() if isinstance(est, Theta) else np.asarray(est, dtype=np.float64)
        if v.shape != target.shape:
            raise ContractError("estimate dimension does not match the truth")
        diff = v - target
        total += float(diff @ diff)
    return total / len(thetas)


def verify_opt_phi(data: Dataset, theta: Theta, rho: float, grid=(0.0, 0.5, 1.0, 2.0)) -> dict:
    """Compare trace(V_w) across acceptance shapes phi proportional to t^a.

    t is the A-optimal score p(x) * ||M_f^{-1} gdot(x)|| evaluated at theta,
    so a=1 is the shape the theory says minimizes trace(V_w), a=0 is uniform
    sampling, and the other exponents are deliberate distortions.  Each
    candidate is truncated at its own feasibility threshold and rescaled to
    empirical mean one before the plug-in variance is formed.
    """
    exponents = [float(a) for a in grid]
    if 1.0 not in exponents:
        raise ContractError("the exponent grid must contain 1.0, the theoretical optimum")
    if not 0 < rho <= 1:
        raise ContractError("rho must lie in (0, 1]")
    if theta.d != data.d:
        raise ContractError("theta dimension does not match the data")

    f = data.x @ theta.beta
    ef = np.exp(f)
    mean_ef = float(ef.mean())
    mf_inv = _sym_inv(weighted_gram(data.x, ef) / data.n, "M_f")
    c_hat = float(np.exp(theta.alpha) / rho)

    p = sigmoid(theta.alpha + f)
    aug = np.column_stack([np.ones(data.n), data.x])
    t = p * np.sqrt(np.einsum("ij,ij->i", aug @ mf_inv, aug @ mf_inv))

    traces = {}
    thresholds = {}
    for a in exponents:
        s = np.ones(data.n) if a == 0.0 else t**a
        cap = solve_truncation(s, rho)
        if np.isfinite(cap):
            s = np.minimum(s, cap)
        phi = s / s.mean()
        thresholds[a] = cap

        middle = weighted_gram(data.x, ef * ef / phi) / data.n
        v_w = mean_ef * mf_inv + c_hat * mean_ef * (mf_inv @ middle @ mf_inv)
        traces[a] = float(np.trace(v_w))

    argmin = min(traces, key=traces.get)
    best = traces[argmin]
    return {
        "exponents": exponents,
        "traces": traces,
        "thresholds": thresholds,
        "argmin": argmin,
        "optimal_attains_min": traces[1.0] <= best * (1.0 + 1e-6),
        "c_hat": c_hat,
    }
