"""Single-pass probabilistic negative sampling.

Positives are always kept.  Each negative is kept independently when its
per-record uniform falls below the sampling probability, a clamped,
normalized transform of a scheme-specific score:

    pi(x) = min(max(rho * score(x) / omega, floor), 1)

Every retained record stores pi evaluated at its own covariates, positives
included: the corrected likelihood needs -log pi(x) as an offset on all
records, while a positive's chance of entering the subsample is always one.

Scores: the optimal scheme weights a record by its pilot-model probability
times the pilot-metric norm of the log-odds gradient; cheaper variants drop
the metric or the gradient norm entirely; the case-control comparator scores
by pilot probability alone; uniform scores every record equally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import streams
from .errors import ConfigError, ContractError, DegenerateInputError
from .model import Dataset, LogOddsModel, Theta, probability

UNIFORM = "uniform"
LCC = "lcc"
OPT_A = "opt_a"
OPT_L = "opt_l"
OPT_P = "opt_p"
SCHEMES = (UNIFORM, LCC, OPT_A, OPT_L, OPT_P)

_LINEAR = LogOddsModel.linear()


@dataclass(frozen=True)
class PilotBundle:
    """Pilot parameter, moment normalizer, and optional inverse pilot information."""

    theta_tilde: Theta
    omega_tilde: float = 1.0
    m_tilde_inv: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "omega_tilde", float(self.omega_tilde))
        if not (self.omega_tilde > 0 and math.isfinite(self.omega_tilde)):
            raise ContractError("omega_tilde must be a positive finite real")
        if self.m_tilde_inv is not None:
            m = np.asarray(self.m_tilde_inv, dtype=np.float64)
            k = self.theta_tilde.d + 1
            if m.shape != (k, k) or not np.all(np.isfinite(m)):
                raise ContractError("m_tilde_inv must be a finite (d+1, d+1) matrix")
            if not np.allclose(m, m.T, rtol=1e-8, atol=1e-12):
                raise ContractError("m_tilde_inv must be symmetric")
            object.__setattr__(self, "m_tilde_inv", m)


@dataclass(frozen=True)
class SamplingPlan:
    scheme: str
    rho: float
    floor: float = 0.0
    pilot: PilotBundle | None = None
    truncation_t: float = math.inf

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        object.__setattr__(self, "rho", float(self.rho))
        object.__setattr__(self, "floor", float(self.floor))
        object.__setattr__(self, "truncation_t", float(self.truncation_t))
        if not (0.0 < self.rho <= 1.0):
            raise ConfigError("rho must be in (0, 1]")
        if not (0.0 <= self.floor < 1.0):
            raise ConfigError("floor must be in [0, 1)")
        if self.floor > 0.0 and not self.floor < self.rho:
            raise ConfigError("a positive floor must stay below rho")
        if not self.truncation_t > 0.0:
            raise ConfigError("truncation_t must be positive (use inf to disable)")
        if self.scheme != UNIFORM and self.pilot is None:
            raise ConfigError(f"scheme {self.scheme!r} requires a pilot bundle")


@dataclass
class Subsample:
    """Retained records, each carrying the sampling probability at its covariates."""

    x: np.ndarray
    y: np.ndarray
    pi: np.ndarray

    def __post_init__(self):
        self.x = np.ascontiguousarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int8)
        self.pi = np.asarray(self.pi, dtype=np.float64)
        m = self.y.shape[0]
        if self.x.ndim != 2 or self.x.shape[0] != m or self.pi.shape != (m,):
            raise ContractError("x, y, pi must agree on the number of records")
        if np.any((self.pi <= 0.0) | (self.pi > 1.0)):
            raise ContractError("sampling probabilities must lie in (0, 1]")

    @property
    def m(self) -> int:
        return self.y.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]


def score_t(plan: SamplingPlan, x):
    """Scheme score for one feature vector or a stack of rows (nonnegative)."""
    single = np.asarray(x).ndim == 1
    if plan.scheme == UNIFORM:
        n = 1 if single else np.asarray(x).shape[0]
        out = np.ones(n)
        return float(out[0]) if single else out
    pilot = plan.pilot
    theta = pilot.theta_tilde
    rows = np.atleast_2d(np.asarray(x, dtype=np.float64))
    p = probability(_LINEAR, theta, rows)
    if plan.scheme in (OPT_P, LCC):
        s = p
    elif plan.scheme == OPT_L:
        s = p * np.sqrt(1.0 + np.einsum("ij,ij->i", rows, rows))
    else:  # OPT_A
        if pilot.m_tilde_inv is None:
            raise ConfigError("the A-optimal scheme needs m_tilde_inv in the pilot bundle")
        aug = np.empty((rows.shape[0], theta.d + 1))
        aug[:, 0] = 1.0
        aug[:, 1:] = rows
        proj = aug @ pilot.m_tilde_inv
        s = p * np.sqrt(np.einsum("ij,ij->i", proj, proj))
    return float(s[0]) if single else s


def sampling_probability(plan: SamplingPlan, x):
    """Probability that a negative at covariates x is kept under the plan."""
    single = np.asarray(x).ndim == 1
    if plan.scheme == UNIFORM:
        n = 1 if single else np.asarray(x).shape[0]
        out = np.full(n, plan.rho)
    else:
        s = np.atleast_1d(score_t(plan, x))
        if math.isfinite(plan.truncation_t):
            s = np.minimum(s, plan.truncation_t)
        out = np.clip(plan.rho * s / plan.pilot.omega_tilde, plan.floor, 1.0)
    return float(out[0]) if single else out


def solve_truncation(scores, rho: float) -> float:
    """Largest cap T with rho * T <= mean(min(scores, T)).

    Returns infinity when the cap is unnecessary, i.e. when
    rho * max(scores) <= mean(scores) already holds, which is the typical
    deeply imbalanced case.  Otherwise bisects h(T) = rho*T - mean(min(s, T))
    to 1e-10 relative tolerance; h is convex with h(0) = 0, so the largest
    root is the unique crossing below max(scores).
    """
    s = np.asarray(scores, dtype=np.float64)
    if s.size == 0:
        raise ContractError("scores must be nonempty")
    if not np.all(np.isfinite(s)) or np.any(s < 0):
        raise ContractError("scores must be finite and nonnegative")
    if not (0.0 < rho <= 1.0):
        raise ContractError("rho must be in (0, 1]")
    if not np.any(s > 0):
        raise DegenerateInputError("all scores are zero; no truncation constant exists")
    smax = float(s.max())
    mean = float(s.mean())
    if rho * smax <= mean:
        return math.inf

    def h(t):
        return rho * t - float(np.minimum(s, t).mean())

    lo = mean if h(mean) <= 0.0 else 0.0
    hi = smax
    for _ in range(200):
        if hi - lo <= 1e-10 * hi:
            break
        mid = 0.5 * (lo + hi)
        if h(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
    return lo


def draw_subsample(data: Dataset, plan: SamplingPlan, rng_seed: int) -> Subsample:
    """One pass over records in index order; deterministic for a fixed seed.

    Record i's uniform is a pure function of (rng_seed, i), so partitioning the
    pass across workers cannot change the outcome.
    """
    if plan.pilot is not None and plan.pilot.theta_tilde.d != data.d:
        raise ContractError("pilot dimension does not match the dataset")
    pi = np.atleast_1d(sampling_probability(plan, data.x))
    return _keep(data, pi, rng_seed)


def draw_with_probabilities(data: Dataset, pi, rng_seed: int) -> Subsample:
    """Like draw_subsample but with one explicit sampling probability per
    record (index order); positives are kept regardless and store theirs."""
    pi = np.asarray(pi, dtype=np.float64)
    if pi.shape != (data.n,):
        raise ContractError("pi must hold one probability per record")
    if np.any((pi < 0.0) | (pi > 1.0)):
        raise ContractError("sampling probabilities must lie in [0, 1]")
    return _keep(data, pi, rng_seed)


def _keep(data, pi, rng_seed):
    # u < pi agrees with u <= pi almost surely and never keeps a
    # zero-probability record even when u == 0.0 exactly
    u = streams.record_uniforms(rng_seed, data.n)
    keep = (data.y == 1) | (u < pi)
    return Subsample(x=data.x[keep], y=data.y[keep], pi=pi[keep])
