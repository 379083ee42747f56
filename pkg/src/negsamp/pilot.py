"""Balanced uniform pilot: draw, fit, normalizer, and perturbations.

The pilot supplies everything a nonuniform plan needs: a parameter estimate
theta_tilde, the inverse pilot information (the metric used by the A-optimal
score), and the moment normalizer omega_tilde that rescales scores so the
expected negative inclusion probability is rho.

The pilot fit is a plain unweighted MLE on the balanced sample; its intercept
is therefore shifted relative to the population, deliberately so.  The shift
cancels between numerator and normalizer when forming score/omega ratios, so
sampling probabilities are unaffected.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import streams
from .errors import ConfigError, ContractError, DegenerateInputError, FitError
from .estimators import FitSpec, fit_mle
from .model import Dataset, Theta
from .sampling import SCHEMES, UNIFORM, PilotBundle, SamplingPlan, score_t

ADD_UNIFORM = "add_uniform"
INTERCEPT_SHIFT = "intercept_shift"
BETA_NOISE = "beta_noise"
PERTURB_KINDS = (ADD_UNIFORM, INTERCEPT_SHIFT, BETA_NOISE)


@dataclass(frozen=True)
class Perturb:
    kind: str
    scale: float

    def __post_init__(self):
        if self.kind not in PERTURB_KINDS:
            raise ConfigError(f"unknown perturbation {self.kind!r}; choose from {PERTURB_KINDS}")
        object.__setattr__(self, "scale", float(self.scale))
        if not (self.scale >= 0 and math.isfinite(self.scale)):
            raise ConfigError("perturbation scale must be a nonnegative real")


@dataclass(frozen=True)
class PilotConfig:
    per_class_size: int = 100
    perturb: Perturb | None = None

    def __post_init__(self):
        if int(self.per_class_size) < 1:
            raise ConfigError("per_class_size must be at least 1")
        object.__setattr__(self, "per_class_size", int(self.per_class_size))


def draw_pilot(data: Dataset, cfg: PilotConfig, seed: int) -> Dataset:
    """Uniform sample with equal expected size from each class."""
    if data.n1 == 0 or data.n0 == 0:
        raise DegenerateInputError("both classes must be nonempty to draw a pilot")
    if cfg.per_class_size < data.d + 1:
        raise ContractError("per_class_size below d+1 cannot identify the pilot fit")
    p1 = min(1.0, cfg.per_class_size / data.n1)
    p0 = min(1.0, cfg.per_class_size / data.n0)
    u = streams.record_uniforms(seed, data.n)
    pos = data.y == 1
    keep = (pos & (u < p1)) | (~pos & (u < p0))
    if not np.any(keep & ~pos):
        raise DegenerateInputError("pilot draw contains no negatives; increase per_class_size")
    return Dataset(x=data.x[keep], y=data.y[keep])


def fit_pilot(pilot_data: Dataset, *, tol: float = 1e-8, max_iter: int = 100):
    """Unweighted MLE on the pilot plus the inverse observed information.

    Near-singular information (condition number above 1e12) falls back to a
    pseudo-inverse with a warning; non-convergence is an error because every
    downstream probability depends on this fit.
    """
    result = fit_mle(pilot_data, FitSpec(tol=tol, max_iter=max_iter))
    if not result.converged:
        raise FitError(
            f"pilot fit did not converge: gradient norm {result.grad_norm:.3e} "
            f"after {result.iterations} iterations on {pilot_data.n} records"
        )
    info = result.neg_hessian
    cond = np.linalg.cond(info)
    if not np.isfinite(cond) or cond > 1e12:
        warnings.warn(
            f"pilot information is near-singular (condition {cond:.3e}); using pseudo-inverse",
            RuntimeWarning,
            stacklevel=2,
        )
        m_inv = np.linalg.pinv(info, hermitian=True)
    else:
        m_inv = np.linalg.inv(info)
    m_inv = 0.5 * (m_inv + m_inv.T)
    return result.theta_hat, m_inv


def compute_omega(data: Dataset, pilot: Dataset, scores_fn) -> float:
    """Two-class moment normalizer from pilot scores.

    omega = 2*N1/(n_tilde*N) * sum of positive-pilot scores
          + 2*N0/(n_tilde*N) * sum of negative-pilot scores,

    an estimate of the population mean score that reweights each pilot class
    back to its population share.
    """
    t = np.asarray(scores_fn(pilot.x), dtype=np.float64)
    if t.shape != (pilot.n,):
        raise ContractError("scores_fn must return one score per pilot record")
    if np.any(~np.isfinite(t)) or np.any(t < 0):
        raise ContractError("pilot scores must be finite and nonnegative")
    n_tilde = pilot.n
    pos = pilot.y == 1
    omega = 2.0 * data.n1 * float(t[pos].sum()) / (n_tilde * data.n) + 2.0 * data.n0 * float(
        t[~pos].sum()
    ) / (n_tilde * data.n)
    if not omega > 0:
        raise DegenerateInputError("pilot scores sum to zero in both classes")
    return omega


def perturb_pilot(
    theta_tilde: Theta, mode: Perturb | None, seed: int, log_imbalance: float | None = None
) -> Theta:
    """Inject a seeded misspecification into the pilot estimate.

    add_uniform(s): independent U(0, s) added to every coordinate.
    intercept_shift(xi): alpha += xi * U(0,1) * log_imbalance, where
    log_imbalance is log(N0/N1) of the population being sampled.
    beta_noise(xi): beta += xi * standard normal vector.
    """
    if mode is None:
        return theta_tilde
    rng = streams.generator(seed)
    if mode.kind == ADD_UNIFORM:
        v = theta_tilde.as_vector() + rng.uniform(0.0, mode.scale, theta_tilde.d + 1)
        return Theta.from_vector(v)
    if mode.kind == INTERCEPT_SHIFT:
        if log_imbalance is None:
            raise ConfigError("intercept_shift needs log_imbalance = log(N0/N1)")
        shift = mode.scale * rng.random() * float(log_imbalance)
        return Theta(theta_tilde.alpha + shift, theta_tilde.beta)
    noise = mode.scale * rng.standard_normal(theta_tilde.d)
    return Theta(theta_tilde.alpha, theta_tilde.beta + noise)


def build_bundles(
    data: Dataset,
    cfg: PilotConfig,
    schemes,
    draw_seed: int,
    perturb_seed: int,
) -> dict:
    """One pilot draw and fit, then a per-scheme bundle with its own normalizer.

    The uniform scheme needs no pilot and maps to None.
    """
    for s in schemes:
        if s not in SCHEMES:
            raise ConfigError(f"unknown scheme {s!r}")
    wanted = [s for s in schemes if s != UNIFORM]
    bundles = {s: None for s in schemes if s == UNIFORM}
    if not wanted:
        return bundles
    pilot_data = draw_pilot(data, cfg, draw_seed)
    theta_tilde, m_inv = fit_pilot(pilot_data)
    theta_tilde = perturb_pilot(
        theta_tilde, cfg.perturb, perturb_seed, log_imbalance=math.log(data.n0 / data.n1)
    )
    base = PilotBundle(theta_tilde, 1.0, m_inv)
    for scheme in wanted:
        probe = SamplingPlan(scheme, rho=1.0, pilot=base)
        omega = compute_omega(data, pilot_data, lambda rows, p=probe: score_t(p, rows))
        bundles[scheme] = PilotBundle(theta_tilde, omega, m_inv)
    return bundles


def build_pilot(data: Dataset, cfg: PilotConfig, scheme: str, seed: int) -> PilotBundle:
    """Convenience wrapper: draw, fit, perturb, and normalize for one scheme."""
    if scheme == UNIFORM:
        raise ConfigError("the uniform scheme does not use a pilot")
    draw_seed = streams.derive_seed(seed, 0)
    perturb_seed = streams.derive_seed(seed, 1)
    return build_bundles(data, cfg, (scheme,), draw_seed, perturb_seed)[scheme]
