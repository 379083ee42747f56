"""Replicated simulation studies.

Four runners cover the simulation suite: a rho-sweep MSE comparison of the
estimators, a scaling study of the full-data MLE variance, a sensitivity
sweep over the probability floor, and a two-layer generator that bends the
true log-odds away from the linear working model.  Reports carry per-cell
MSE plus the raw per-replication squared errors so paired comparisons keep
their replication pairing.

Seed discipline: replication r of a run with master seed s derives all of
its streams from (s, r, slot).  Slot 0 is the dataset, slot 1 the pilot
draw, slot 2 the pilot perturbation, and slots 3.. the subsample draws,
indexed by (scheme, grid position) over the full scheme list so that adding
or removing methods never shifts the streams of the remaining ones.
"""

from __future__ import annotations

import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy
from scipy.stats import rankdata

from . import streams
from .backend import BACKEND, sigmoid
from .errors import (
    ConfigError,
    ContractError,
    DegenerateInputError,
    EstimabilityError,
    FitError,
    SeparationError,
)
from .estimators import fit_ipw, fit_lcc, fit_lik, fit_mle
from .model import Dataset, LogOddsModel, Theta, log_odds
from .pilot import PilotConfig, build_bundles
from .sampling import (
    LCC,
    OPT_A,
    OPT_L,
    OPT_P,
    UNIFORM,
    SamplingPlan,
    draw_subsample,
    draw_with_probabilities,
    score_t,
)

NORMAL = "normal"
LOGNORMAL = "lognormal"
T3 = "t3"
EXPONENTIAL = "exponential"
FAMILIES = (NORMAL, LOGNORMAL, T3, EXPONENTIAL)

DEFAULT_ALPHA = {NORMAL: -7.65, LOGNORMAL: -0.5, T3: -7.0, EXPONENTIAL: -1.8}

FULL = "Full"
UNI_W = "uniW"
UNI_LIK = "uniLik"
OPT_W = "optW"
OPT_LIK = "optLik"
LCC_METHOD = "LCC"
METHODS = (FULL, UNI_W, UNI_LIK, OPT_W, OPT_LIK, LCC_METHOD)

_METHOD_SCHEME = {
    UNI_W: UNIFORM,
    UNI_LIK: UNIFORM,
    OPT_W: OPT_A,
    OPT_LIK: OPT_A,
    LCC_METHOD: LCC,
}

# fixed slot order for subsample streams, independent of the method subset
_SCHEME_ORDER = (UNIFORM, OPT_A, OPT_L, OPT_P, LCC)

RHO_GRID = (0.002, 0.004, 0.006, 0.01, 0.02)

TABLE1_PAIRS = ((1_000, 32), (10_000, 64), (100_000, 128), (1_000_000, 256))


@dataclass(frozen=True)
class Design:
    covariate: str
    n: int
    d: int = 6
    beta_true: np.ndarray | None = None
    alpha_true: float | None = None
    target_ratio: float = 1.0 / 400.0

    def __post_init__(self):
        if self.covariate not in FAMILIES:
            raise ConfigError(f"unknown covariate family {self.covariate!r}")
        object.__setattr__(self, "n", int(self.n))
        if self.n < 1_000:
            raise ContractError("design population size must be at least 1000")
        object.__setattr__(self, "d", int(self.d))
        if self.d < 1:
            raise ContractError("design dimension must be positive")
        beta = (
            np.ones(self.d)
            if self.beta_true is None
            else np.ascontiguousarray(self.beta_true, dtype=np.float64)
        )
        if beta.shape != (self.d,) or not np.all(np.isfinite(beta)):
            raise ContractError("beta_true must be a finite vector of length d")
        object.__setattr__(self, "beta_true", beta)
        alpha = DEFAULT_ALPHA[self.covariate] if self.alpha_true is None else float(self.alpha_true)
        if not math.isfinite(alpha):
            raise ContractError("alpha_true must be finite")
        object.__setattr__(self, "alpha_true", alpha)
        if not 0 < self.target_ratio < 1:
            raise ContractError("target_ratio must lie in (0, 1)")

    @property
    def truth(self) -> Theta:
        return Theta(self.alpha_true, self.beta_true)

    def to_json(self) -> dict:
        return {
            "covariate": self.covariate,
            "n": self.n,
            "d": self.d,
            "beta_true": self.beta_true.tolist(),
            "alpha_true": self.alpha_true,
            "target_ratio": self.target_ratio,
        }


def _draw_covariates(rng: np.random.Generator, family: str, n: int, d: int) -> np.ndarray:
    if family == NORMAL:
        return rng.standard_normal((n, d))
    if family == LOGNORMAL:
        return np.exp(rng.standard_normal((n, d)))
    if family == T3:
        return rng.standard_t(3, size=(n, d))
    return rng.exponential(1.0, size=(n, d))


def generate(design: Design, seed: int, *, model: LogOddsModel | None = None):
    """Draw covariates and Bernoulli responses; returns (Dataset, truth).

    A draw with zero positives is retried with a fresh derived stream, at
    most ten times.  The optional model replaces the linear log-odds while
    keeping (alpha_true, beta_true) as the reported pseudo-truth.
    """
    truth = design.truth
    if model is None:
        model = LogOddsModel.linear()
    for attempt in range(10):
        rng = streams.generator(streams.derive_seed(seed, attempt))
        x = _draw_covariates(rng, design.covariate, design.n, design.d)
        p = sigmoid(log_odds(model, truth, x))
        y = (rng.random(design.n) < p).astype(np.int8)
        if y.any():
            return Dataset(x=x, y=y), truth
    raise DegenerateInputError(
        f"no positive responses in 10 attempts (n={design.n}, alpha={truth.alpha})"
    )


def calibrate_alpha(
    design: Design,
    seed: int,
    *,
    model: LogOddsModel | None = None,
    probe_n: int = 1_000_000,
    tol: float = 0.02,
) -> float:
    """Intercept giving the design's target positive:negative ratio.

    Bisection on alpha over [-50, 10] against the mean response probability
    of a single probe sample; the mean is continuous and strictly increasing
    in alpha, so the bracket check is the only failure mode.
    """
    rng = streams.generator(seed)
    x = _draw_covariates(rng, design.covariate, int(probe_n), design.d)
    base = Theta(0.0, design.beta_true)
    s = log_odds(model, base, x) if model is not None else x @ design.beta_true
    target = design.target_ratio / (1.0 + design.target_ratio)

    lo, hi = -50.0, 10.0
    if float(sigmoid(lo + s).mean()) > target or float(sigmoid(hi + s).mean()) < target:
        raise ConfigError(
            f"target ratio {design.target_ratio} is outside the bracket [-50, 10] "
            f"for the {design.covariate} design"
        )
    alpha = 0.5 * (lo + hi)
    for _ in range(100):
        alpha = 0.5 * (lo + hi)
        mean = float(sigmoid(alpha + s).mean())
        if abs(mean - target) <= 0.5 * tol * target:
            return alpha
        if mean > target:
            hi = alpha
        else:
            lo = alpha
    mean = float(sigmoid(alpha + s).mean())
    if abs(mean - target) > tol * target:
        raise ConfigError("intercept calibration did not reach the requested tolerance")
    return alpha


def auc(y, scores) -> float:
    """Rank-based area under the ROC curve (ties get average ranks)."""
    y = np.asarray(y)
    scores = np.asarray(scores, dtype=np.float64)
    if y.shape != scores.shape or y.ndim != 1:
        raise ContractError("labels and scores must be aligned vectors")
    pos = y == 1
    n1 = int(pos.sum())
    n0 = y.size - n1
    if n1 == 0 or n0 == 0:
        raise DegenerateInputError("AUC needs both classes present")
    ranks = rankdata(scores)
    u = float(ranks[pos].sum()) - 0.5 * n1 * (n1 + 1)
    return u / (n1 * n0)


@dataclass(frozen=True)
class ExperimentReport:
    kind: str
    config: dict
    axis_name: str
    axis: tuple
    methods: tuple
    replications: int
    master_seed: int
    cells: dict
    sq_errors: np.ndarray
    runtime_s: float
    extra: dict = field(default_factory=dict)

    def method_index(self, method: str) -> int:
        try:
            return self.methods.index(method)
        except ValueError:
            raise ContractError(f"method {method!r} not in this report") from None

    def cell(self, method: str, axis_value) -> dict:
        j = self.axis.index(axis_value)
        return self.cells[(method, j)]

    def to_csv_text(self) -> str:
        lines = [f"method,{self.axis_name},mse,n_ok,n_fail,valid"]
        for m in self.methods:
            for j, v in enumerate(self.axis):
                c = self.cells[(m, j)]
                lines.append(
                    f"{m},{v!r},{c['mse']!r},{c['n_ok']},{c['n_fail']},"
                    f"{'true' if c['valid'] else 'false'}"
                )
        return "\n".join(lines) + "\n"

    def manifest(self) -> dict:
        invalid = [
            [m, self.axis[j]] for (m, j), c in sorted(self.cells.items()) if not c["valid"]
        ]
        return {
            "schema": 1,
            "kind": self.kind,
            "config": self.config,
            "axis_name": self.axis_name,
            "axis": list(self.axis),
            "methods": list(self.methods),
            "replications": self.replications,
            "master_seed": self.master_seed,
            "invalid_cells": invalid,
            "backend": BACKEND,
            "versions": _versions(),
            "runtime_s": self.runtime_s,
            "extra": self.extra,
        }

    def write(self, outdir) -> None:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.csv").write_text(self.to_csv_text())
        (out / "manifest.json").write_text(json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n")


def paired_mse_diff(report: ExperimentReport, method_a: str, method_b: str, axis_value):
    """(mean, stderr, pairs) of per-replication squared-error differences."""
    j = report.axis.index(axis_value)
    a = report.sq_errors[report.method_index(method_a), j]
    b = report.sq_errors[report.method_index(method_b), j]
    mask = np.isfinite(a) & np.isfinite(b)
    k = int(mask.sum())
    if k < 2:
        raise DegenerateInputError("fewer than two paired replications survived")
    d = a[mask] - b[mask]
    return float(d.mean()), float(d.std(ddof=1) / math.sqrt(k)), k


def _versions() -> dict:
    try:
        from importlib.metadata import version

        own = version("negsamp")
    except Exception:
        own = "0+unknown"
    return {
        "negsamp": own,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": sys.version.split()[0],
    }


def _resolve_workers(workers) -> int:
    if workers is None:
        workers = os.environ.get("NEGSAMP_WORKERS", "1")
    workers = int(workers)
    if workers < 1:
        raise ConfigError("worker count must be at least 1")
    return workers


def _map_reps(job, payloads, workers: int):
    if workers == 1:
        return [job(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, payloads))


def _check_methods(methods):
    methods = tuple(methods)
    if not methods:
        raise ConfigError("at least one method is required")
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}; choose from {METHODS}")
    if len(set(methods)) != len(methods):
        raise ConfigError("duplicate method names")
    return methods


def _subsample_slot(scheme: str, grid_len: int, j: int) -> int:
    return 3 + _SCHEME_ORDER.index(scheme) * grid_len + j


def _fit_sq(kind, sub, plan, truth_vec, init: Theta | None):
    """Squared error of one subsample fit, or NaN when the fit fails."""
    try:
        if kind in (UNI_W, OPT_W):
            res = fit_ipw(sub, init=init)
        elif kind in (UNI_LIK, OPT_LIK):
            res = fit_lik(sub, init=init)
        else:
            res = fit_lcc(sub, plan)
        if not res.converged:
            return math.nan
        diff = res.theta_hat.as_vector() - truth_vec
        return float(diff @ diff)
    except (FitError, SeparationError, EstimabilityError, DegenerateInputError):
        return math.nan


def _sweep_rep(payload):
    (design, grid, methods, pilot_cfg, master_seed, r, floor, model, truth_vec) = payload
    data, truth = generate(design, streams.derive_seed(master_seed, r, 0), model=model)
    if truth_vec is None:
        truth_vec = truth.as_vector()

    need = sorted({_METHOD_SCHEME[m] for m in methods if m != FULL and _METHOD_SCHEME[m] != UNIFORM})
    bundles = {}
    pilot_failed = False
    if need:
        try:
            bundles = build_bundles(
                data,
                pilot_cfg or PilotConfig(),
                need,
                streams.derive_seed(master_seed, r, 1),
                streams.derive_seed(master_seed, r, 2),
            )
        except (FitError, SeparationError, DegenerateInputError, EstimabilityError):
            pilot_failed = True

    out = np.full((len(methods), len(grid)), np.nan)

    if FULL in methods:
        i = methods.index(FULL)
        try:
            res = fit_mle(data, None)
            if res.converged:
                diff = res.theta_hat.as_vector() - truth_vec
                out[i, :] = float(diff @ diff)
        except (FitError, SeparationError, EstimabilityError):
            pass

    subsamples = {}
    for i, m in enumerate(methods):
        if m == FULL:
            continue
        scheme = _METHOD_SCHEME[m]
        needs_pilot = scheme != UNIFORM
        if needs_pilot and pilot_failed:
            continue
        for j, rho in enumerate(grid):
            key = (scheme, j)
            if key not in subsamples:
                try:
                    plan = SamplingPlan(
                        scheme,
                        rho=rho,
                        floor=floor if needs_pilot else 0.0,
                        pilot=bundles.get(scheme),
                    )
                    seed = streams.derive_seed(
                        master_seed, r, _subsample_slot(scheme, len(grid), j)
                    )
                    subsamples[key] = (draw_subsample(data, plan, seed), plan)
                except DegenerateInputError:
                    subsamples[key] = None
            if subsamples[key] is None:
                continue
            sub, plan = subsamples[key]
            init = None
            if needs_pilot and m != LCC_METHOD:
                init = bundles[scheme].theta_tilde
            out[i, j] = _fit_sq(m, sub, plan, truth_vec, init)
    return out


def _assemble(kind, config, axis_name, axis, methods, reps, seed, sq, t0, extra=None):
    cells = {}
    for i, m in enumerate(methods):
        for j in range(len(axis)):
            col = sq[i, j]
            n_fail = int(np.isnan(col).sum())
            n_ok = reps - n_fail
            cells[(m, j)] = {
                "mse": float(np.nanmean(col)) if n_ok else math.nan,
                "n_ok": n_ok,
                "n_fail": n_fail,
                "valid": n_fail <= 0.05 * reps,
            }
    return ExperimentReport(
        kind=kind,
        config=config,
        axis_name=axis_name,
        axis=tuple(float(v) for v in axis),
        methods=methods,
        replications=reps,
        master_seed=seed,
        cells=cells,
        sq_errors=sq,
        runtime_s=time.perf_counter() - t0,
        extra=extra or {},
    )


def run_mse_sweep(
    design: Design,
    rho_grid,
    methods,
    R: int,
    pilot_cfg: PilotConfig | None = None,
    seed: int = 0,
    *,
    floor: float = 1e-6,
    model: LogOddsModel | None = None,
    truth: Theta | None = None,
    workers=None,
) -> ExperimentReport:
    """MSE of the selected estimators across subsampling rates.

    Each replication draws a fresh population and pilot, subsamples once per
    (scheme, rho), and fits every method on the shared subsample of its
    scheme.  Failed fits contribute NaN; a cell is flagged invalid when more
    than 5% of its replications failed.
    """
    t0 = time.perf_counter()
    methods = _check_methods(methods)
    grid = tuple(float(v) for v in rho_grid)
    if not grid:
        raise ConfigError("rho grid must be nonempty")
    for rho in grid:
        if not 0 < rho <= 1:
            raise ContractError("every rho must lie in (0, 1]")
        if any(_METHOD_SCHEME.get(m) not in (None, UNIFORM) for m in methods) and not (
            0 <= floor < rho
        ):
            raise ContractError("floor must satisfy 0 <= floor < rho for the whole grid")
    if len(set(grid)) != len(grid):
        raise ConfigError("duplicate rho values")
    if R < 1:
        raise ConfigError("replication count must be positive")
    workers = _resolve_workers(workers)
    truth_vec = truth.as_vector() if truth is not None else None

    payloads = [
        (design, grid, methods, pilot_cfg, seed, r, float(floor), model, truth_vec)
        for r in range(R)
    ]
    rows = _map_reps(_sweep_rep, payloads, workers)
    sq = np.stack(rows, axis=-1)

    config = {
        "design": design.to_json(),
        "floor": float(floor),
        "pilot": _pilot_json(pilot_cfg),
        "model": _model_json(model),
        "truth": None if truth is None else {"alpha": truth.alpha, "beta": truth.beta.tolist()},
    }
    return _assemble("mse_sweep", config, "rho", grid, methods, R, seed, sq, t0)


def _pilot_json(cfg: PilotConfig | None):
    if cfg is None:
        return None
    pert = None if cfg.perturb is None else {"kind": cfg.perturb.kind, "scale": cfg.perturb.scale}
    return {"per_class_size": cfg.per_class_size, "perturb": pert}


def _model_json(model: LogOddsModel | None):
    if model is None or model.kind == "linear":
        return None
    return {"kind": model.kind, "xi": model.xi, "w": model.w.tolist()}


@dataclass(frozen=True)
class Table1Report:
    kind: str
    correct: bool
    rows: tuple
    replications: int
    master_seed: int
    config: dict
    runtime_s: float

    def to_csv_text(self) -> str:
        lines = ["n,n1a,alpha,trace,n1a_trace,n_trace,n_ok,n_fail"]
        for row in self.rows:
            lines.append(
                f"{row['n']},{row['n1a']},{row['alpha']!r},{row['trace']!r},"
                f"{row['n1a_trace']!r},{row['n_trace']!r},{row['n_ok']},{row['n_fail']}"
            )
        return "\n".join(lines) + "\n"

    def manifest(self) -> dict:
        return {
            "schema": 1,
            "kind": self.kind,
            "correct": self.correct,
            "config": self.config,
            "replications": self.replications,
            "master_seed": self.master_seed,
            "failures": {str(row["n"]): row["n_fail"] for row in self.rows},
            "backend": BACKEND,
            "versions": _versions(),
            "runtime_s": self.runtime_s,
        }

    def write(self, outdir) -> None:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.csv").write_text(self.to_csv_text())
        (out / "manifest.json").write_text(json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n")


def run_table1(
    correct: bool = True,
    seed: int = 0,
    *,
    pairs=None,
    reps: int = 100,
    d: int = 2,
    include_largest: bool = False,
) -> Table1Report:
    """Scaling of the full-data MLE variance as positives grow slower than N.

    For each (N, expected positives) pair the intercept is calibrated so the
    expected positive count matches, then the empirical variance trace of the
    MLE over replications is reported together with its N1- and N-scalings.
    The miscalibrated branch draws responses from the log-odds of log(x) and
    fits the linear working model on x, so the fitted model is wrong there.
    """
    t0 = time.perf_counter()
    if pairs is None:
        pairs = TABLE1_PAIRS if include_largest else TABLE1_PAIRS[:3]
    if reps < 2:
        raise ConfigError("at least two replications are needed for a variance")
    rows = []
    for i, (n, n1a) in enumerate(pairs):
        n = int(n)
        n1a = int(n1a)
        if not 0 < n1a < n:
            raise ConfigError("expected positive count must lie strictly inside (0, n)")
        design = Design(
            NORMAL, n=n, d=d, alpha_true=0.0, target_ratio=n1a / (n - n1a)
        )
        alpha = calibrate_alpha(design, streams.derive_seed(seed, i, 0))
        design = Design(NORMAL, n=n, d=d, alpha_true=alpha, target_ratio=n1a / (n - n1a))
        estimates = []
        n_fail = 0
        for r in range(reps):
            data, _ = generate(design, streams.derive_seed(seed, i, 1, r))
            if not correct:
                data = Dataset(x=np.exp(data.x), y=data.y)
            try:
                res = fit_mle(data, None)
            except (FitError, SeparationError, EstimabilityError):
                n_fail += 1
                continue
            if not res.converged:
                n_fail += 1
                continue
            estimates.append(res.theta_hat.as_vector())
        if len(estimates) < 2:
            raise DegenerateInputError(f"too few successful fits for pair (n={n}, n1a={n1a})")
        trace = float(np.trace(np.cov(np.stack(estimates), rowvar=False, ddof=1)))
        rows.append(
            {
                "n": n,
                "n1a": n1a,
                "alpha": alpha,
                "trace": trace,
                "n1a_trace": n1a * trace,
                "n_trace": n * trace,
                "n_ok": len(estimates),
                "n_fail": n_fail,
            }
        )
    return Table1Report(
        kind="table1",
        correct=bool(correct),
        rows=tuple(rows),
        replications=reps,
        master_seed=seed,
        config={"pairs": [[int(a), int(b)] for a, b in pairs], "d": d},
        runtime_s=time.perf_counter() - t0,
    )


def _floor_rep(payload):
    (design, rho, floors, methods, pilot_cfg, master_seed, r) = payload
    data, truth = generate(design, streams.derive_seed(master_seed, r, 0))
    truth_vec = truth.as_vector()

    need = sorted({_METHOD_SCHEME[m] for m in methods if _METHOD_SCHEME[m] != UNIFORM})
    bundles = {}
    pilot_failed = False
    if need:
        try:
            bundles = build_bundles(
                data,
                pilot_cfg or PilotConfig(),
                need,
                streams.derive_seed(master_seed, r, 1),
                streams.derive_seed(master_seed, r, 2),
            )
        except (FitError, SeparationError, DegenerateInputError, EstimabilityError):
            pilot_failed = True

    out = np.full((len(methods), len(floors)), np.nan)
    neg = data.y == 0
    scores = {}
    for scheme in need:
        if not pilot_failed:
            probe = SamplingPlan(scheme, rho=1.0, pilot=bundles[scheme])
            scores[scheme] = score_t(probe, data.x)

    subsamples = {}
    for i, m in enumerate(methods):
        scheme = _METHOD_SCHEME[m]
        needs_pilot = scheme != UNIFORM
        if needs_pilot and pilot_failed:
            continue
        for j, floor in enumerate(floors):
            key = (scheme, j)
            if key not in subsamples:
                seed = streams.derive_seed(master_seed, r, _subsample_slot(scheme, len(floors), j))
                try:
                    if not needs_pilot:
                        plan = SamplingPlan(UNIFORM, rho=rho)
                        subsamples[key] = (draw_subsample(data, plan, seed), plan)
                    else:
                        pi = _floored_probabilities(scores[scheme], neg, rho, floor)
                        plan = SamplingPlan(scheme, rho=rho, pilot=bundles[scheme])
                        subsamples[key] = (draw_with_probabilities(data, pi, seed), plan)
                except DegenerateInputError:
                    subsamples[key] = None
            if subsamples[key] is None:
                continue
            sub, plan = subsamples[key]
            init = bundles[scheme].theta_tilde if needs_pilot else None
            out[i, j] = _fit_sq(m, sub, plan, truth_vec, init)
    return out


def _floored_probabilities(scores, neg, rho: float, floor: float) -> np.ndarray:
    """Acceptance probabilities clip(m*t, floor, 1) with m set so the
    negative-class mean is rho.

    Raising the floor eats sampling budget, so the score multiplier is
    recalibrated against the empirical acceptance rate over negatives; at
    floor == rho the multiplier hits zero and the draw degenerates to uniform
    sampling.  `scores` covers every record so that the returned vector does
    too, but only the rows flagged by `neg` enter the calibration.
    """
    lo, hi = 0.0, 1.0
    g = lambda m: float(np.clip(m * scores[neg], floor, 1.0).mean()) - rho
    if g(lo) > 1e-12:
        raise ContractError("floor exceeds rho; no multiplier can hit the target rate")
    tries = 0
    while g(hi) < 0:
        hi *= 2.0
        tries += 1
        if tries > 200:
            raise DegenerateInputError("scores too degenerate to reach the target rate")
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
    return np.clip(0.5 * (lo + hi) * scores, floor, 1.0)


def run_floor_sensitivity(
    design: Design,
    rho: float,
    floor_grid,
    R: int,
    seed: int = 0,
    *,
    pilot_cfg: PilotConfig | None = None,
    methods=(UNI_W, UNI_LIK, OPT_W, OPT_LIK),
    workers=None,
) -> ExperimentReport:
    """MSE of floored score sampling as the floor rises toward rho.

    The multiplier recalibration keeps the average acceptance probability at
    rho for every floor, so cells are comparable; at the largest admissible
    floor the design collapses to uniform sampling and the report's extra
    block records the paired comparison against the uniform cells.
    """
    t0 = time.perf_counter()
    methods = _check_methods(methods)
    if FULL in methods:
        raise ConfigError("the full-data fit has no floor to sweep")
    if not 0 < rho <= 1:
        raise ContractError("rho must lie in (0, 1]")
    floors = tuple(float(v) for v in floor_grid)
    if not floors:
        raise ConfigError("floor grid must be nonempty")
    if list(floors) != sorted(floors) or len(set(floors)) != len(floors):
        raise ContractError("floor grid must be strictly ascending")
    if floors[0] <= 0 or floors[-1] > rho:
        raise ContractError("floors must lie in (0, rho]")
    if R < 1:
        raise ConfigError("replication count must be positive")
    workers = _resolve_workers(workers)

    payloads = [(design, float(rho), floors, methods, pilot_cfg, seed, r) for r in range(R)]
    rows = _map_reps(_floor_rep, payloads, workers)
    sq = np.stack(rows, axis=-1)

    config = {
        "design": design.to_json(),
        "rho": float(rho),
        "pilot": _pilot_json(pilot_cfg),
    }
    report = _assemble("floor_sensitivity", config, "floor", floors, methods, R, seed, sq, t0)

    extra = {}
    last = floors[-1]
    for opt_m, uni_m in ((OPT_W, UNI_W), (OPT_LIK, UNI_LIK)):
        if opt_m in methods and uni_m in methods:
            diff, stderr, k = paired_mse_diff(report, opt_m, uni_m, last)
            extra[f"uniform_match_{opt_m}"] = {"diff": diff, "stderr": stderr, "pairs": k}
    report.extra.update(extra)
    return report


def run_model_misspec(
    xi: float,
    xi_w: float,
    designs,
    R: int,
    seed: int = 0,
    *,
    rho_grid=RHO_GRID,
    methods=(UNI_W, UNI_LIK, OPT_W, OPT_LIK),
    pilot_cfg: PilotConfig | None = None,
    floor: float = 1e-6,
    workers=None,
) -> dict:
    """Sweeps under a saturating two-layer generator, one report per design.

    The generator is alpha + tanh(xi * x W) beta / xi with W = I plus xi_w
    scaled off-diagonal noise; the intercept is recalibrated per design so
    the class imbalance stays at the design target, and MSE is measured
    against the generator's own (alpha, beta).
    """
    if not xi > 0:
        raise ContractError("xi must be positive")
    if xi_w < 0:
        raise ContractError("xi_w must be nonnegative")
    out = {}
    for idx, design in enumerate(designs):
        rng = streams.generator(streams.derive_seed(seed, idx, 0))
        w = np.eye(design.d)
        if xi_w > 0:
            off = rng.standard_normal((design.d, design.d))
            np.fill_diagonal(off, 0.0)
            w = w + xi_w * off
        model = LogOddsModel.tanh_two_layer(xi, w)
        alpha = calibrate_alpha(design, streams.derive_seed(seed, idx, 1), model=model)
        recal = Design(
            design.covariate,
            n=design.n,
            d=design.d,
            beta_true=design.beta_true,
            alpha_true=alpha,
            target_ratio=design.target_ratio,
        )
        report = run_mse_sweep(
            recal,
            rho_grid,
            methods,
            R,
            pilot_cfg,
            streams.derive_seed(seed, idx, 2),
            floor=floor,
            model=model,
            truth=recal.truth,
            workers=workers,
        )
        report.extra.update({"xi": float(xi), "xi_w": float(xi_w), "w": w.tolist()})
        out[design.covariate] = report
    return out
