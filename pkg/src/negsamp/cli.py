"""Command-line surface: sample, pilot, fit, experiment.

Exit codes: 0 on success, 1 on numerical failure (non-convergence,
separation, singular information), 2 on usage or validation problems
(bad flags, malformed files, impossible configurations).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import io
from .errors import (
    ConditioningError,
    ConfigError,
    ContractError,
    DataFormatError,
    DegenerateInputError,
    EstimabilityError,
    FitError,
    SeparationError,
    UnsupportedOperationError,
)
from .estimators import FitSpec, fit_ipw, fit_lik, fit_mle
from .experiments import (
    Design,
    run_floor_sensitivity,
    run_model_misspec,
    run_mse_sweep,
    run_table1,
)
from .model import Dataset
from .pilot import Perturb, PilotConfig, build_pilot
from .sampling import SCHEMES, UNIFORM, SamplingPlan, draw_subsample, score_t, solve_truncation

_USAGE_ERRORS = (
    ConfigError,
    ContractError,
    DataFormatError,
    DegenerateInputError,
    UnsupportedOperationError,
)
_NUMERICAL_ERRORS = (FitError, SeparationError, EstimabilityError, ConditioningError)


def _scheme_arg(value: str) -> str:
    scheme = value.replace("-", "_")
    if scheme not in SCHEMES:
        raise argparse.ArgumentTypeError(
            f"unknown scheme {value!r}; choose from " + ", ".join(s.replace("_", "-") for s in SCHEMES)
        )
    return scheme


def _perturb_arg(value: str) -> Perturb:
    kind, sep, scale = value.partition(":")
    if not sep:
        raise argparse.ArgumentTypeError("perturbation must look like kind:scale, e.g. add_uniform:1.5")
    try:
        return Perturb(kind, float(scale))
    except (ValueError, ConfigError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="negsamp",
        description="Nonuniform negative sampling for imbalanced logistic regression.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="subsample the negative class of a dataset")
    p.add_argument("--input", required=True, help="dataset CSV (y,x1..xd)")
    p.add_argument("--output", required=True, help="subsample CSV (y,pi,x1..xd)")
    p.add_argument("--scheme", type=_scheme_arg, default=UNIFORM)
    p.add_argument("--rho", type=float, required=True, help="negative sampling rate in (0,1]")
    p.add_argument("--floor", type=float, default=1e-6, help="lower clamp on negative sampling probabilities")
    p.add_argument("--pilot", help="pilot JSON (required for nonuniform schemes)")
    p.add_argument("--truncate", action="store_true", help="cap scores at the solved feasibility threshold")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sidecar", help="sidecar JSON path (default: OUTPUT.json)")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("pilot", help="draw and fit a balanced pilot, write it as JSON")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--scheme", type=_scheme_arg, required=True)
    p.add_argument("--per-class", type=int, default=100, dest="per_class")
    p.add_argument("--perturb", type=_perturb_arg, help="kind:scale, e.g. add_uniform:1.5")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_pilot)

    p = sub.add_parser("fit", help="fit an estimator and write the result as JSON")
    p.add_argument("--input", required=True, help="dataset or subsample CSV")
    p.add_argument("--estimator", choices=("mle", "ipw", "lik"), required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--pilot", help="pilot JSON used as the starting point")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=100, dest="max_iter")
    p.add_argument("--allow-nonconverged", action="store_true")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("experiment", help="run a simulation study from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir", required=True, dest="output_dir")
    p.add_argument("--seed", type=int, help="override the config's master seed")
    p.add_argument("--workers", type=int, help="override the worker count")
    p.set_defaults(func=cmd_experiment)

    return parser


def cmd_sample(args) -> int:
    data = io.read_dataset(args.input)
    pilot = None
    if args.scheme != UNIFORM:
        if not args.pilot:
            raise ConfigError(f"--scheme {args.scheme.replace('_', '-')} requires --pilot")
        pilot = io.read_pilot(args.pilot)
    plan = SamplingPlan(args.scheme, rho=args.rho, floor=args.floor, pilot=pilot)
    if args.truncate and args.scheme != UNIFORM:
        neg = data.x[data.y == 0]
        cap = solve_truncation(score_t(plan, neg), plan.rho)
        plan = dataclasses.replace(plan, truncation_t=cap)
    sub = draw_subsample(data, plan, args.seed)
    io.write_subsample(args.output, sub)

    kept_pos = int((sub.y == 1).sum())
    sidecar = {
        "schema": 1,
        "plan": {
            "scheme": args.scheme.replace("_", "-"),
            "rho": plan.rho,
            "floor": plan.floor,
            "truncation_t": None if math.isinf(plan.truncation_t) else plan.truncation_t,
        },
        "pilot": None
        if pilot is None
        else {
            "alpha": pilot.theta_tilde.alpha,
            "beta": pilot.theta_tilde.beta.tolist(),
            "omega": pilot.omega_tilde,
        },
        "counts": {
            "input_rows": data.n,
            "kept_rows": sub.m,
            "positives": kept_pos,
            "negatives_kept": sub.m - kept_pos,
        },
        "pi_min": float(sub.pi.min()) if sub.m else None,
        "pi_max": float(sub.pi.max()) if sub.m else None,
        "seed": args.seed,
    }
    io.write_json(args.sidecar or f"{args.output}.json", sidecar)
    return 0


def cmd_pilot(args) -> int:
    data = io.read_dataset(args.input)
    cfg = PilotConfig(per_class_size=args.per_class, perturb=args.perturb)
    bundle = build_pilot(data, cfg, args.scheme, args.seed)
    io.write_pilot(args.output, bundle)
    return 0


def cmd_fit(args) -> int:
    init = None
    if args.pilot:
        init = io.read_pilot(args.pilot).theta_tilde
    if args.estimator == "mle":
        y, _, x = io.read_table(args.input)
        result = fit_mle(
            Dataset(x=x, y=y), FitSpec(tol=args.tol, max_iter=args.max_iter, init=init)
        )
    else:
        sub = io.read_subsample(args.input)
        fitter = fit_ipw if args.estimator == "ipw" else fit_lik
        result = fitter(sub, tol=args.tol, max_iter=args.max_iter, init=init)
    io.write_json(args.output, result.to_json())
    if not result.converged and not args.allow_nonconverged:
        print(
            f"error: fit did not converge (gradient norm {result.grad_norm:.3e} "
            f"after {result.iterations} iterations)",
            file=sys.stderr,
        )
        return 1
    return 0


def _strict(node: dict, allowed: dict, where: str) -> dict:
    """Pop known keys with defaults; reject anything unexpected."""
    if not isinstance(node, dict):
        raise ConfigError(f"{where} must be an object")
    unknown = set(node) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    return {k: node.get(k, default) for k, default in allowed.items()}


_MISSING = object()


def _require(cfg: dict, key: str, where: str):
    if cfg[key] is _MISSING:
        raise ConfigError(f"{where} is missing the required key {key!r}")
    return cfg[key]


def _parse_design(node, where: str) -> Design:
    fields = _strict(
        node,
        {
            "covariate": _MISSING,
            "n": _MISSING,
            "d": 6,
            "beta_true": None,
            "alpha_true": None,
            "target_ratio": 1.0 / 400.0,
        },
        where,
    )
    return Design(
        covariate=_require(fields, "covariate", where),
        n=_require(fields, "n", where),
        d=fields["d"],
        beta_true=None if fields["beta_true"] is None else np.asarray(fields["beta_true"]),
        alpha_true=fields["alpha_true"],
        target_ratio=fields["target_ratio"],
    )


def _parse_pilot(node, where: str) -> PilotConfig | None:
    if node is None:
        return None
    fields = _strict(node, {"per_class_size": 100, "perturb": None}, where)
    perturb = None
    if fields["perturb"] is not None:
        p = _strict(fields["perturb"], {"kind": _MISSING, "scale": _MISSING}, f"{where}.perturb")
        perturb = Perturb(_require(p, "kind", where), _require(p, "scale", where))
    return PilotConfig(per_class_size=fields["per_class_size"], perturb=perturb)


def cmd_experiment(args) -> int:
    path = Path(args.config)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} does not exist") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from None
    if not isinstance(raw, dict) or "kind" not in raw:
        raise ConfigError("config must be an object with a 'kind' key")
    kind = raw.pop("kind")
    outdir = Path(args.output_dir)

    if kind == "mse_sweep":
        cfg = _strict(
            raw,
            {
                "design": _MISSING,
                "rho_grid": _MISSING,
                "methods": _MISSING,
                "replications": _MISSING,
                "pilot": None,
                "floor": 1e-6,
                "seed": 0,
                "workers": None,
            },
            "mse_sweep config",
        )
        report = run_mse_sweep(
            _parse_design(_require(cfg, "design", "config"), "design"),
            _require(cfg, "rho_grid", "config"),
            _require(cfg, "methods", "config"),
            int(_require(cfg, "replications", "config")),
            _parse_pilot(cfg["pilot"], "pilot"),
            args.seed if args.seed is not None else int(cfg["seed"]),
            floor=cfg["floor"],
            workers=args.workers if args.workers is not None else cfg["workers"],
        )
        report.write(outdir)
    elif kind == "table1":
        cfg = _strict(
            raw,
            {
                "correct": True,
                "pairs": None,
                "replications": 100,
                "d": 2,
                "include_largest": True,
                "seed": 0,
            },
            "table1 config",
        )
        report = run_table1(
            bool(cfg["correct"]),
            args.seed if args.seed is not None else int(cfg["seed"]),
            pairs=cfg["pairs"],
            reps=int(cfg["replications"]),
            d=int(cfg["d"]),
            include_largest=bool(cfg["include_largest"]),
        )
        report.write(outdir)
    elif kind == "floor_sensitivity":
        cfg = _strict(
            raw,
            {
                "design": _MISSING,
                "rho": _MISSING,
                "floor_grid": _MISSING,
                "methods": ("uniW", "uniLik", "optW", "optLik"),
                "replications": _MISSING,
                "pilot": None,
                "seed": 0,
                "workers": None,
            },
            "floor_sensitivity config",
        )
        report = run_floor_sensitivity(
            _parse_design(_require(cfg, "design", "config"), "design"),
            float(_require(cfg, "rho", "config")),
            _require(cfg, "floor_grid", "config"),
            int(_require(cfg, "replications", "config")),
            args.seed if args.seed is not None else int(cfg["seed"]),
            pilot_cfg=_parse_pilot(cfg["pilot"], "pilot"),
            methods=tuple(cfg["methods"]),
            workers=args.workers if args.workers is not None else cfg["workers"],
        )
        report.write(outdir)
    elif kind == "model_misspec":
        cfg = _strict(
            raw,
            {
                "xi": _MISSING,
                "xi_w": _MISSING,
                "designs": _MISSING,
                "rho_grid": (0.002, 0.004, 0.006, 0.01, 0.02),
                "methods": ("uniW", "uniLik", "optW", "optLik"),
                "replications": _MISSING,
                "pilot": None,
                "floor": 1e-6,
                "seed": 0,
                "workers": None,
            },
            "model_misspec config",
        )
        designs = [
            _parse_design(node, f"designs[{i}]")
            for i, node in enumerate(_require(cfg, "designs", "config"))
        ]
        reports = run_model_misspec(
            float(_require(cfg, "xi", "config")),
            float(_require(cfg, "xi_w", "config")),
            designs,
            int(_require(cfg, "replications", "config")),
            args.seed if args.seed is not None else int(cfg["seed"]),
            rho_grid=tuple(cfg["rho_grid"]),
            methods=tuple(cfg["methods"]),
            pilot_cfg=_parse_pilot(cfg["pilot"], "pilot"),
            floor=cfg["floor"],
            workers=args.workers if args.workers is not None else cfg["workers"],
        )
        for covariate, report in reports.items():
            report.write(outdir / covariate)
    else:
        raise ConfigError(f"unknown experiment kind {kind!r}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _NUMERICAL_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())
