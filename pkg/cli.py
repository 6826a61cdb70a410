"""
Performative Bounds CLI

Simulate performative shifts, run repeated risk minimization, and evaluate
generalization bounds.

Usage:
    perfbounds gen-data --n 200 --pop-n 2000 --out data/
    perfbounds fit --data data/sample.csv
    perfbounds rerm --data data/sample.csv --xi 0.1 --T 3 --out trace.jsonl
    perfbounds bound --variant rq1-corollary --n 60147 --m 1816 --profile configs/appA2.json
    perfbounds sweep --config configs/appA3.json --out sweep.csv
    perfbounds validate --suite ot-oracle
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Optional

# Configure logging
logging.basicConfig(
    level=logging.WARNING,
    format="%(levelname)s: %(message)s"
)
logger = logging.getLogger(__name__)

# Config sections may not override these
RESERVED_DESTS = {"command", "func", "config"}


class UsageError(ValueError):
    """A required option is missing after config defaults were applied."""


def _need(args: argparse.Namespace, *names: str) -> None:
    missing = [f"--{name.replace('_', '-')}" for name in names if getattr(args, name) is None]
    if missing:
        raise UsageError(f"{args.command} needs {', '.join(missing)}")


def _emit(payload: Any, out: Optional[str]) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
        logger.info("Wrote %s", out)
    else:
        print(text)


def _int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def _float_list(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def _profile(args: argparse.Namespace):
    """Profile from --profile, else the config's profile section; --delta overrides."""
    from perfbounds import ConstantsProfile
    from perfbounds.datasets import load_profile

    if args.profile:
        profile = load_profile(args.profile)
    elif "profile" in args.config_data:
        profile = ConstantsProfile.from_dict(args.config_data["profile"])
    else:
        return None
    if args.delta is not None:
        profile = profile.replace(delta=args.delta)
    return profile


def cmd_gen_data(args):
    """Write a synthetic population and sample as dataset CSVs."""
    from perfbounds import SyntheticConfig, gen_synthetic
    from perfbounds.datasets import write_dataset

    _need(args, "n", "pop_n")
    cfg = SyntheticConfig(n=args.n, pop_n=args.pop_n, dim_x=args.dim_x, seed=args.seed)
    population, sample = gen_synthetic(cfg)
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    _emit({
        "population": str(write_dataset(population, out_dir / "population.csv")),
        "sample": str(write_dataset(sample, out_dir / "sample.csv")),
        "config": cfg.to_dict(),
        "prevalence": float(sample.labels.mean()),
    }, None)
    return 0


def _fit_config(args):
    from perfbounds import FitConfig

    return FitConfig(
        reg_lambda=args.reg_lambda,
        grad_tol=args.grad_tol,
        max_iters=args.max_iters,
        seed=args.seed,
        param_radius=args.param_radius,
    )


def cmd_fit(args):
    """Fit the regularized logistic model on a dataset."""
    from perfbounds import erm_fit
    from perfbounds.datasets import read_dataset

    _need(args, "data")
    result = erm_fit(read_dataset(args.data), _fit_config(args))
    _emit(result.to_dict(), args.out)
    return 0


def cmd_rerm(args):
    """Run repeated empirical risk minimization and export the trace."""
    from perfbounds import TopXiLabelFlip, run_rerm
    from perfbounds.datasets import load_map, read_dataset

    _need(args, "data", "T")
    if args.map:
        tmap = load_map(args.map)
    else:
        _need(args, "xi")
        tmap = TopXiLabelFlip(xi=args.xi, effectiveness=args.effectiveness, seed=args.seed)
    trace = run_rerm(
        read_dataset(args.data), tmap, args.T, _fit_config(args), p=args.p,
        record_wasserstein=not args.no_wasserstein,
    )
    if args.out:
        trace.write_jsonl(args.out)
    _emit(trace.summary(), None)
    return 0


def _format_report(report: dict[str, Any], audit: list[str]) -> str:
    lines = [f"{report['name']}: {report['total']:.6g} (confidence {report['confidence']:.4g})"]
    for name, value in report["terms"].items():
        lines.append(f"  {name:<22} {value:.6g}")
    for name, value in report["factors"].items():
        lines.append(f"  [{name}] {value:.6g}")
    lines.extend(f"  ! {warning}" for warning in audit)
    return "\n".join(lines)


def cmd_bound(args):
    """Evaluate one bound variant against a constants profile."""
    from perfbounds import compute_bound, constants_audit

    profile = _profile(args)
    if profile is None:
        raise UsageError("bound needs --profile or a config with a profile section")
    audit = constants_audit(profile)
    for warning in audit:
        logger.warning("%s", warning)
    params = {
        "T": args.T, "T_tilde": args.T_tilde, "m": args.m, "n": args.n,
        "m_list": args.m_list, "R": args.R, "eps": args.eps,
        "complexity": args.complexity, "B": args.B,
    }
    report = compute_bound(args.variant, profile, **params).to_dict()
    if args.format == "text":
        text = _format_report(report, audit)
        if args.out:
            Path(args.out).write_text(text + "\n", encoding="utf-8")
        else:
            print(text)
        return 0
    _emit({**report, "audit": audit}, args.out)
    return 0


def cmd_sweep(args):
    """Bound decomposition over the treated share xi, as CSV."""
    from perfbounds import DomainBox, FitConfig, SweepConfig, run_sweep, write_sweep_csv
    from perfbounds.sweep import default_sweep_profile, sweep_frame, write_sweep_svg

    _need(args, "n")
    profile = _profile(args)
    if profile is None:
        profile = default_sweep_profile(DomainBox.unit(dim_x=args.dim_x))
        if args.delta is not None:
            profile = profile.replace(delta=args.delta)
    extra = {"xi_grid": tuple(args.xi_grid)} if args.xi_grid else {}
    cfg = SweepConfig(
        profile=profile,
        n=args.n,
        pop_n=args.pop_n or args.n,
        seed=args.seed,
        dim_x=args.dim_x,
        bound_variant=args.variant,
        B=args.B,
        complexity_inf=args.complexity,
        fit=FitConfig(reg_lambda=args.reg_lambda),
        formula_only=args.formula_only,
        workers=args.workers,
        **extra,
    )
    rows = run_sweep(cfg)
    if args.out:
        write_sweep_csv(rows, args.out)
    else:
        csv_text = sweep_frame(rows).to_csv(index=False, float_format="%.17g", na_rep="nan")
        sys.stdout.write(csv_text)
    if args.svg:
        write_sweep_svg(rows, args.svg)
    return 0


def cmd_validate(args):
    """Run validation campaigns; exit 1 when any check fails."""
    from perfbounds.validation import SUITES, run_suite

    names = list(SUITES) if args.suite == "all" else [args.suite]
    results = []
    for name in names:
        overrides = {}
        if args.delta is not None and name == "wald-coverage":
            overrides["delta"] = args.delta
        results.append(run_suite(name, seed=args.seed, **overrides))
    passed = all(r.passed for r in results)
    _emit({"passed": passed, "suites": [r.to_dict() for r in results]}, args.out)
    return 0 if passed else 1


def build_parser(
    defaults: Optional[dict[str, dict[str, Any]]] = None,
) -> argparse.ArgumentParser:
    """Argument parser; ``defaults`` maps a subcommand to option defaults from a config."""
    from perfbounds.bounds import VARIANTS
    from perfbounds.validation import SUITES

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="Random seed (default: 0)")
    common.add_argument("--config", metavar="FILE", help="JSON config supplying defaults")
    common.add_argument("--delta", type=float, help="Confidence parameter override")
    common.add_argument("-o", "--out", metavar="PATH", help="Write output to PATH")
    common.add_argument("-v", "--verbose", action="store_true", help="Log progress to stderr")

    fit_opts = argparse.ArgumentParser(add_help=False)
    fit_opts.add_argument("--reg-lambda", type=float, default=1.0, help="L2 strength gamma")
    fit_opts.add_argument("--grad-tol", type=float, default=1e-8)
    fit_opts.add_argument("--max-iters", type=int, default=10_000)
    fit_opts.add_argument("--param-radius", type=float, default=1e3)

    parser = argparse.ArgumentParser(
        prog="perfbounds",
        description="Generalization bounds under performative shifts",
        epilog="Example: perfbounds bound --variant rq1-corollary --profile configs/appA2.json"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", parents=[common], help="Generate synthetic data")
    gen.add_argument("--n", type=int, help="Sample size")
    gen.add_argument("--pop-n", type=int, help="Population size")
    gen.add_argument("--dim-x", type=int, default=28, help="Feature count (default: 28)")
    gen.set_defaults(func=cmd_gen_data)

    fit = sub.add_parser("fit", parents=[common, fit_opts], help="Fit the logistic model")
    fit.add_argument("--data", metavar="CSV", help="Dataset CSV")
    fit.set_defaults(func=cmd_fit)

    rerm = sub.add_parser("rerm", parents=[common, fit_opts], help="Repeated ERM trace")
    rerm.add_argument("--data", metavar="CSV", help="Dataset CSV")
    rerm.add_argument("--map", metavar="FILE", help="Transition map JSON")
    rerm.add_argument("--xi", type=float, help="Treated share for a label-flip map")
    rerm.add_argument("--effectiveness", type=float, default=1.0)
    rerm.add_argument("--T", type=int, help="Rounds")
    rerm.add_argument("--p", type=float, default=2.0, help="Wasserstein order")
    rerm.add_argument("--no-wasserstein", action="store_true", help="Skip exact W_p per step")
    rerm.set_defaults(func=cmd_rerm)

    bound = sub.add_parser("bound", parents=[common], help="Evaluate a bound")
    bound.add_argument("--variant", choices=VARIANTS, default="rq1-corollary")
    bound.add_argument("--profile", metavar="FILE", help="Constants profile (or config) JSON")
    bound.add_argument("--n", type=int)
    bound.add_argument("--m", type=int)
    bound.add_argument("--T", type=int)
    bound.add_argument("--T-tilde", type=int)
    bound.add_argument("--m-list", type=_int_list, metavar="M1,M2,...")
    bound.add_argument("--R", type=float, help="Radius for the gen-gap variants")
    bound.add_argument("--eps", type=float, help="Sensitivity override for in-sample-shift")
    bound.add_argument("--complexity", type=float, help="Entropy integral override")
    bound.add_argument("--B", type=float)
    bound.add_argument("--format", choices=["json", "text"], default="json")
    bound.set_defaults(func=cmd_bound)

    sweep = sub.add_parser("sweep", parents=[common], help="xi sweep as CSV")
    sweep.add_argument("--profile", metavar="FILE", help="Constants profile (or config) JSON")
    sweep.add_argument("--n", type=int)
    sweep.add_argument("--pop-n", type=int)
    sweep.add_argument("--dim-x", type=int, default=28)
    sweep.add_argument("--variant", choices=["gen_gap_I", "gen_gap_II"], default="gen_gap_I")
    sweep.add_argument("--B", type=float)
    sweep.add_argument("--complexity", type=float)
    sweep.add_argument("--xi-grid", type=_float_list, metavar="X1,X2,...")
    sweep.add_argument("--reg-lambda", type=float, default=1.0)
    sweep.add_argument("--formula-only", action="store_true", help="Skip the realized gap")
    sweep.add_argument("--workers", type=int, default=1)
    sweep.add_argument("--svg", metavar="PATH", help="Also write an SVG plot")
    sweep.set_defaults(func=cmd_sweep)

    validate = sub.add_parser("validate", parents=[common], help="Run validation suites")
    validate.add_argument("--suite", choices=[*SUITES, "all"], default="all")
    validate.set_defaults(func=cmd_validate)

    subcommands = {"gen-data": gen, "fit": fit, "rerm": rerm, "bound": bound,
                   "sweep": sweep, "validate": validate}
    for command, values in (defaults or {}).items():
        subcommands[command].set_defaults(**values)
    return parser


def _config_path(args: argparse.Namespace) -> Optional[str]:
    """--config, or a --profile file that is itself a sectioned config."""
    from perfbounds.datasets import read_json

    if args.config:
        return args.config
    profile = getattr(args, "profile", None)
    if profile:
        data = read_json(profile)
        if isinstance(data, dict) and "profile" in data:
            return profile
    return None


def _parse(argv: Optional[list[str]]) -> argparse.Namespace:
    """Parse twice when a config applies: its section for the subcommand becomes the defaults."""
    from perfbounds.datasets import load_config

    args = build_parser().parse_args(argv)
    path = _config_path(args)
    if path is None:
        args.config_data = {}
        return args
    config = load_config(path)
    section = dict(config.get(args.command, {}))
    unknown = sorted(set(section) - set(vars(args)) | set(section) & RESERVED_DESTS)
    if unknown:
        raise ValueError(f"{path}: unknown {args.command} options: {', '.join(unknown)}")
    args = build_parser({args.command: section}).parse_args(argv)
    args.config_data = config
    return args


def main(argv: Optional[list[str]] = None) -> int:
    try:
        args = _parse(argv)
        if args.verbose:
            logging.getLogger("perfbounds").setLevel(logging.INFO)
        return args.func(args)
    except Exception as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
