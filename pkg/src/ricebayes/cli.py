"""``ricebayes`` command line.

Exit status: 0 success, 2 usage or input error, 3 the posterior is not
guaranteed proper and sampling was refused, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .classical import asymptotic_ci, mle_estimate, mm_estimate
from .errors import DomainError, ImproperPosteriorError, RiceBayesError
from .io import InputError, chain_to_csv, dumps, envelope, load_chain, load_sample
from .mcmc import McmcConfig, geweke_z, run_chain, summarize
from .model import RicianParams
from .predictive import draw_predictive, predictive_summary
from .priors import PriorSpec, check_moment_finiteness, check_propriety
from .study import StudyConfig, outage_curve, run_study, study_mcmc_defaults

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IMPROPER = 3
EXIT_NUMERIC = 4

SEED_ENV = "RICEBAYES_SEED"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}")


def _prior(text):
    try:
        return PriorSpec.parse(text)
    except DomainError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _level(text):
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError("level must lie in (0, 1)")
    return v


def _grid(text):
    """``start:stop:count`` or a comma-separated list."""
    try:
        if ":" in text:
            start, stop, count = text.split(":")
            grid = np.linspace(float(start), float(stop), int(count))
        else:
            grid = np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None
    if grid.size < 1 or grid[0] < 0 or not np.all(np.diff(grid) > 0) or not np.isfinite(grid[-1]):
        raise argparse.ArgumentTypeError("grid must hold finite, nonnegative, "
                                         "strictly increasing thresholds")
    return grid


def _default_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise _UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help=f"random seed (default: ${SEED_ENV} or 0)")
    common.add_argument("--level", type=_level, default=0.95, help="interval level")
    common.add_argument("--out", default="-", help="output file (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")

    mc = _Parser(add_help=False)
    mc.add_argument("--prior", type=_prior, default=PriorSpec.jeffreys(),
                    help="jeffreys | power:EPS | tails:R0,RINF,K")
    mc.add_argument("--iterations", type=int, default=None)
    mc.add_argument("--burn-in", type=int, default=None)
    mc.add_argument("--thin", type=int, default=None)
    mc.add_argument("--chains", type=int, default=None)

    p = _Parser(prog="ricebayes", description="Objective Bayesian inference for the Rice law.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    fit = sub.add_parser("fit", parents=[common, mc], help="estimate (eta, alpha) from a sample")
    fit.add_argument("data", help="sample file, one value per line ('-' for stdin)")
    fit.add_argument("--method", choices=("mm", "mle", "bayes"), default="bayes")
    fit.add_argument("--chain-out", help="also write the posterior draws as CSV")
    fit.add_argument("--allow-improper", action="store_true",
                     help="sample even when propriety is not guaranteed")

    cp = sub.add_parser("check-prior", parents=[common], help="propriety verdict for a prior")
    cp.add_argument("--prior", type=_prior, required=True)
    cp.add_argument("--n", type=int, required=True)
    cp.add_argument("--all-equal", action="store_true", help="the observations are all equal")

    sim = sub.add_parser("simulate", parents=[common], help="run a repeated-sampling study")
    sim.add_argument("config", help="JSON study configuration")

    pr = sub.add_parser("predict", parents=[common], help="posterior predictive summary")
    pr.add_argument("--chain", required=True, help="chain CSV written by fit --chain-out")

    out = sub.add_parser("outage", parents=[common], help="outage probability curve")
    out.add_argument("--chain", required=True, help="chain CSV written by fit --chain-out")
    out.add_argument("--grid", type=_grid, default=_grid("0:15:31"),
                     help="thresholds as start:stop:count or a comma list")
    return p


def _mcmc_config(args, seed):
    fields = {"prior": args.prior, "seed": seed}
    for name in ("iterations", "burn_in", "thin", "chains"):
        value = getattr(args, name)
        if value is not None:
            fields[name] = value
    try:
        return replace(McmcConfig(), **fields)
    except DomainError as exc:
        raise InputError(str(exc)) from None


def _cmd_fit(args, seed):
    s = load_sample(args.data)
    if args.method == "mm":
        rep = mm_estimate(s)
        return envelope("fit", {"n": s.n, "estimate": rep.to_dict()}), None
    if args.method == "mle":
        rep = mle_estimate(s)
        payload = {"n": s.n, "estimate": rep.to_dict()}
        if rep.converged:
            payload["wald_intervals"] = asymptotic_ci(rep, s, args.level).to_dict()
        return envelope("fit", payload), None
    cfg = _mcmc_config(args, seed)
    c = run_chain(s, cfg, allow_improper=args.allow_improper)
    summ = summarize(c, args.level)
    diag = {
        "acceptance": {"eta": c.accept_rate_eta.tolist(), "alpha": c.accept_rate_alpha.tolist()},
        "geweke": {"eta": [geweke_z(c.draws[k, :, 0]) for k in range(c.n_chains)],
                   "alpha": [geweke_z(c.draws[k, :, 1]) for k in range(c.n_chains)]},
    }
    payload = {"n": s.n, "prior": cfg.prior.to_dict(), "mcmc": cfg.to_dict(),
               "propriety": check_propriety(cfg.prior, s.n, not s.all_equal).to_dict(),
               "posterior": summ.to_dict()}
    if args.chain_out:
        with open(args.chain_out, "w", encoding="utf-8") as fh:
            fh.write(chain_to_csv(c))
    if args.format == "csv":
        return envelope("fit", payload, seed, diag), chain_to_csv(c)
    return envelope("fit", payload, seed, diag), None


def _cmd_check_prior(args, seed):
    distinct = not args.all_equal
    if args.n < 1:
        raise InputError("--n must be at least 1")
    payload = {
        "prior": args.prior.to_dict(),
        "n": args.n,
        "distinct_data": distinct,
        "propriety": check_propriety(args.prior, args.n, distinct).to_dict(),
        "first_moments": check_moment_finiteness(args.prior, args.n, distinct).to_dict(),
    }
    return envelope("check-prior", payload), None


def _replace_config(cfg, fields):
    try:
        return replace(cfg, **fields)
    except DomainError as exc:
        raise InputError(str(exc)) from None


def _study_config(path, explicit_seed, fallback_seed, level):
    """Study settings from JSON; ``--seed`` beats the file, which beats the default."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    truth = raw.get("true_params", {"eta": 6.0, "alpha": 2.0})
    mcmc = dict(raw.get("mcmc", {}))
    if "prior" in mcmc:
        raise InputError("the study prior is set through 'methods', not 'mcmc'")
    kwargs = {
        "true_params": RicianParams(truth["eta"], truth["alpha"]),
        "mcmc": _replace_config(study_mcmc_defaults(), mcmc),
        "seed": explicit_seed if explicit_seed is not None else raw.get("seed", fallback_seed),
        "level": raw.get("level", level),
    }
    for key in ("n_grid", "replications", "methods"):
        if key in raw:
            kwargs[key] = raw[key]
    try:
        return StudyConfig(**kwargs)
    except DomainError as exc:
        raise InputError(f"{path}: {exc}") from None


def _cmd_simulate(args, seed):
    cfg = _study_config(args.config, args.seed, seed, args.level)
    table = run_study(cfg)
    text = table.to_csv() if args.format == "csv" else None
    return envelope("simulate", table.to_dict(), cfg.seed), text


def _cmd_predict(args, seed):
    c = load_chain(args.chain)
    d = draw_predictive(c, seed)
    payload = {"draws": len(d), "predictive": predictive_summary(d, args.level).to_dict()}
    text = None
    if args.format == "csv":
        text = "y_new\n" + "".join(f"{v!r}\n" for v in d.values.tolist())
    return envelope("predict", payload, seed), text


def _cmd_outage(args, seed):
    c = load_chain(args.chain)
    curve = outage_curve(c, args.grid, args.level)
    text = curve.to_csv() if args.format == "csv" else None
    return envelope("outage", curve.to_dict()), text


_COMMANDS = {
    "fit": _cmd_fit,
    "check-prior": _cmd_check_prior,
    "simulate": _cmd_simulate,
    "predict": _cmd_predict,
    "outage": _cmd_outage,
}


def _emit(text, out):
    if out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def dispatch(argv=None):
    """Run one command; returns ``(exit_status, report_or_None)``."""
    try:
        args = build_parser().parse_args(argv)
        seed = args.seed if args.seed is not None else _default_seed()
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE, None
    try:
        report, text = _COMMANDS[args.command](args, seed)
    except ImproperPosteriorError as exc:
        verdict = exc.verdict.to_dict() if exc.verdict is not None else None
        report = envelope(args.command, {"refused": str(exc), "propriety": verdict}, seed)
        _emit(dumps(report), args.out)
        print(f"ricebayes: {exc}", file=sys.stderr)
        return EXIT_IMPROPER, report
    except (InputError, OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        print(f"ricebayes: {exc}", file=sys.stderr)
        return EXIT_USAGE, None
    except (RiceBayesError, ArithmeticError, ValueError) as exc:
        print(f"ricebayes: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC, None
    _emit(text if text is not None else dumps(report), args.out)
    return EXIT_OK, report


def main(argv=None):
    return dispatch(argv)[0]


if __name__ == "__main__":
    sys.exit(main())
