"""
Command line entry point: ``targeting <verb> ...``

    allocate    run one rule on a panel file and write the transfers
    simulate    run a Monte-Carlo experiment from a config file
    fit-prior   fit the NPMLE prior of a panel and write it with diagnostics
    evaluate    score a transfers file against a panel carrying y_true

Exit status is 0 on success, 1 when an experiment produced error records or
a computation failed, and 2 for unusable input or configuration.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
import pandas as pd
from dotenv import load_dotenv

from src.allocation.projection import TransferVector
from src.data_pipline.config_file import load_experiment
from src.data_pipline.panel_intake import ingest_panel, read_transfers, write_transfers
from src.empirical_bayes.npmle import DEFAULT_MAX_ITER, DEFAULT_TOL, GridSpacing, NPMLEConfig, fit_prior
from src.empirical_bayes.prior_file import read_prior, write_fitted_prior
from src.evaluation.metrics import LossKind, evaluate_allocation
from src.rules.decision_rules import PolicyContext, RuleKind, RuleSpec, apply_rule
from src.simulation.engine import run_experiment
from src.simulation.summary import records_to_frame, summarize, write_replications_csv, write_summary_json
from src.utilities.app_logger import AppLogger
from src.utilities.errors import (
    InvalidConfigError,
    InvalidInputError,
    PanelIngestError,
    TargetingException,
)
from src.utilities.plots import loss_ratio_boxplot

EXIT_OK: int = 0
EXIT_FAILURE: int = 1
EXIT_USAGE: int = 2

REPLICATIONS_FILE: str = "replications.csv"
SUMMARY_FILE: str = "summary.json"
PRIOR_SIDECAR_SUFFIX: str = ".prior.txt"

logger = AppLogger().get_logger(__name__)


def _loss_kind(value: str) -> LossKind:
    return LossKind(value.replace("-", "_"))


def _rule_options(pairs: Sequence[str]) -> dict[str, str]:
    options: dict[str, str] = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key.strip():
            raise InvalidConfigError(f"rule option {pair!r} must read key=value")
        options[key.strip()] = value.strip()
    return options


def _write_json(payload: dict[str, Any], path: Optional[Path]) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def cmd_allocate(args: argparse.Namespace) -> int:
    """ Run one rule on an ingested panel and write household_id,transfer with a metadata footer """
    household = ingest_panel(args.panel)
    spec = RuleSpec(args.rule, _rule_options(args.option))
    ctx = PolicyContext(args.z, args.budget)

    true_prior = read_prior(args.prior) if args.prior is not None else None
    if spec.kind is RuleKind.ORACLE_BAYES and true_prior is None:
        raise InvalidConfigError("oracle_bayes needs --prior")

    result = apply_rule(spec, household.panel, ctx, true_prior=true_prior, true_incomes=household.true_incomes)
    write_transfers(
        args.out,
        household.household_ids,
        result.transfers.transfers,
        rule=result.rule,
        multiplier=result.multiplier,
        spend=result.spend,
    )
    logger.info("allocate rule=%s n=%d spend=%.6g out=%s", result.rule, len(household), result.spend, args.out)

    if result.prior_fit is not None:
        sidecar = Path(str(args.out) + PRIOR_SIDECAR_SUFFIX)
        write_fitted_prior(sidecar, result.prior_fit)
        logger.info("allocate fitted prior written to %s", sidecar)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    """ Run every SNR level of an experiment file; writes replications.csv, summary.json and optional SVGs """
    plan = load_experiment(args.config, seed=args.seed, output_dir=args.out, plots=args.plots, loss=args.loss)
    plan.output_dir.mkdir(parents=True, exist_ok=True)

    records = [record for config in plan.configs for record in run_experiment(config)]
    frame = records_to_frame(records)
    summary = summarize(frame)

    csv_path = write_replications_csv(frame, plan.output_dir / REPLICATIONS_FILE)
    json_path = write_summary_json(summary, plan.output_dir / SUMMARY_FILE)
    logger.info("simulate wrote %s and %s", csv_path, json_path)

    if plan.plots:
        for snr in plan.snr_levels:
            svg = loss_ratio_boxplot(frame, snr, plan.output_dir / f"loss_ratio_snr_{snr:g}.svg")
            logger.info("simulate plot %s", svg)

    if summary["error_records"]:
        logger.error("simulate finished with %d error record(s)", summary["error_records"])
        return EXIT_FAILURE
    return EXIT_OK


def cmd_fit_prior(args: argparse.Namespace) -> int:
    """ Fit the NPMLE prior of a panel file; diagnostics go to <out>.json """
    household = ingest_panel(args.panel)
    config = NPMLEConfig(grid_size=args.grid_size, tol=args.tol, max_iter=args.max_iter, grid_spacing=args.grid_spacing)
    fit = fit_prior(household.panel, config)

    write_fitted_prior(args.out, fit)
    diagnostics = {
        "n": fit.n,
        "grid_size": len(fit.prior),
        "grid_lower": fit.grid_lower,
        "grid_upper": fit.grid_upper,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "average_log_likelihood": fit.log_likelihood,
        "stationarity_residual": fit.stationarity_residual,
        "certified": fit.certified,
        "trace_monotone": fit.trace_monotone,
        "prior_mean": fit.prior.mean(),
        "effective_support_size": fit.prior.effective_support_size(),
    }
    diagnostics_path = Path(str(args.out) + ".json")
    _write_json(diagnostics, diagnostics_path)
    logger.info("fit-prior iterations=%d loglik=%.9f out=%s", fit.iterations, fit.log_likelihood, args.out)
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    """ Score a transfers file against the y_true column of a panel file """
    household = ingest_panel(args.panel)
    if not household.has_true_incomes:
        raise InvalidInputError(f"{args.panel} has no y_true column to evaluate against")

    ids, transfers = read_transfers(args.transfers)
    by_id = pd.Series(transfers, index=list(ids))
    if set(ids) != set(household.household_ids) or len(ids) != len(household):
        raise InvalidInputError("transfers and panel do not list the same households")
    aligned = by_id.loc[list(household.household_ids)].to_numpy(dtype=float)

    budget = args.budget if args.budget is not None else float(np.sum(aligned))
    if args.budget is None and budget == 0:
        raise InvalidInputError("every transfer is zero; pass --budget to score the allocation against a budget")
    report = evaluate_allocation(TransferVector(aligned, budget), household.true_incomes, args.z, args.loss)
    _write_json(report.as_dict(), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="targeting", description="Transfer targeting with noisy income estimates")
    verbs = parser.add_subparsers(dest="verb", required=True)

    allocate = verbs.add_parser("allocate", help="run one rule on a panel file")
    allocate.add_argument("panel", type=Path)
    allocate.add_argument("--rule", required=True, choices=[k.value for k in RuleKind])
    allocate.add_argument("--option", action="append", default=[], metavar="KEY=VALUE", help="rule option, repeatable")
    allocate.add_argument("--z", type=float, required=True, help="poverty line")
    allocate.add_argument("--budget", type=float, required=True)
    allocate.add_argument("--prior", type=Path, default=None, help="prior file, required by oracle_bayes")
    allocate.add_argument("--out", type=Path, required=True)
    allocate.set_defaults(handler=cmd_allocate)

    simulate = verbs.add_parser("simulate", help="run a Monte-Carlo experiment")
    simulate.add_argument("--config", type=Path, required=True)
    simulate.add_argument("--seed", type=int, default=None)
    simulate.add_argument("--out", type=Path, default=None, help="output directory")
    simulate.add_argument("--plots", action=argparse.BooleanOptionalAction, default=None)
    simulate.add_argument("--loss", type=_loss_kind, default=None, metavar="{squared,one-sided}")
    simulate.set_defaults(handler=cmd_simulate)

    prior = verbs.add_parser("fit-prior", help="fit the NPMLE prior of a panel file")
    prior.add_argument("panel", type=Path)
    prior.add_argument("--grid-size", type=int, default=None)
    prior.add_argument("--tol", type=float, default=DEFAULT_TOL)
    prior.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    prior.add_argument("--grid-spacing", type=GridSpacing, default=GridSpacing.EQUAL, choices=list(GridSpacing))
    prior.add_argument("--out", type=Path, required=True)
    prior.set_defaults(handler=cmd_fit_prior)

    evaluate = verbs.add_parser("evaluate", help="score a transfers file against true incomes")
    evaluate.add_argument("transfers", type=Path)
    evaluate.add_argument("panel", type=Path)
    evaluate.add_argument("--z", type=float, required=True, help="poverty line")
    evaluate.add_argument("--budget", type=float, default=None, help="defaults to the total transferred")
    evaluate.add_argument("--loss", type=_loss_kind, default=LossKind.SQUARED, metavar="{squared,one-sided}")
    evaluate.add_argument("--out", type=Path, default=None, help="report path, stdout when omitted")
    evaluate.set_defaults(handler=cmd_evaluate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (InvalidConfigError, InvalidInputError, PanelIngestError) as e:
        logger.error("%s failed: %s", args.verb, e)
        print(f"error[{e.code}]: {e}", file=sys.stderr)
        return EXIT_USAGE
    except TargetingException as e:
        logger.error("%s failed: %s", args.verb, e)
        print(f"error[{e.code}]: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
