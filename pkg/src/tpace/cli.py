"""Command-line entry point: ``tpace analyze | simulate | validate``.

Exit status: 0 success, 1 usage error, 2 data or model error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .counterfactual import CensoringKind, Effect, needs_draws
from .errors import DataError, ModelError, NumericalError, ParameterError
from .io import emit_report, parse_dataset_csv, write_dataset_csv
from .simulate import SimConfig, brocade_like_config, simulate_trial
from .tipping import CRITERIA, SearchConfig, TpaceConfig, fit_models, run_tpace

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 by default, which is reserved here for data errors
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _criteria(text: str) -> tuple[str, ...]:
    items = tuple(c.strip() for c in text.split(",") if c.strip())
    bad = [c for c in items if c not in CRITERIA]
    if bad or not items:
        raise argparse.ArgumentTypeError(f"expected a comma-separated subset of a,b,c, got {text!r}")
    return items


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tpace", description="Tipping point analysis by counterfactual elicitation.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    an = sub.add_parser("analyze", help="run the tipping point analysis on a dataset CSV")
    an.add_argument("--data", required=True, type=Path)
    an.add_argument("--effect", required=True, type=int, choices=(1, 2))
    an.add_argument("--criteria", type=_criteria, default=CRITERIA)
    an.add_argument("--censoring", choices=[k.value for k in CensoringKind], default=CensoringKind.CUTOFF.value)
    an.add_argument("--replicates", type=_positive_int, default=200)
    an.add_argument("--seed", type=int, default=None)
    an.add_argument("--lambda-min", type=float, default=None)
    an.add_argument("--lambda-max", type=float, default=None)
    an.add_argument("--lambda-step", type=float, default=None)
    an.add_argument("--tol", type=float, default=None, help="bisection tolerance on lambda (default 1e-3)")
    an.add_argument("--out", required=True, type=Path, help="output directory")

    sim = sub.add_parser("simulate", help="generate a dataset CSV from a simulation config")
    src = sim.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path, help="JSON file with SimConfig fields")
    src.add_argument("--preset", choices=("brocade",))
    sim.add_argument("--seed", type=int, default=None, help="overrides master_seed")
    sim.add_argument("--out", required=True, type=Path, help="output CSV path")

    val = sub.add_parser("validate", help="check a dataset CSV against the schema and invariants")
    val.add_argument("--data", required=True, type=Path)
    return parser


def _require_file(path: Path) -> None:
    if not path.is_file():
        raise UsageError(f"file not found: {path}")


def _search(args, effect: Effect) -> SearchConfig | None:
    given = (args.lambda_min, args.lambda_max, args.lambda_step, args.tol)
    if all(v is None for v in given):
        return None
    base = SearchConfig.default(effect)
    return SearchConfig(
        lam_min=base.lam_min if args.lambda_min is None else args.lambda_min,
        lam_max=base.lam_max if args.lambda_max is None else args.lambda_max,
        step=base.step if args.lambda_step is None else args.lambda_step,
        tol=base.tol if args.tol is None else args.tol,
    )


def _analyze(args) -> int:
    _require_file(args.data)
    effect = Effect(args.effect)
    dataset = parse_dataset_csv(args.data)
    search = _search(args, effect)
    models = fit_models(dataset, effect, args.censoring)
    if args.seed is None and needs_draws(dataset, effect, models.censoring):
        raise UsageError("--seed is required: this analysis draws random numbers")
    config = TpaceConfig(
        master_seed=args.seed,
        criteria=args.criteria,
        replicates=args.replicates,
        search=search,
        censoring=args.censoring,
    )
    report = run_tpace(dataset, effect, config, models)
    paths = emit_report(report, args.out)
    for diag in report.diagnostics:
        print(f"warning: {diag}", file=sys.stderr)
    for c in config.criteria:
        print(f"lambda_{c} = {report.lam(c):.4f}")
    if report.indices is not None:
        print(f"index_a = {report.indices.index_a:.4f}, index_b = {report.indices.index_b:.4f}")
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    return EXIT_OK


def _simulate(args) -> int:
    if args.config is not None:
        _require_file(args.config)
        try:
            payload = json.loads(args.config.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise UsageError(f"{args.config}: invalid JSON: {exc}") from None
        if not isinstance(payload, dict):
            raise UsageError(f"{args.config}: expected a JSON object of SimConfig fields")
        if args.seed is not None:
            payload["master_seed"] = args.seed
        try:
            config = SimConfig.from_dict(payload)
        except TypeError as exc:
            raise UsageError(f"{args.config}: {exc}") from None
    else:
        config = brocade_like_config(0 if args.seed is None else args.seed)
    dataset = simulate_trial(config)
    write_dataset_csv(dataset, args.out)
    print(f"wrote {len(dataset)} subjects ({dataset.n_events} events) to {args.out}")
    return EXIT_OK


def _validate(args) -> int:
    _require_file(args.data)
    dataset = parse_dataset_csv(args.data)
    print(
        f"ok: {len(dataset)} subjects ({dataset.n_experimental} E, {dataset.n_control} C), "
        f"{dataset.n_events} events, {int(dataset.has_maintenance.sum())} with maintenance"
    )
    return EXIT_OK


def main(argv=None) -> int:
    handlers = {"analyze": _analyze, "simulate": _simulate, "validate": _validate}
    try:
        args = build_parser().parse_args(argv)
        return handlers[args.command](args)
    except (UsageError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
