"""Command-line entry point.

Exit codes: 0 ok, 1 unexpected failure, 2 config error, 3 catalog error,
4 rater identifiability error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .experiment import ConfigError, ExperimentConfig, run_experiment
from .pharmacology import CatalogError, parse_catalog, read_catalog, default_catalog_text
from .raters import IdentifiabilityError, RatingsTable, evaluate, fit, vlog_shaped_table, split, standardize

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_CATALOG, EXIT_IDENTIFIABILITY = 0, 1, 2, 3, 4

log = logging.getLogger("fluentrx")


def _env_seed() -> int | None:
    env = os.environ.get("FLUENTRX_SEED")
    if not env:
        return None
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"FLUENTRX_SEED must be an integer, got {env!r}") from None


def _seed(args) -> int | None:
    return args.seed if args.seed is not None else _env_seed()


def _resolve_config(args) -> ExperimentConfig:
    """Precedence, lowest first: defaults, FLUENTRX_SEED, config file, flags."""
    data = {}
    env = _env_seed()
    if env is not None:
        data["master_seed"] = env
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}:{exc.lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{args.config}: top level must be a JSON object")
        data.update(raw)
    overrides = {
        "master_seed": args.seed,
        "n_runs": args.runs,
        "horizon_days": args.horizon,
        "noise_std": args.noise_std,
        "alpha": args.alpha,
        "policy": args.policy,
        "catalog_path": args.catalog,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(data)


def cmd_simulate(args) -> int:
    try:
        config = _resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        catalog = config.load_catalog()
    except FileNotFoundError:
        print(f"catalog error: {config.catalog_path}: file not found", file=sys.stderr)
        return EXIT_CATALOG
    except CatalogError as exc:
        print(f"catalog error: {config.catalog_path or 'default catalog'}: {exc}", file=sys.stderr)
        return EXIT_CATALOG
    log.info("running %d trials with policy %s", config.n_runs, config.policy)
    summary, _ = run_experiment(config, catalog, out_dir=args.out, write_traces=args.traces,
                                workers=args.workers)
    print(f"runs={config.n_runs} policy={config.policy} success={summary.success_rate:.3f} "
          f"failure={summary.failure_rate:.3f} neutral={summary.neutral_rate:.3f} "
          f"mean_terminal={summary.mean_terminal_fluency:.3f}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    try:
        table = RatingsTable.read(args.ratings)
    except (OSError, ValueError) as exc:
        print(f"ratings error: {args.ratings}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    seed = _seed(args) or 0
    rng = np.random.default_rng(seed)
    try:
        full = fit(table)
        train, val = split(table, args.train_fraction, rng, by=args.split_by)
        model = fit(train)
    except IdentifiabilityError as exc:
        print(f"identifiability error: {exc}", file=sys.stderr)
        return EXIT_IDENTIFIABILITY
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    metrics = {
        "train": evaluate(model, train),
        "validation": evaluate(model, val),
        "full": evaluate(full, table),
        "train_fraction": args.train_fraction,
        "seed": seed,
        "split_by": args.split_by,
        "rater_bias": full.alpha,
        "scale_note": "ratings on 1-7; differences read the same on the 0-6 scale",
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "standardized_ratings.csv").write_text(standardize(table, full).to_csv(), encoding="utf-8")
    text = json.dumps(metrics, indent=2, sort_keys=True) + "\n"
    (out / "metrics.json").write_text(text, encoding="utf-8")
    v = metrics["validation"]
    print(f"validation rmse={v['rmse']:.3f} baseline_rmse={v['baseline_rmse']:.3f} "
          f"train r_squared={metrics['train']['r_squared']}")
    return EXIT_OK


def cmd_catalog_validate(args) -> int:
    try:
        text = Path(args.catalog).read_text(encoding="utf-8") if args.catalog else default_catalog_text()
    except OSError as exc:
        print(f"catalog error: {args.catalog}: {exc.strerror}", file=sys.stderr)
        return EXIT_CATALOG
    try:
        catalog = parse_catalog(text)
    except CatalogError as exc:
        print(f"catalog error: {args.catalog or 'default catalog'}: {exc}", file=sys.stderr)
        return EXIT_CATALOG
    for line, med in enumerate(catalog, start=2):
        lo, hi = med.onset_range
        print(f"line {line}: {med.name}: onset {lo}-{hi} days, "
              f"response {med.response_rate_range[0]:.3f}-{med.response_rate_range[1]:.3f} OK")
    print(f"{len(catalog)} medications OK")
    return EXIT_OK


def cmd_make_synthetic(args) -> int:
    seed = _seed(args) or 0
    table = vlog_shaped_table(np.random.default_rng(seed), noise_std=args.noise_std)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(table.to_csv(), encoding="utf-8")
    print(f"wrote {len(table)} ratings for {len(table.clips)} clips to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fluentrx", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the Monte Carlo treatment experiment")
    sim.add_argument("--config", type=Path)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--runs", type=int)
    sim.add_argument("--horizon", type=int)
    sim.add_argument("--noise-std", type=float)
    sim.add_argument("--alpha", type=float)
    sim.add_argument("--policy", choices=["linucb", "random", "none"])
    sim.add_argument("--catalog", type=str)
    sim.add_argument("--out", type=Path, default=Path("out"))
    sim.add_argument("--traces", action="store_true", help="write one day-level CSV per run")
    sim.add_argument("--workers", type=int, default=1)
    sim.set_defaults(func=cmd_simulate)

    cal = sub.add_parser("calibrate-raters", help="fit rater biases and report agreement metrics")
    cal.add_argument("ratings", type=Path)
    cal.add_argument("--train-fraction", type=float, default=0.7)
    cal.add_argument("--split-by", choices=["observation", "clip", "channel"], default="observation")
    cal.add_argument("--seed", type=int)
    cal.add_argument("--out", type=Path, default=Path("out"))
    cal.set_defaults(func=cmd_calibrate)

    val = sub.add_parser("catalog-validate", help="parse a medication catalog CSV")
    val.add_argument("catalog", nargs="?", help="CSV path (default: shipped catalog)")
    val.set_defaults(func=cmd_catalog_validate)

    syn = sub.add_parser("make-synthetic-ratings", help="write a synthetic ratings CSV")
    syn.add_argument("--seed", type=int)
    syn.add_argument("--noise-std", type=float, default=0.9)
    syn.add_argument("--out", type=Path, default=Path("ratings.csv"))
    syn.set_defaults(func=cmd_make_synthetic)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
