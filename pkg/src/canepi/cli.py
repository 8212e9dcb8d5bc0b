"""Command-line front end.

    canepi run --scenarios rs,p1,p2,p3,p4,p5 --seed 42 --out results
    canepi validate-config --config my.json
    canepi presets
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .analysis import (load_historical, scenario_comparison_table, validate_against_history,
                       write_comparison_csv, write_scenario_csv)
from .config import SCENARIO_NAME, config_from_dict, config_to_dict, parse_config, presets_document, \
    scenario_to_dict
from .engine import run_scenario
from .errors import CanepiError, ConfigError, ParameterError
from .stochastics import RNG_ALGORITHM

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
DEFAULT_SCENARIOS = "rs,p1,p2,p3,p4,p5"

log = logging.getLogger("canepi")


def _parse_years(text: str) -> tuple[int, int]:
    try:
        start, end = (int(x) for x in text.split(":"))
    except ValueError:
        raise ConfigError("expected START:END", key="--years") from None
    if start >= end:
        raise ConfigError("START must precede END", key="--years")
    return start, end


def _parse_seed(args) -> int | None:
    raw = args.seed if args.seed is not None else os.environ.get("CANEPI_SEED")
    if raw is None:
        return None
    try:
        seed = int(raw)
    except ValueError:
        raise ConfigError(f"not an integer: {raw!r}", key="seed") from None
    if not 0 <= seed < 2**64:
        raise ConfigError("must be a 64-bit unsigned integer", key="seed")
    return seed


def resolve(args):
    """Config and scenario list after applying command-line overrides."""
    if args.config:
        config, scenarios = parse_config(args.config)
    else:
        config, scenarios = config_from_dict({})
    changes = {}
    seed = _parse_seed(args)
    if seed is not None:
        changes["seed"] = seed
    if args.realizations is not None:
        if args.realizations < 1:
            raise ConfigError("must be at least 1", key="--realizations")
        changes["realizations"] = args.realizations
    if args.years:
        changes["start_year"], changes["end_year"] = _parse_years(args.years)
    config = config.replace(**changes)
    names = [s.strip() for s in args.scenarios.split(",") if s.strip()]
    if not names:
        raise ConfigError("no scenarios given", key="--scenarios")
    selected = []
    for name in names:
        key = name if name in scenarios else name.lower()
        if key not in scenarios:
            raise ConfigError(f"unknown scenario {name!r}; known: {', '.join(scenarios)}", key="--scenarios")
        selected.append(scenarios[key])
    return config, selected


def _comparison_years(years: list[int]) -> list[int]:
    picked = [y for y in range(2010, years[-1] + 1, 5) if y in years]
    return picked or years


def cmd_run(args) -> int:
    config, scenarios = resolve(args)
    historical = load_historical(Path(args.historical)) if args.historical else None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = {}
    for spec in scenarios:
        if not SCENARIO_NAME.match(spec.name):
            raise ConfigError("invalid scenario name", key=f"scenarios.{spec.name}")
        log.info("running scenario %s (%d realizations)", spec.name, config.realizations)
        network_dir = out / "network" / spec.name if args.export_network else None
        results[spec.name] = run_scenario(spec, config, workers=args.workers, network_dir=network_dir)

    config_echo = json.dumps(config_to_dict(config), sort_keys=True, separators=(",", ":"))
    for name, result in results.items():
        meta = {
            "tool": f"canepi {__version__}",
            "scenario": name,
            "master_seed": config.seed,
            "rng": RNG_ALGORITHM,
            "realizations": config.realizations,
            "scenario_spec": json.dumps(scenario_to_dict(result.scenario), sort_keys=True, separators=(",", ":")),
            "config": config_echo,
        }
        write_scenario_csv(out / f"{name}.csv", result, meta)
        print(f"wrote {out / f'{name}.csv'}")

    reference = "rs"
    if reference in results and len(results) > 1:
        rows = scenario_comparison_table(results, _comparison_years(config.years), reference)
        meta = {"tool": f"canepi {__version__}", "master_seed": config.seed, "rng": RNG_ALGORITHM,
                "reference": reference}
        write_comparison_csv(out / "comparison.csv", rows, meta)
        print(f"wrote {out / 'comparison.csv'}")
        for row in rows:
            print(f"  {row}")

    if historical is not None:
        target = results.get(reference) or next(iter(results.values()))
        report = validate_against_history(target, historical, alpha=args.alpha)
        print(f"{target.name} vs historical series: {report}")
    return EXIT_OK


def cmd_validate(args) -> int:
    config, scenarios = parse_config(args.config) if args.config else config_from_dict({})
    doc = config_to_dict(config)
    doc["scenarios"] = {name: scenario_to_dict(spec) for name, spec in scenarios.items()}
    print(json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_presets(args) -> int:
    print(json.dumps(presets_document(), indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="canepi", description="HIV spread on a scale-free MSM contact network")
    parser.add_argument("--version", action="version", version=f"canepi {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate scenarios and write CSV output")
    run.add_argument("--config", help="JSON config file")
    run.add_argument("--scenarios", default=DEFAULT_SCENARIOS, help="comma-separated scenario names")
    run.add_argument("--seed", help="master seed (falls back to $CANEPI_SEED, then the config)")
    run.add_argument("--realizations", type=int)
    run.add_argument("--years", help="START:END, inclusive")
    run.add_argument("--out", default="canepi-out", help="output directory")
    run.add_argument("--historical", help="CSV with columns year,incidence_per_100py")
    run.add_argument("--alpha", type=float, default=0.05, help="t-test significance level")
    run.add_argument("--export-network", action="store_true", help="write yearly edge lists of realization 0")
    run.add_argument("--workers", type=int, default=1, help="processes used for realizations")
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate-config", help="check a config file and print the resolved result")
    val.add_argument("config", nargs="?")
    val.add_argument("--config", dest="config_opt")
    val.set_defaults(func=cmd_validate)

    pre = sub.add_parser("presets", help="print the built-in scenarios as a config block")
    pre.set_defaults(func=cmd_presets)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config_opt", None):
        args.config = args.config_opt
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CanepiError, ParameterError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
