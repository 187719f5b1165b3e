"""Command-line entry point: ``he2coherence <command> [--config PATH] [--out DIR] [--seed N]``.

Exit codes: 0 success, 2 validation error, 3 parse error, 4 non-convergence.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__, bath, recipes
from .config import ConfigError, ConfigParseError, RunConfig, load_config
from .io import CSVParseError
from .rotor import PulseError, TruncationError
from .signal import MissingPeakError, ResolutionError, SamplingError

EXIT_OK, EXIT_VALIDATION, EXIT_PARSE, EXIT_NONCONVERGED = 0, 2, 3, 4

log = logging.getLogger("he2coherence")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML run configuration (default: shipped defaults)")
    common.add_argument("--out", type=Path, help="output directory (default: [output] dir)")
    common.add_argument("--seed", type=int, help="seed for noise and multi-start (default: [fit] seed)")
    common.add_argument(
        "--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override one config key"
    )
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="he2coherence", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    k = sub.add_parser("simulate-kick", parents=[common], help="populations and coherences after the kick")
    k.add_argument("--energies", type=float, nargs="+", help="kick energies in uJ (default: [pulse] energies_uJ)")

    s = sub.add_parser("synthesize", parents=[common], help="synthetic LD trace and its spectrum")
    s.add_argument("--with-35", action="store_true", help="include the N=3->5 line")

    sp = sub.add_parser("spectrum", parents=[common], help="spectrum and peaks of an LD trace CSV")
    sp.add_argument("trace", type=Path)

    f = sub.add_parser("fit", parents=[common], help="run one of the fits")
    f.add_argument("recipe", choices=sorted(recipes.FITTERS))
    src = f.add_mutually_exclusive_group()
    src.add_argument("--data", type=Path, help="measured data CSV")
    src.add_argument("--synthetic", action="store_true", help="generate data from the configured truth")

    r = sub.add_parser("run", parents=[common], help="run a figure recipe (or 'all')")
    r.add_argument("recipe", choices=sorted(recipes.RECIPES) + ["all"])

    sub.add_parser("validate", parents=[common], help="check bath table, constants and basis")
    return p


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    cfg.validate()
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set {item!r}: expected SECTION.KEY=VALUE")
        cfg.set(key.strip(), value.strip())
    if args.seed is not None:
        cfg.fit.seed = args.seed
    return cfg


def _report(outcome: recipes.Outcome) -> None:
    for path in outcome.files:
        print(path)
    for k, v in outcome.summary.items():
        log.info("%s = %s", k, v)


def run(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _load(args)
        seed = cfg.fit.seed
        out = args.out or Path(cfg.output.dir)
        if args.command == "validate":
            checks = recipes.cmd_validate(cfg)
            text = recipes.format_checks(checks)
            sys.stdout.write(text)
            if args.out:
                args.out.mkdir(parents=True, exist_ok=True)
                (args.out / "validate.txt").write_text(text, encoding="utf-8")
            return EXIT_VALIDATION if any(c.status == "FAIL" for c in checks) else EXIT_OK
        if args.command == "simulate-kick":
            outcome = recipes.cmd_simulate_kick(cfg, out, seed, args.energies)
        elif args.command == "synthesize":
            outcome = recipes.cmd_synthesize(cfg, out, seed, include_35=True if args.with_35 else None)
        elif args.command == "spectrum":
            outcome = recipes.cmd_spectrum(cfg, args.trace, out, seed)
        elif args.command == "fit":
            if args.data is None and not args.synthetic:
                print("error: fit needs --data PATH or --synthetic", file=sys.stderr)
                return EXIT_VALIDATION
            outcome = recipes.cmd_fit(cfg, args.recipe, out / args.recipe, seed, args.data)
        else:
            names = list(recipes.RECIPES) if args.recipe == "all" else [args.recipe]
            converged = True
            for name in names:
                o = recipes.run_recipe(cfg, name, out / name, seed)
                _report(o)
                converged &= o.converged
            return EXIT_OK if converged else EXIT_NONCONVERGED
    except (ConfigParseError, CSVParseError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (
        ConfigError,
        bath.BathTableError,
        bath.TemperatureRangeError,
        TruncationError,
        PulseError,
        SamplingError,
        ResolutionError,
        MissingPeakError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    _report(outcome)
    if not outcome.converged:
        print("error: fit did not converge; report written", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
