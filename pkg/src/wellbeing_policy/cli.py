"""Command line entry point.

Exit codes: 0 success, 1 stage failure, 2 invalid configuration.
Every flag can also come from an environment variable named
``WELLBEING_POLICY_<FLAG>`` (``--out-dir`` -> ``WELLBEING_POLICY_OUT_DIR``);
a flag beats the environment, which beats the config file.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import load_config, validate_config
from .errors import ConfigError, PolicyError
from .fixtures import DEFAULT_SEED, generate_fixtures
from .pipeline import STAGES, run_pipeline, run_stage

ENV_PREFIX = "WELLBEING_POLICY_"
EXIT_OK, EXIT_STAGE, EXIT_CONFIG = 0, 1, 2


def _env(name: str) -> str | None:
    v = os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"))
    return v if v not in (None, "") else None


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wellbeing-policy",
        description="Survey regression + energy policy sweep + well-being coupling.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_run_flags=True):
        p.add_argument("--config", help="run config (TOML)")
        p.add_argument("--out-dir", help="artifact directory (overrides paths.out_dir)")
        if with_run_flags:
            p.add_argument("--workers", type=_positive_int, help="worker processes for the sweep")
            p.add_argument("--seed", type=int, help="run seed")
            p.add_argument("--types", help="comma-separated value types, e.g. A,B,C")

    common(sub.add_parser("run", help="run every stage in order"))
    for stage in STAGES:
        common(sub.add_parser(stage, help=f"run the {stage} stage only"))
    common(sub.add_parser("validate", help="check a config file and list every problem"))
    fx = sub.add_parser("make-fixtures", help="write the synthetic survey, sensors and config")
    fx.add_argument("--out-dir", help="target directory")
    fx.add_argument("--seed", type=int, help=f"fixture seed (default {DEFAULT_SEED})")
    return parser


def _resolve(args) -> tuple[str | None, dict]:
    """Config path and dotted-key overrides, after applying flag > env."""
    def pick(flag):
        v = getattr(args, flag.replace("-", "_"), None)
        return v if v is not None else _env(flag)

    config = pick("config")
    overrides = {}
    out_dir = pick("out-dir")
    if out_dir is not None:
        overrides["paths.out_dir"] = str(Path(out_dir).resolve())
    for flag, key, conv in (("workers", "workers", int), ("seed", "seed", int), ("types", "coupling.types", str)):
        v = pick(flag)
        if v is None:
            continue
        try:
            overrides[key] = conv(v)
        except ValueError:
            raise ConfigError([(key, f"invalid value {v!r} for --{flag}")]) from None
    return config, overrides


def _print_diags(diags) -> None:
    for key, msg in diags:
        print(f"error: {key}: {msg}" if key else f"error: {msg}", file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    if args.command == "make-fixtures":
        out = args.out_dir or _env("out-dir") or "fixtures"
        seed = args.seed if args.seed is not None else int(_env("seed") or DEFAULT_SEED)
        cfg = generate_fixtures(out, seed)
        print(cfg)
        return EXIT_OK

    try:
        config, overrides = _resolve(args)
        if config is None:
            raise ConfigError([("--config", "no config file given (flag or WELLBEING_POLICY_CONFIG)")])
        if args.command == "validate":
            diags = validate_config(config, overrides)
            if diags:
                _print_diags(diags)
                return EXIT_CONFIG
            print(f"{config}: valid")
            return EXIT_OK
        cfg = load_config(config, overrides=overrides)
    except ConfigError as exc:  # includes syntax errors
        _print_diags(exc.diagnostics)
        return EXIT_CONFIG

    try:
        if args.command == "run":
            manifest = run_pipeline(cfg)
            print(f"complete: {manifest.complete}; artifacts in {cfg.out_dir}")
        else:
            for p in run_stage(cfg, args.command):
                print(p)
    except PolicyError as exc:  # StageError carries the stage tag
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
