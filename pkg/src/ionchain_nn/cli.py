"""Command line entry point ``ionchain-nn``.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure,
4 file system error.
"""
from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, NumericalError
from .harness import KINDS, PRESETS, load_config, parse_config, replicate, run, schema_text

EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 2, 3, 4


def _common(p):
    p.add_argument("--config", help="INI-style experiment config")
    p.add_argument("--seed", type=int, help="override run.master_seed")
    p.add_argument("--out", help="output directory (beats $IONCHAIN_NN_OUT and the config)")
    p.add_argument("--threads", type=int, help="worker threads for scan points")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ionchain-nn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        _common(sub.add_parser(kind, help=f"run the {kind} experiment"))
    rep = sub.add_parser("replicate", help="rerun a bundled figure and check it")
    rep.add_argument("figure", choices=sorted(PRESETS))
    _common(rep)
    sub.add_parser("schema", help="print the config keys")
    return parser


def _report(manifest, out=None):
    out = out or sys.stdout
    for f in manifest.files:
        rows = f" ({f['rows']} rows)" if "rows" in f else ""
        print(f"wrote {f['name']}{rows}", file=out)
    for c in manifest.checks:
        status = "PASS" if c["passed"] else "FAIL"
        print(f"{status} {c['check']}: {c['value']:.6g} vs {c['threshold']:.6g}", file=out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "schema":
        sys.stdout.write(schema_text())
        return 0
    if args.threads is not None and args.threads < 1:
        print("ConfigError: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "replicate":
            overrides = open(args.config).read() if args.config else None
            manifest = replicate(args.figure, args.out, args.seed, args.threads, overrides)
        else:
            cfg = load_config(args.config) if args.config else parse_config("")
            if cfg.kind is None:
                cfg = cfg.with_values(run__kind=args.command)
            elif cfg.kind != args.command:
                raise ConfigError(f"run.kind is {cfg.kind!r} but the subcommand is {args.command!r}")
            manifest = run(cfg, args.out, args.seed, args.threads)
    except ConfigError as exc:
        print(f"ConfigError: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        # parameter values rejected by the model constructors
        print(f"ConfigError: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _report(manifest)
    return 0


if __name__ == "__main__":
    sys.exit(main())
